"""Coordinator lift: prescriptions, partially realized prescriptions (PRPs),
sufficient private information (SPI) and coordination strategies."""

from __future__ import annotations

import itertools
from functools import lru_cache
from typing import Callable, Iterator, Sequence

from .analysis import is_separable
from .model import GameSpec, SpecError

# An SPI is (team state index at t-d, PRP stack). The stack holds one entry per
# lag l = 1..d-1; each entry is a per-agent tuple of action tables over the
# agent's states at times t-d+1..t-l (lexicographic, earliest time first).
SPI = tuple
Dist = Sequence[tuple[int, float]]


class BudgetExceeded(RuntimeError):
    pass


def _prod(xs) -> int:
    out = 1
    for x in xs:
        out *= int(x)
    return out


class PrescriptionSpace:
    """All prescriptions of a team at time t, as dense tables in mixed radix.

    Digit order: agent 0 first, within an agent the windows in lexicographic
    order (earliest time most significant); the first digit is most
    significant. In simple mode only tables constant in all but the last window
    coordinate are enumerated, still addressed by their full-space index.
    """

    def __init__(self, spec: GameSpec, team: int, t: int, simple: bool = False):
        self.spec, self.team, self.t, self.simple = spec, team, t, simple
        d = spec.delay
        self.times = tuple(range(t - d + 1, t + 1))
        na = spec.n_agents(team)
        self.window_dims = [
            tuple(spec.agent_state_dims(team, s)[j] for s in self.times) for j in range(na)
        ]
        self.n_windows = [_prod(w) for w in self.window_dims]
        self.n_actions = list(spec.agent_action_dims(team, t))
        self.full_size = _prod(a ** w for a, w in zip(self.n_actions, self.n_windows))
        if simple:
            self.last_dims = [w[-1] for w in self.window_dims]
            self.size = _prod(a ** n for a, n in zip(self.n_actions, self.last_dims))
        else:
            self.size = self.full_size
        self._tables: dict[int, tuple] = {}
        self._agent_windows: dict[tuple, tuple[int, ...]] = {}

    def __len__(self) -> int:
        return self.size

    def __iter__(self) -> Iterator[int]:
        return iter(self.indices())

    def indices(self) -> Sequence[int]:
        if not self.simple:
            return range(self.full_size)
        out = []
        for digits in itertools.product(
            *[itertools.product(range(a), repeat=n) for a, n in zip(self.n_actions, self.last_dims)]
        ):
            tables = tuple(
                tuple(theta[w % n] for w in range(nw))
                for theta, n, nw in zip(digits, self.last_dims, self.n_windows)
            )
            out.append(self.index(tables))
        return out

    def decode(self, idx: int) -> tuple[tuple[int, ...], ...]:
        tab = self._tables.get(idx)
        if tab is not None:
            return tab
        if not 0 <= idx < self.full_size:
            raise IndexError(idx)
        rem = idx
        parts = []
        for a, nw in zip(reversed(self.n_actions), reversed(self.n_windows)):
            digits = []
            for _ in range(nw):
                rem, r = divmod(rem, a)
                digits.append(r)
            parts.append(tuple(reversed(digits)))
        tab = tuple(reversed(parts))
        self._tables[idx] = tab
        return tab

    def index(self, tables: Sequence[Sequence[int]]) -> int:
        idx = 0
        for a, tab, nw in zip(self.n_actions, tables, self.n_windows):
            if len(tab) != nw:
                raise SpecError("prescription table does not cover every window")
            for v in tab:
                if not 0 <= v < a:
                    raise SpecError(f"action {v} outside alphabet of size {a}")
                idx = idx * a + int(v)
        return idx

    def agent_windows(self, window: Sequence[int]) -> tuple[int, ...]:
        """Team window (team state index per time) -> per-agent window index."""
        window = tuple(window)
        got = self._agent_windows.get(window)
        if got is not None:
            return got
        if len(window) != len(self.times):
            raise SpecError(f"window has {len(window)} entries, expected {len(self.times)}")
        split = [self.spec.split_state(self.team, s, x) for s, x in zip(self.times, window)]
        out = []
        for j, dims in enumerate(self.window_dims):
            w = 0
            for comp, n in zip(split, dims):
                w = w * n + comp[j]
            out.append(w)
        got = tuple(out)
        self._agent_windows[window] = got
        return got

    def act(self, idx: int, window: Sequence[int]) -> int:
        tab = self.decode(idx)
        ws = self.agent_windows(window)
        return self.spec.merge_action(self.team, self.t, [tab[j][w] for j, w in enumerate(ws)])

    def agent_actions(self, idx: int, window: Sequence[int]) -> tuple[int, ...]:
        tab = self.decode(idx)
        return tuple(tab[j][w] for j, w in enumerate(self.agent_windows(window)))


@lru_cache(maxsize=None)
def prescription_space(spec: GameSpec, team: int, t: int, simple: bool = False) -> PrescriptionSpace:
    if not 1 <= t <= spec.horizon:
        raise SpecError(f"time {t} outside 1..{spec.horizon}")
    if simple and not is_separable(spec):
        raise SpecError("simple prescriptions require a separable game")
    return PrescriptionSpace(spec, team, t, simple)


def apply_prescription(spec: GameSpec, team: int, t: int, gamma: int, window: Sequence[int]) -> int:
    return prescription_space(spec, team, t).act(gamma, window)


# ---------------------------------------------------------------- SPI / PRP


def initial_spi(spec: GameSpec, team: int) -> SPI:
    na = spec.n_agents(team)
    return (0, tuple(tuple((0,) for _ in range(na)) for _ in range(spec.delay - 1)))


def _lag_dims(spec: GameSpec, team: int, t: int, lag: int) -> list[tuple[tuple[int, ...], int]]:
    """Per agent: (state dims over times t-d+1..t-lag, action count at t-lag)."""
    d = spec.delay
    times = range(t - d + 1, t - lag + 1)
    out = []
    for j in range(spec.n_agents(team)):
        dims = tuple(spec.agent_state_dims(team, s)[j] for s in times)
        out.append((dims, spec.agent_action_dims(team, t - lag)[j]))
    return out


def _partial(table: tuple, first: int, value: int) -> tuple:
    rest = len(table) // first
    return table[value * rest:(value + 1) * rest]


@lru_cache(maxsize=200_000)
def _advance(spec: GameSpec, team: int, t: int, s: SPI, x_rev: int, gamma: int) -> SPI:
    d = spec.delay
    space = prescription_space(spec, team, t)
    tables = space.decode(gamma)
    comp = spec.split_state(team, t - d + 1, x_rev)
    first = spec.agent_state_dims(team, t - d + 1)
    na = spec.n_agents(team)
    stack = []
    if d > 1:
        stack.append(tuple(_partial(tables[j], first[j], comp[j]) for j in range(na)))
        old = s[1]
        for lag in range(1, d - 1):
            stack.append(tuple(_partial(old[lag - 1][j], first[j], comp[j]) for j in range(na)))
    return (x_rev, tuple(stack))


def prp_advance(spec: GameSpec, team: int, t: int, s: SPI, x_revealed: int, gamma: int) -> SPI:
    """S_{t+1} from S_t, the newly revealed team state x_{t-d+1} and prescription gamma."""
    if len(s[1]) != spec.delay - 1:
        raise SpecError("PRP stack has the wrong number of lags")
    if not 0 <= x_revealed < spec.n_states(team, t - spec.delay + 1):
        raise SpecError("revealed state outside the alphabet")
    return _advance(spec, team, t, s, x_revealed, gamma)


def _spi_digits(spec: GameSpec, team: int, t: int) -> list[int]:
    digits = [spec.n_states(team, t - spec.delay)]
    for lag in range(1, spec.delay):
        for dims, na in _lag_dims(spec, team, t, lag):
            digits.extend([na] * _prod(dims))
    return digits


def spi_space_size(spec: GameSpec, team: int, t: int) -> int:
    return _prod(_spi_digits(spec, team, t))


def _spi_from_digits(spec: GameSpec, team: int, t: int, digits: Sequence[int]) -> SPI:
    pos = 1
    stack = []
    for lag in range(1, spec.delay):
        entry = []
        for dims, _ in _lag_dims(spec, team, t, lag):
            n = _prod(dims)
            entry.append(tuple(digits[pos:pos + n]))
            pos += n
        stack.append(tuple(entry))
    return (digits[0], tuple(stack))


@lru_cache(maxsize=None)
def spi_space(spec: GameSpec, team: int, t: int) -> tuple[SPI, ...]:
    """All SPIs at time t, in index order."""
    digits = _spi_digits(spec, team, t)
    return tuple(_spi_from_digits(spec, team, t, ds) for ds in itertools.product(*[range(n) for n in digits]))


def spi_index(spec: GameSpec, team: int, t: int, s: SPI) -> int:
    flat = [s[0]]
    for entry in s[1]:
        for tab in entry:
            flat.extend(tab)
    idx = 0
    for v, n in zip(flat, _spi_digits(spec, team, t)):
        idx = idx * n + v
    return idx


def spi_from_index(spec: GameSpec, team: int, t: int, idx: int) -> SPI:
    digits = _spi_digits(spec, team, t)
    out = []
    for n in reversed(digits):
        idx, r = divmod(idx, n)
        out.append(r)
    return _spi_from_digits(spec, team, t, list(reversed(out)))


def spi_from_history(spec: GameSpec, team: int, t: int, xpriv: Sequence[int], gammas: Sequence[int]) -> SPI:
    """Run the SPI recursion over a team history (x_{1:t-d}, gamma_{1:t-1})."""
    d = spec.delay
    s = initial_spi(spec, team)
    for tau in range(1, t):
        rev = tau - d + 1
        x = xpriv[rev - 1] if rev >= 1 else 0
        s = _advance(spec, team, tau, s, x, gammas[tau - 1])
    return s


# ------------------------------------------------------------- strategies


class TeamStrategy:
    """Behavioral coordination strategy of one team.

    ``dist`` receives the common history h0 (tuple of (y, u) per past time),
    the team's SPI and, when ``full_history`` is set, the pair
    (x_{1:t-d}, gamma_{1:t-1}); it returns (prescription, probability) pairs.
    """

    full_history = False

    def dist(self, t: int, h0: tuple, spi: SPI, hist: tuple | None) -> Dist:
        raise NotImplementedError


class SPIBStrategy(TeamStrategy):
    """Table-backed SPI-based strategy keyed by (t, h0, spi)."""

    def __init__(self, table: dict, default: Callable | None = None):
        self.table = table
        self.default = default

    def dist(self, t, h0, spi, hist=None):
        got = self.table.get((t, h0, spi))
        if got is None:
            if self.default is None:
                raise KeyError(f"no prescription distribution at t={t}, h0={h0}, spi={spi}")
            return self.default(t, h0, spi)
        return got


class HistoryStrategy(TeamStrategy):
    """Table-backed strategy keyed by (t, h0, x_{1:t-d}, gamma_{1:t-1})."""

    full_history = True

    def __init__(self, table: dict, default: Callable | None = None):
        self.table = table
        self.default = default

    def dist(self, t, h0, spi, hist):
        key = (t, h0) + tuple(hist)
        got = self.table.get(key)
        if got is None:
            if self.default is None:
                raise KeyError(f"no prescription distribution at {key}")
            return self.default(t, h0, spi, hist)
        return got


class FunctionStrategy(TeamStrategy):
    def __init__(self, fn: Callable, full_history: bool = False):
        self.fn = fn
        self.full_history = full_history

    def dist(self, t, h0, spi, hist):
        return self.fn(t, h0, spi, hist)


def point(gamma: int) -> Dist:
    return ((int(gamma), 1.0),)


# ----------------------------------------------------- strategy conversions

# An agent-level pure strategy of a team is a callable
#   mu(t, j, h0, xpriv, own_window) -> agent action index
# where xpriv = team states x_{1:t-d} and own_window = agent j's states at
# t-d+1..t (tuple of agent state indices).


def _agent_window_tuples(space: PrescriptionSpace, j: int) -> list[tuple[int, ...]]:
    return list(itertools.product(*[range(n) for n in space.window_dims[j]]))


def pure_to_coordination(spec: GameSpec, team: int, mu: Callable) -> TeamStrategy:
    """Curry an agent-level pure strategy on the hidden windows."""

    def fn(t, h0, spi, hist):
        xpriv = hist[0]
        space = prescription_space(spec, team, t)
        tables = []
        for j in range(spec.n_agents(team)):
            tab = []
            for w in _agent_window_tuples(space, j):
                a = mu(t, j, h0, xpriv, w)
                if a is None:
                    raise SpecError(f"agent strategy undefined at t={t}, agent {j}, window {w}")
                tab.append(int(a))
            tables.append(tuple(tab))
        return point(space.index(tables))

    return FunctionStrategy(fn, full_history=True)


def coordination_to_pure(spec: GameSpec, team: int, nu: TeamStrategy) -> Callable:
    """Agent-level pure strategy playing gamma_t(window) with gamma_{1:t} rebuilt recursively."""
    d = spec.delay

    def gammas_up_to(t, h0, xpriv):
        gammas: list[int] = []
        for tau in range(1, t + 1):
            xp = tuple(xpriv[: max(tau - d, 0)])
            s = spi_from_history(spec, team, tau, xp, gammas)
            dist = [(g, p) for g, p in nu.dist(tau, tuple(h0[: tau - 1]), s, (xp, tuple(gammas))) if p > 0]
            if len(dist) != 1:
                raise SpecError("coordination_to_pure needs a pure coordination strategy")
            gammas.append(dist[0][0])
        return gammas

    def mu(t, j, h0, xpriv, own_window):
        g = gammas_up_to(t, h0, xpriv)[-1]
        space = prescription_space(spec, team, t)
        w = 0
        for comp, n in zip(own_window, space.window_dims[j]):
            w = w * n + comp
        return space.decode(g)[j][w]

    return mu
