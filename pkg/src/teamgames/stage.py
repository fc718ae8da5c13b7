"""One-stage Bayesian games at a compressed-information cell.

Types are SPIs. For a type s and prescription g of team k the stage produces
a list of outcomes (x_t^k, u_t^k, s_{t+1}^k, prob) from the private belief over
the hidden window. Teams are coupled only through rewards and through the
continuation value, which the caller supplies as ``cont(i, y, u, s_next)``.
"""

from __future__ import annotations

import itertools
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .beliefs import CCI, InadmissibleError, private_belief
from .coordinator import SPI, _advance, prescription_space
from .model import GameSpec
from .normal_form import first_equilibrium

GAP_TOL = 1e-9
TIE_TOL = 1e-12
NF_CAP = 64

Policy = dict  # type -> np.ndarray over the team's prescription list


class StageGame:
    def __init__(
        self,
        spec: GameSpec,
        b: CCI,
        spaces: Sequence[Sequence[int]] | None = None,
        cont: Callable[[int, tuple, tuple, SPI], float] | None = None,
    ):
        self.spec = spec
        self.b = b
        self.t = b.t
        n = spec.n_teams
        self.spaces = [list(s) for s in spaces] if spaces is not None else [
            list(prescription_space(spec, k, self.t).indices()) for k in range(n)
        ]
        self.cont = cont
        self.types: list[list[SPI]] = []
        self.prior: list[np.ndarray] = []
        self._outcomes: list[dict] = [dict() for _ in range(n)]
        self._matrices: list[dict] = [dict() for _ in range(n)]
        for k in range(n):
            kept, probs = [], []
            for s, p in b.pis[k]:
                if p > 0 and self.outcomes(k, s) is not None:
                    kept.append(s)
                    probs.append(p)
            probs = np.array(probs, dtype=float)
            self.types.append(kept)
            self.prior.append(probs / probs.sum() if len(probs) else probs)
        self._payoff_cache: dict = {}

    def with_continuation(self, cont) -> "StageGame":
        other = object.__new__(StageGame)
        other.__dict__.update(self.__dict__)
        other.cont = cont
        other._payoff_cache = {}
        return other

    # -------------------------------------------------------------- outcomes

    def outcomes(self, k: int, s: SPI):
        """Per prescription position: tuple of (x_k, u_k, s_next, prob); None if s is inadmissible."""
        if s in self._outcomes[k]:
            return self._outcomes[k][s]
        spec, t, b = self.spec, self.t, self.b
        try:
            belief = private_belief(spec, k, t, b.own_y_window(k), b.u_window, s)
        except InadmissibleError:
            self._outcomes[k][s] = None
            return None
        space = prescription_space(spec, k, t)
        rows = []
        for g in self.spaces[k]:
            acc: dict = {}
            for win, p in belief.items():
                key = (win[-1], space.act(g, win), _advance(spec, k, t, s, win[0], g))
                acc[key] = acc.get(key, 0.0) + p
            rows.append(tuple((x, u, sn, p) for (x, u, sn), p in sorted(acc.items())))
        self._outcomes[k][s] = rows
        return rows

    def admissible(self, k: int, s: SPI) -> bool:
        return self.outcomes(k, s) is not None

    # --------------------------------------------------------------- payoffs

    def payoff(self, i: int, x: tuple, u: tuple, s_next: SPI) -> float:
        """Reward plus expected continuation, integrating observations analytically."""
        key = (i, x, u, s_next)
        got = self._payoff_cache.get(key)
        if got is not None:
            return got
        spec, t = self.spec, self.t
        val = spec.reward_at(i, t, x, u)
        if self.cont is not None and t < spec.horizon:
            rows = [[(y, q) for y, q in enumerate(spec.obs_row(k, t, x[k], u)) if q > 0] for k in range(spec.n_teams)]
            for combo in itertools.product(*rows):
                q = 1.0
                for _, qq in combo:
                    q *= qq
                val += q * self.cont(i, tuple(y for y, _ in combo), u, s_next)
        self._payoff_cache[key] = float(val)
        return float(val)

    def _matrix(self, k: int, s: SPI) -> tuple[list, np.ndarray]:
        """Distinct outcomes of type s and the position-by-outcome probability matrix."""
        got = self._matrices[k].get(s)
        if got is None:
            rows = self.outcomes(k, s)
            index: dict = {}
            for outs in rows:
                for x, u, sn, _ in outs:
                    index.setdefault((x, u, sn), len(index))
            mat = np.zeros((len(rows), len(index)))
            for pos, outs in enumerate(rows):
                for x, u, sn, p in outs:
                    mat[pos, index[(x, u, sn)]] += p
            got = self._matrices[k][s] = (list(index), mat)
        return got

    def marginal(self, k: int, pol: Policy) -> dict:
        """Distribution of (x_t^k, u_t^k) when team k plays pol under its prior."""
        out: dict = {}
        for s, ps in zip(self.types[k], self.prior[k]):
            keys, mat = self._matrix(k, s)
            for (x, u, _), w in zip(keys, np.asarray(pol[s]) @ mat):
                if w > 0:
                    out[(x, u)] = out.get((x, u), 0.0) + ps * w
        return out

    def values_against(self, i: int, s: SPI, margs: Sequence[dict | None]) -> np.ndarray:
        """Interim value of every own prescription for type s; margs[k] for k != i."""
        if self.outcomes(i, s) is None:
            return np.zeros(len(self.spaces[i]))
        n = self.spec.n_teams
        others = [k for k in range(n) if k != i]
        combos = []
        for parts in itertools.product(*[list(margs[k].items()) for k in others]):
            q = 1.0
            for _, p in parts:
                q *= p
            if q > 0:
                combos.append(({k: part[0] for k, part in zip(others, parts)}, q))
        keys, mat = self._matrix(i, s)
        w = np.zeros(len(keys))
        for j, (xi, ui, sn) in enumerate(keys):
            acc = 0.0
            for fixed, q in combos:
                x = tuple(xi if k == i else fixed[k][0] for k in range(n))
                u = tuple(ui if k == i else fixed[k][1] for k in range(n))
                acc += q * self.payoff(i, x, u, sn)
            w[j] = acc
        return mat @ w

    def interim_values(self, i: int, s: SPI, lam: Sequence[Policy]) -> np.ndarray:
        margs = [None if k == i else self.marginal(k, lam[k]) for k in range(self.spec.n_teams)]
        return self.values_against(i, s, margs)

    def interim_value(self, i: int, s: SPI, eta: np.ndarray, lam: Sequence[Policy]) -> float:
        return float(np.asarray(eta) @ self.interim_values(i, s, lam))

    # ----------------------------------------------------------------- audit

    def interim_gap(self, lam: Sequence[Policy], teams: Sequence[int] | None = None) -> float:
        gap = 0.0
        for i in range(self.spec.n_teams) if teams is None else teams:
            margs = [None if k == i else self.marginal(k, lam[k]) for k in range(self.spec.n_teams)]
            for s in self.types[i]:
                v = self.values_against(i, s, margs)
                gap = max(gap, float(v.max() - lam[i][s] @ v))
        return gap

    def best_reply(self, i: int, s: SPI, lam: Sequence[Policy]) -> np.ndarray:
        v = self.interim_values(i, s, lam)
        return _point(len(v), _argmax(v))

    def dp_backup(self, lam: Sequence[Policy], i: int, types: Sequence[SPI] | None = None) -> dict:
        """V_t^i(b, s) for the given types (default: positive-prior types)."""
        margs = [None if k == i else self.marginal(k, lam[k]) for k in range(self.spec.n_teams)]
        out = {}
        for s in self.types[i] if types is None else types:
            if not self.admissible(i, s):
                out[s] = 0.0
                continue
            v = self.values_against(i, s, margs)
            pol = lam[i].get(s)
            out[s] = float(v.max() if pol is None else pol @ v)
        return out

    # ----------------------------------------------------------------- solve

    def active(self) -> list[int]:
        return [k for k in range(self.spec.n_teams) if len(self.spaces[k]) > 1 and self.types[k]]

    def solve_ibne(
        self, rng: np.random.Generator | None = None, restarts: int = 4, fixed: Sequence[Policy] | None = None,
        teams: Sequence[int] | None = None,
    ) -> list[Policy] | None:
        """Interim equilibrium over positive-prior types; None if the search fails.

        With ``teams`` only those teams move; the others keep ``fixed``.
        """
        n = self.spec.n_teams
        lam = [dict(f) for f in fixed] if fixed is not None else [
            {s: _point(len(self.spaces[k]), 0) for s in self.types[k]} for k in range(n)
        ]
        movers = [k for k in (self.active() if teams is None else teams) if len(self.spaces[k]) > 1 and self.types[k]]
        for k in range(n):
            if len(self.spaces[k]) == 1:
                lam[k] = {s: np.ones(1) for s in self.types[k]}
        if not movers:
            return lam
        if len(movers) == 1:
            i = movers[0]
            lam[i] = {s: self.best_reply(i, s, lam) for s in self.types[i]}
            return lam
        if len(movers) == 2:
            a, c = movers
            na = len(self.spaces[a]) ** len(self.types[a])
            nc = len(self.spaces[c]) ** len(self.types[c])
            if na <= NF_CAP and nc <= NF_CAP:
                got = self._solve_two(a, c, lam)
                if got is not None:
                    return got
        return self._iterate(movers, lam, rng or np.random.default_rng(0), restarts)

    def _solve_two(self, a: int, c: int, lam: list[Policy]) -> list[Policy] | None:
        ta, tc = self.types[a], self.types[c]
        ga, gc = len(self.spaces[a]), len(self.spaces[c])
        fixed = [None if k in (a, c) else self.marginal(k, lam[k]) for k in range(self.spec.n_teams)]
        ua = np.zeros((len(ta), ga, len(tc), gc))
        uc = np.zeros((len(ta), ga, len(tc), gc))
        for jb, sc in enumerate(tc):
            for pc in range(gc):
                margs = list(fixed)
                margs[c] = _outcome_marginal(self.outcomes(c, sc)[pc])
                for ja, sa in enumerate(ta):
                    ua[ja, :, jb, pc] = self.values_against(a, sa, margs)
        for ja, sa in enumerate(ta):
            for pa in range(ga):
                margs = list(fixed)
                margs[a] = _outcome_marginal(self.outcomes(a, sa)[pa])
                for jb, sc in enumerate(tc):
                    uc[ja, pa, jb, :] = self.values_against(c, sc, margs)
        pa_, pc_ = self.prior[a], self.prior[c]
        rows = list(itertools.product(range(ga), repeat=len(ta)))
        cols = list(itertools.product(range(gc), repeat=len(tc)))
        A = np.zeros((len(rows), len(cols)))
        B = np.zeros((len(rows), len(cols)))
        for r, sa in enumerate(rows):
            for q, sc in enumerate(cols):
                va = vc = 0.0
                for ja in range(len(ta)):
                    for jb in range(len(tc)):
                        w = pa_[ja] * pc_[jb]
                        va += w * ua[ja, sa[ja], jb, sc[jb]]
                        vc += w * uc[ja, sa[ja], jb, sc[jb]]
                A[r, q], B[r, q] = va, vc
        eq = first_equilibrium(A, B)
        if eq is None:
            return None
        out = list(lam)
        out[a] = _type_policy(ta, ga, rows, eq.x)
        out[c] = _type_policy(tc, gc, cols, eq.y)
        return out

    def _iterate(self, movers, lam, rng, restarts, iters: int = 2000) -> list[Policy] | None:
        """Best-reply dynamics, then fictitious play on the type-contingent game, several starts."""
        for attempt in range(restarts):
            cur = [dict(p) for p in lam]
            if attempt:
                for k in movers:
                    cur[k] = {s: rng.dirichlet(np.ones(len(self.spaces[k]))) for s in self.types[k]}
            got = self._pure_dynamics(movers, cur)
            if got is not None:
                return got
            for it in range(1, iters + 1):
                replies = {k: {s: self.best_reply(k, s, cur) for s in self.types[k]} for k in movers}
                for k in movers:
                    cur[k] = {s: cur[k][s] + (replies[k][s] - cur[k][s]) / (it + 1) for s in self.types[k]}
                if it % 25 == 0 and self.interim_gap(cur, movers) <= GAP_TOL:
                    return cur
            got = self._pure_dynamics(movers, cur)
            if got is not None:
                return got
        return None

    def _pure_dynamics(self, movers, start, rounds: int = 50) -> list[Policy] | None:
        """Pure profile reached by sequential best replies from start, if any."""
        pure = [dict(p) for p in start]
        for _ in range(rounds):
            changed = False
            for k in movers:
                for s in self.types[k]:
                    br = self.best_reply(k, s, pure)
                    if not np.array_equal(br, pure[k][s]):
                        pure[k][s] = br
                        changed = True
            if not changed:
                return pure if self.interim_gap(pure, movers) <= GAP_TOL else None
        return None


def _outcome_marginal(outs) -> dict:
    m: dict = {}
    for x, u, _, p in outs:
        m[(x, u)] = m.get((x, u), 0.0) + p
    return m


def _type_policy(types, n_g, pures, mix) -> Policy:
    pol = {s: np.zeros(n_g) for s in types}
    for w, sigma in zip(mix, pures):
        if w <= 0:
            continue
        for s, pos in zip(types, sigma):
            pol[s][pos] += w
    for s in types:
        pol[s] = np.clip(pol[s], 0.0, None)
        pol[s] /= pol[s].sum()
    return pol


def _argmax(v: np.ndarray) -> int:
    return int(np.argmax(v >= v.max() - TIE_TOL))


@lru_cache(maxsize=None)
def _unit(n: int, k: int) -> tuple:
    return tuple(1.0 if j == k else 0.0 for j in range(n))


def _point(n: int, k: int) -> np.ndarray:
    return np.array(_unit(n, k))


def stage_payoff_Q(stage: StageGame, team: int, z: tuple, gamma: Sequence[int]) -> float:
    """Q for one realized (SPI profile, window profile, observation profile).

    z = (spis, windows, ys); gamma holds positions in each team's prescription list.
    Returns r + V_{t+1} at the successor reached by the given observations.
    """
    spis, windows, ys = z
    spec, t = stage.spec, stage.t
    n = spec.n_teams
    x = tuple(w[-1] for w in windows)
    u = tuple(
        prescription_space(spec, k, t).act(stage.spaces[k][gamma[k]], windows[k]) for k in range(n)
    )
    s_next = _advance(spec, team, t, spis[team], windows[team][0], stage.spaces[team][gamma[team]])
    val = spec.reward_at(team, t, x, u)
    if stage.cont is not None and t < spec.horizon:
        val += stage.cont(team, tuple(ys), u, s_next)
    return float(val)
