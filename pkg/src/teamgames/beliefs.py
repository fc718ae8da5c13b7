"""Belief computations: the strategy-independent private belief, the
consistency update of common beliefs over SPIs, off-path completions, the
signaling-free filter and a brute-force common-belief oracle."""

from __future__ import annotations

import itertools
from collections import defaultdict
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .coordinator import SPI, Dist, TeamStrategy, _advance, initial_spi, prescription_space
from .model import GameSpec
from .rollout import layers, team_window

OFF_PATH_EPS = 1e-300
ROUND_DIGITS = 9


class InadmissibleError(ValueError):
    """Conditioning arguments that no strategy profile can produce."""


class _OffPath:
    def __repr__(self) -> str:
        return "OFF_PATH"


OFF_PATH = _OffPath()


def private_belief(
    spec: GameSpec, team: int, t: int, y_window: Sequence[int], u_window: Sequence[tuple], s: SPI
) -> dict[tuple[int, ...], float]:
    """Pr(x_{t-d+1:t} | y_{t-d+1:t-1}, u_{t-d:t-1}, s_t) for one team.

    y_window holds the team's own observations, u_window joint actions.
    Keys are team windows (team state index per time).
    """
    d = spec.delay
    if len(y_window) != d - 1 or len(u_window) != d:
        raise ValueError(f"windows must have lengths {d - 1} and {d}")
    tau = t - d + 1
    x_lag, stack = s
    weights: dict[tuple, float] = {}
    for x, p in enumerate(spec.trans_row(team, tau - 1, x_lag, u_window[0])):
        if p > 0:
            weights[(x,)] = float(p)
    for s_new in range(tau + 1, t + 1):
        prev = s_new - 1
        lag = t - prev
        u = u_window[d - lag]
        y = y_window[d - 1 - lag]
        agent_u = spec.split_action(team, prev, u[team])
        nxt: dict[tuple, float] = {}
        for win, w in weights.items():
            if not _consistent(spec, team, tau, win, stack[lag - 1], agent_u):
                continue
            w = w * spec.obs_row(team, prev, win[-1], u)[y]
            if w <= 0:
                continue
            for x, p in enumerate(spec.trans_row(team, prev, win[-1], u)):
                if p > 0:
                    nxt[win + (x,)] = float(w * p)
        weights = nxt
    total = sum(weights.values())
    if total <= 0:
        raise InadmissibleError("no window is consistent with the conditioning arguments")
    return {k: v / total for k, v in weights.items()}


def _consistent(spec: GameSpec, team: int, tau: int, win: tuple, entry: tuple, agent_u: tuple) -> bool:
    """Whether every agent's PRP maps its part of the window to the observed action."""
    split = [spec.split_state(team, tau + m, x) for m, x in enumerate(win)]
    for j, table in enumerate(entry):
        idx = 0
        for m, comp in enumerate(split):
            idx = idx * spec.agent_state_dims(team, tau + m)[j] + comp[j]
        if table[idx] != agent_u[j]:
            return False
    return True


# ------------------------------------------------------------------- CCI


@dataclass(frozen=True)
class CCI:
    """Compressed common information at time t."""

    t: int
    pis: tuple  # per team: tuple of (spi, prob) sorted by spi
    y_window: tuple  # joint observations at t-d+1..t-1
    u_window: tuple  # joint actions at t-d..t-1

    def pi(self, k: int) -> dict:
        return dict(self.pis[k])

    def key(self) -> tuple:
        return (
            self.t,
            tuple(tuple((s, round(p, ROUND_DIGITS)) for s, p in pk if round(p, ROUND_DIGITS) != 0) for pk in self.pis),
            self.y_window,
            self.u_window,
        )

    def own_y_window(self, k: int) -> tuple:
        return tuple(y[k] for y in self.y_window)

    def successor(self, pis: Sequence[dict], y: tuple, u: tuple) -> "CCI":
        return CCI(
            self.t + 1,
            tuple(_sorted_dist(p) for p in pis),
            (self.y_window + (tuple(y),))[1:],
            (self.u_window + (tuple(u),))[1:],
        )


def _sorted_dist(p: dict) -> tuple:
    return tuple(sorted((s, float(v)) for s, v in p.items() if v > 0))


def initial_cci(spec: GameSpec) -> CCI:
    n, d = spec.n_teams, spec.delay
    pad = (0,) * n
    return CCI(
        1,
        tuple(((initial_spi(spec, k), 1.0),) for k in range(n)),
        (pad,) * (d - 1),
        (pad,) * d,
    )


def consistent_update(
    spec: GameSpec, t: int, b: CCI, team: int, policy: Callable[[SPI], Dist], y: int, u: tuple
):
    """Bayes-consistent posterior over S_{t+1} of one team, or OFF_PATH."""
    acc: dict = defaultdict(float)
    yw = b.own_y_window(team)
    space = prescription_space(spec, team, t)
    for s, ps in b.pis[team]:
        if ps <= 0:
            continue
        try:
            belief = private_belief(spec, team, t, yw, b.u_window, s)
        except InadmissibleError:
            continue
        dist = policy(s)
        for win, pw in belief.items():
            lik = spec.obs_row(team, t, win[-1], u)[y]
            if lik <= 0:
                continue
            base = ps * pw * lik
            for g, pg in dist:
                if pg > 0 and space.act(g, win) == u[team]:
                    acc[_advance(spec, team, t, s, win[0], g)] += base * pg
    total = sum(acc.values())
    if total < OFF_PATH_EPS:
        return OFF_PATH
    return {k: float(v / total) for k, v in acc.items() if v > 0}


def reachable_spis(spec: GameSpec, t: int, b: CCI, team: int) -> list:
    """SPIs at t+1 reachable from supp(pi) through some window start and prescription."""
    space = prescription_space(spec, team, t)
    out = set()
    for s, ps in b.pis[team]:
        if ps <= 0:
            continue
        try:
            firsts = {w[0] for w in private_belief(spec, team, t, b.own_y_window(team), b.u_window, s)}
        except InadmissibleError:
            firsts = set(range(spec.n_states(team, t - spec.delay + 1)))
        for x in sorted(firsts):
            for g in space.indices():
                out.add(_advance(spec, team, t, s, x, g))
    return sorted(out)


def off_path_completion(policy: str, spec: GameSpec, t: int, b: CCI, team: int, y: int, u: tuple) -> dict:
    if policy == "uniform":
        reach = reachable_spis(spec, t, b, team)
        return {s: 1.0 / len(reach) for s in reach}
    if policy == "signaling-free":
        space = prescription_space(spec, team, t)
        n = len(space)
        acc: dict = defaultdict(float)
        for s, ps in b.pis[team]:
            try:
                belief = private_belief(spec, team, t, b.own_y_window(team), b.u_window, s)
            except InadmissibleError:
                continue
            for win, pw in belief.items():
                lik = spec.obs_row(team, t, win[-1], u)[y]
                if lik <= 0:
                    continue
                for g in space.indices():
                    acc[_advance(spec, team, t, s, win[0], g)] += ps * pw * lik / n
        total = sum(acc.values())
        if total < OFF_PATH_EPS:
            return off_path_completion("uniform", spec, t, b, team, y, u)
        return {k: float(v / total) for k, v in acc.items() if v > 0}
    raise ValueError(f"unknown off-path policy {policy!r}")


def signaling_free_update(spec: GameSpec, team: int, t: int, pibar: Sequence[float], y: int) -> np.ndarray:
    """Bayes on x_t under Pr(y | x_t), then push through the uncontrolled transition."""
    if t >= spec.horizon:
        raise ValueError("no transition after the horizon")
    u0 = (0,) * spec.n_teams
    pibar = np.asarray(pibar, dtype=float)
    lik = np.array([spec.obs_row(team, t, x, u0)[y] for x in range(len(pibar))])
    post = pibar * lik
    z = post.sum()
    if z <= 0:
        raise InadmissibleError("observation has zero probability under the prior")
    post = post / z
    kernel = np.array([spec.trans_row(team, t, x, u0) for x in range(len(pibar))])
    return post @ kernel


def signaling_free_filter(spec: GameSpec, team: int, t: int, pibar: Sequence[float], y: int) -> np.ndarray:
    """Posterior of x_t given the observation (no push-forward)."""
    u0 = (0,) * spec.n_teams
    pibar = np.asarray(pibar, dtype=float)
    lik = np.array([spec.obs_row(team, t, x, u0)[y] for x in range(len(pibar))])
    post = pibar * lik
    z = post.sum()
    if z <= 0:
        raise InadmissibleError("observation has zero probability under the prior")
    return post / z


# ----------------------------------------------------------- brute force


@dataclass
class CommonBelief:
    """Exact joint of (S_t^k, X_{t-d+1:t}^k)_k given a common history."""

    t: int
    h0: tuple
    prob: float  # Pr(h0)
    joint: dict  # key: tuple over teams of (spi, window)

    def marginal(self, k: int) -> dict:
        out: dict = defaultdict(float)
        for key, p in self.joint.items():
            out[key[k]] += p
        return dict(out)

    def spi_marginal(self, k: int) -> dict:
        out: dict = defaultdict(float)
        for key, p in self.joint.items():
            out[key[k][0]] += p
        return dict(out)

    def factorization_error(self) -> float:
        margs = [self.marginal(k) for k in range(len(next(iter(self.joint))))]
        keys = set(self.joint)
        for combo in itertools.product(*[list(m) for m in margs]):
            keys.add(tuple(combo))
        err = 0.0
        for key in keys:
            prod = 1.0
            for k, part in enumerate(key):
                prod *= margs[k].get(part, 0.0)
            err = max(err, abs(self.joint.get(key, 0.0) - prod))
        return err


def common_beliefs(
    spec: GameSpec, profile: Sequence[TeamStrategy], t: int, budget: int | None = None, trace: str | None = None
) -> dict[tuple, CommonBelief]:
    """Exact conditionals for every common history h0 of length t-1 with positive probability."""
    layer = layers_upto(spec, profile, t, budget)
    by_h0: dict = defaultdict(lambda: defaultdict(float))
    for (xs, h0, mems), p in layer.items():
        key = tuple((mems[k][0], team_window(spec, xs, k, t)) for k in range(spec.n_teams))
        by_h0[h0][key] += p
    if trace:
        with open(trace, "w") as fh:
            fh.write("h0\tteam_parts\tprob\n")
            for h0 in sorted(by_h0):
                for key, p in sorted(by_h0[h0].items()):
                    fh.write(f"{h0}\t{key}\t{p!r}\n")
    out = {}
    for h0, joint in by_h0.items():
        z = sum(joint.values())
        out[h0] = CommonBelief(t, h0, z, {k: v / z for k, v in joint.items()})
    return out


def layers_upto(spec: GameSpec, profile: Sequence[TeamStrategy], t: int, budget: int | None = None) -> dict:
    return layers(spec, profile, budget, until=t)[0][t - 1]


def exact_common_belief(
    spec: GameSpec, profile: Sequence[TeamStrategy], h0: tuple, budget: int | None = None, trace: str | None = None
) -> CommonBelief:
    t = len(h0) + 1
    beliefs = common_beliefs(spec, profile, t, budget, trace)
    if h0 not in beliefs:
        raise InadmissibleError("common history has probability zero under the profile")
    return beliefs[h0]
