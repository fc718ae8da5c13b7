"""Exact forward enumeration of trajectories under coordination strategies.

A node at time t is (xs, h0, mems): xs the joint state history x_{1:t}
(tuple of per-team state indices per time), h0 the common history
((y_1, u_1), ..., (y_{t-1}, u_{t-1})) and mems one (spi, gammas) pair per
team, where gammas is None unless the team's strategy reads full histories.
"""

from __future__ import annotations

import itertools
import os
from collections import defaultdict
from functools import lru_cache
from typing import Iterable, Sequence

from .coordinator import BudgetExceeded, TeamStrategy, _advance, initial_spi, prescription_space
from .model import GameSpec

DEFAULT_CELL_BUDGET = 2_000_000


def cell_budget() -> int:
    return int(os.environ.get("TEAMGAMES_CELL_BUDGET", DEFAULT_CELL_BUDGET))


def team_window(spec: GameSpec, xs: tuple, k: int, t: int) -> tuple[int, ...]:
    return tuple(xs[s - 1][k] if s >= 1 else 0 for s in range(t - spec.delay + 1, t + 1))


def private_states(spec: GameSpec, xs: tuple, k: int, t: int) -> tuple[int, ...]:
    return tuple(xs[s - 1][k] for s in range(1, t - spec.delay + 1))


def compact(spec: GameSpec, node: tuple) -> tuple:
    """Forget states older than the hidden window; valid when nobody reads x_{1:t-d}."""
    xs, h0, mems = node
    keep = len(xs) - spec.delay
    if keep <= 0 or xs[keep - 1] is None:
        return node
    return ((None,) * keep + xs[keep:], h0, mems)


def initial_nodes(spec: GameSpec, full: Sequence[bool]) -> dict:
    """Layer t = 1 keyed by node, valued by probability."""
    mems = tuple((initial_spi(spec, k), () if full[k] else None) for k in range(spec.n_teams))
    out = {}
    for x in spec.joint_states(1):
        p = 1.0
        for k in range(spec.n_teams):
            p *= spec.init[k][x[k]]
        if p > 0:
            out[((x,), (), mems)] = p
    return out


def strategy_moves(spec: GameSpec, t: int, k: int, node: tuple, strategy: TeamStrategy):
    """(gamma, team action, new memory, probability) for team k at a node."""
    xs, h0, mems = node
    spi, gammas = mems[k]
    hist = (private_states(spec, xs, k, t), gammas) if gammas is not None else None
    win = team_window(spec, xs, k, t)
    space = prescription_space(spec, k, t)
    out = []
    for g, p in strategy.dist(t, h0, spi, hist):
        if p <= 0:
            continue
        new_spi = _advance(spec, k, t, spi, win[0], g)
        out.append((g, space.act(g, win), (new_spi, None if gammas is None else gammas + (g,)), p))
    return out


def all_moves(spec: GameSpec, t: int, k: int, node: tuple, weight: float = 1.0):
    """Every prescription of team k, each with the given weight."""
    xs, h0, mems = node
    spi, gammas = mems[k]
    win = team_window(spec, xs, k, t)
    space = prescription_space(spec, k, t)
    out = []
    for g in space.indices():
        new_spi = _advance(spec, k, t, spi, win[0], g)
        out.append((g, space.act(g, win), (new_spi, None if gammas is None else gammas + (g,)), weight))
    return out


@lru_cache(maxsize=1 << 16)
def nature(spec: GameSpec, t: int, x: tuple, u: tuple) -> tuple:
    """Joint (y_t, x_{t+1}, probability) outcomes; x_{t+1} is None at t = T."""
    n = spec.n_teams
    ys = [[(y, q) for y, q in enumerate(spec.obs_row(k, t, x[k], u)) if q > 0] for k in range(n)]
    if t < spec.horizon:
        xn = [[(z, q) for z, q in enumerate(spec.trans_row(k, t, x[k], u)) if q > 0] for k in range(n)]
    else:
        xn = [[(None, 1.0)] for _ in range(n)]
    out = []
    for yc in itertools.product(*ys):
        py = 1.0
        for _, q in yc:
            py *= q
        y = tuple(v for v, _ in yc)
        for xc in itertools.product(*xn):
            p = py
            for _, q in xc:
                p *= q
            out.append((y, None if t == spec.horizon else tuple(v for v, _ in xc), p))
    return tuple(out)


def expand(spec: GameSpec, t: int, node: tuple, prob: float, moves: Sequence[Sequence[tuple]], rewards=None):
    """Children of a node given per-team move lists; accumulates expected rewards."""
    xs, h0, mems = node
    x = xs[-1]
    children = []
    for combo in itertools.product(*moves):
        p = prob
        for m in combo:
            p *= m[3]
        if p <= 0:
            continue
        u = tuple(m[1] for m in combo)
        if rewards is not None:
            for i in range(spec.n_teams):
                rewards[i] += p * spec.reward_at(i, t, x, u)
        new_mems = tuple(m[2] for m in combo)
        for y, xn, q in nature(spec, t, x, u):
            pq = p * q
            if pq <= 0:
                continue
            nxs = xs + (xn,) if xn is not None else xs
            children.append(((nxs, h0 + ((y, u),), new_mems), pq, combo))
    return children


def layers(spec: GameSpec, profile: Sequence[TeamStrategy], budget: int | None = None, until: int | None = None):
    """Exact node distributions for t = 1..until (default T+1) and expected rewards so far."""
    budget = cell_budget() if budget is None else budget
    full = [s.full_history for s in profile]
    cur = initial_nodes(spec, full)
    shrink = not any(full)
    out = [cur]
    rewards = [0.0] * spec.n_teams
    last = spec.horizon + 1 if until is None else until
    for t in range(1, last):
        nxt: dict = defaultdict(float)
        for node, p in cur.items():
            moves = [strategy_moves(spec, t, k, node, profile[k]) for k in range(spec.n_teams)]
            for child, q, _ in expand(spec, t, node, p, moves, rewards):
                nxt[compact(spec, child) if shrink else child] += q
        if len(nxt) > budget:
            raise BudgetExceeded(f"{len(nxt)} trajectory cells at t={t + 1} exceed the budget {budget}")
        cur = dict(nxt)
        out.append(cur)
    return out, rewards


def expected_rewards(spec: GameSpec, profile: Sequence[TeamStrategy], budget: int | None = None) -> list[float]:
    return layers(spec, profile, budget)[1]


def conditional_probability(layer: dict, event, given) -> float:
    num = den = 0.0
    for node, p in layer.items():
        if given(node):
            den += p
            if event(node):
                num += p
    if den <= 0:
        raise ZeroDivisionError("conditioning event has probability zero")
    return num / den


def merge(items: Iterable[tuple]) -> dict:
    out: dict = defaultdict(float)
    for k, p in items:
        out[k] += p
    return dict(out)
