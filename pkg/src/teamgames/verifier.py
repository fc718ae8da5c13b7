"""Exact payoff evaluation, best responses by dynamic programming, Nash gaps,
Monte Carlo cross-checks and brute-force equilibrium enumeration for tiny games."""

from __future__ import annotations

import itertools
import os
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .coordinator import (
    BudgetExceeded,
    HistoryStrategy,
    SPIBStrategy,
    TeamStrategy,
    initial_spi,
    point,
    prescription_space,
)
from .model import GameSpec
from .normal_form import all_equilibria
from .rollout import (
    all_moves,
    cell_budget,
    compact,
    expected_rewards,
    initial_nodes,
    layers,
    nature,
    private_states,
    strategy_moves,
    team_window,
)

DEFAULT_NF_BUDGET = 64
HISTORY_BUDGET_FACTOR = 4  # the full-history oracle gets a quarter of the cell budget


def nf_budget() -> int:
    return int(os.environ.get("TEAMGAMES_NF_BUDGET", DEFAULT_NF_BUDGET))


def total_payoff(spec: GameSpec, profile: Sequence[TeamStrategy], budget: int | None = None) -> list[float]:
    return [float(v) for v in expected_rewards(spec, profile, budget)]


# ------------------------------------------------------------ best response


@dataclass
class BestResponse:
    team: int
    value: float
    strategy: TeamStrategy
    trail: list = field(default_factory=list)  # per time: {cell: (value, argmax)}
    cells: int = 0
    q: dict = field(default_factory=dict)  # (t,) + cell -> Q over prescriptions


def _cell_key(spec: GameSpec, node: tuple, team: int, t: int, full: bool) -> tuple:
    xs, h0, mems = node
    spi, gammas = mems[team]
    if full:
        return (h0, private_states(spec, xs, team, t), gammas)
    return (h0, spi)


def _responder_moves(spec, t, node, team, profile):
    return [
        all_moves(spec, t, k, node) if k == team else strategy_moves(spec, t, k, node, profile[k])
        for k in range(spec.n_teams)
    ]


def _children(spec: GameSpec, t: int, node: tuple, moves_by_team: list, team: int):
    """For each prescription of the responding team: [(prob, reward, child)]."""
    xs, h0, mems = node
    x = xs[-1]
    others = [m if k != team else [None] for k, m in enumerate(moves_by_team)]
    out = {}
    for own in moves_by_team[team]:
        g = own[0]
        rows = []
        for combo in itertools.product(*others):
            combo = tuple(own if k == team else m for k, m in enumerate(combo))
            p = 1.0
            for k, m in enumerate(combo):
                if k != team:
                    p *= m[3]
            if p <= 0:
                continue
            u = tuple(m[1] for m in combo)
            r = spec.reward_at(team, t, x, u)
            new_mems = tuple(m[2] for m in combo)
            for y, xn, q in nature(spec, t, x, u):
                nxs = xs + (xn,) if xn is not None else xs
                rows.append((p * q, r, (nxs, h0 + ((y, u),), new_mems)))
        out[g] = rows
    return out


def best_response(
    spec: GameSpec,
    profile: Sequence[TeamStrategy],
    team: int,
    full_history: bool = False,
    budget: int | None = None,
) -> BestResponse:
    """Exact best response of one team against the others' strategies.

    With ``full_history`` the responder conditions on its entire information
    (common history, x_{1:t-d}, own past prescriptions) instead of (h0, SPI).
    """
    budget = cell_budget() // (HISTORY_BUDGET_FACTOR if full_history else 1) if budget is None else budget
    full = [p.full_history for p in profile]
    full[team] = full_history
    shrink = not any(full)
    T = spec.horizon

    # forward: every own prescription with unit weight
    cur = initial_nodes(spec, full)
    fwd = [cur]
    for t in range(1, T):
        nxt: dict = defaultdict(float)
        for node, w in cur.items():
            for rows in _children(spec, t, node, _responder_moves(spec, t, node, team, profile), team).values():
                for p, _, child in rows:
                    if p > 0:
                        child = compact(spec, child) if shrink else child
                        nxt[child] += w * p
        if len(nxt) > budget:
            raise BudgetExceeded(f"{len(nxt)} best-response nodes at t={t + 1} exceed the budget {budget}")
        cur = dict(nxt)
        fwd.append(cur)

    # backward: normalized cell values
    v_next: dict = {}
    table: dict = {}
    trail: list = [None] * T
    qs: dict = {}
    n_cells = 0
    for t in range(T, 0, -1):
        cells: dict = defaultdict(list)
        for node, w in fwd[t - 1].items():
            cells[_cell_key(spec, node, team, t, full_history)].append((node, w))
        n_cells += len(cells)
        n_g = len(prescription_space(spec, team, t))
        v_here: dict = {}
        step: dict = {}
        for key, members in cells.items():
            z = sum(w for _, w in members)
            q = np.zeros(n_g)
            for node, w in members:
                kids = _children(spec, t, node, _responder_moves(spec, t, node, team, profile), team)
                for g, rows in kids.items():
                    acc = 0.0
                    for p, r, child in rows:
                        cont = 0.0
                        if t < T:
                            child = compact(spec, child) if shrink else child
                            cont = v_next[_cell_key(spec, child, team, t + 1, full_history)]
                        acc += p * (r + cont)
                    q[g] += (w / z) * acc
            best = int(np.argmax(q >= q.max() - 1e-12))
            v_here[key] = float(q[best])
            step[key] = (float(q[best]), best)
            qs[(t,) + key] = q
            table[(t,) + key] = point(best)
        trail[t - 1] = step
        v_next = v_here
    root = _cell_key(spec, next(iter(fwd[0])), team, 1, full_history)
    value = v_next[root]
    if full_history:
        strat: TeamStrategy = HistoryStrategy(table, default=lambda *a: point(0))
    else:
        strat = SPIBStrategy(table, default=lambda *a: point(0))
    return BestResponse(team, value, strat, trail, n_cells, qs)


# ---------------------------------------------------------------- certificate


@dataclass
class NashCertificate:
    spec_hash: str
    payoff: list
    br_value: list
    gap: list
    epsilon: float
    method: str = "exact"
    trail: list | None = None
    dp_trace: str | None = None

    def as_dict(self) -> dict:
        out = {
            "spec_hash": self.spec_hash,
            "payoff": self.payoff,
            "br_value": self.br_value,
            "gap": self.gap,
            "epsilon": self.epsilon,
            "method": self.method,
        }
        if self.dp_trace:
            out["dp_trace"] = self.dp_trace
        return out


def nash_gap(
    spec: GameSpec, profile: Sequence[TeamStrategy], workers: int = 1, budget: int | None = None,
    full_history: bool = False, dp_trace: str | None = None,
) -> NashCertificate:
    payoff = total_payoff(spec, profile, budget)

    def br(i):
        return best_response(spec, profile, i, full_history=full_history, budget=budget)

    if workers > 1 and spec.n_teams > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            brs = list(pool.map(br, range(spec.n_teams)))
    else:
        brs = [br(i) for i in range(spec.n_teams)]
    values = [b.value for b in brs]
    gaps = [v - j for v, j in zip(values, payoff)]
    cert = NashCertificate(spec.hash, payoff, values, gaps, max(gaps), "exact", [b.trail for b in brs], dp_trace)
    if dp_trace:
        _write_trace(dp_trace, brs)
    return cert


def _write_trace(path: str, brs: list[BestResponse]) -> None:
    with open(path, "w") as fh:
        fh.write("team\tt\tcell\tvalue\targmax\n")
        for b in brs:
            for t, step in enumerate(b.trail, start=1):
                for key in sorted(step, key=repr):
                    v, g = step[key]
                    fh.write(f"{b.team}\t{t}\t{key!r}\t{v!r}\t{g}\n")


# ----------------------------------------------------------------- sampling


def simulate(spec: GameSpec, profile: Sequence[TeamStrategy], n: int, seed: int = 0):
    """Monte Carlo total rewards: (means, standard errors) per team."""
    if n <= 0:
        raise ValueError("empty sample: n must be positive")
    rng = np.random.default_rng(seed)
    full = [p.full_history for p in profile]
    totals = np.zeros((n, spec.n_teams))
    cdfs: dict = {}
    move_cache: dict = {}

    def draw(key, row) -> int:
        cdf = cdfs.get(key)
        if cdf is None:
            cdf = cdfs[key] = np.cumsum(row)
        return min(int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right")), len(cdf) - 1)

    start = tuple((initial_spi(spec, k), () if full[k] else None) for k in range(spec.n_teams))
    for r in range(n):
        x = tuple(draw(("init", k), spec.init[k]) for k in range(spec.n_teams))
        node = ((x,), (), start)
        for t in range(1, spec.horizon + 1):
            picks = []
            xs, h0, mems = node
            for k in range(spec.n_teams):
                key = (t, k, h0, mems[k], team_window(spec, xs, k, t),
                       private_states(spec, xs, k, t) if full[k] else None)
                moves = move_cache.get(key)
                if moves is None:
                    moves = move_cache[key] = strategy_moves(spec, t, k, node, profile[k])
                if len(moves) == 1:
                    picks.append(moves[0])
                    continue
                cdf = np.cumsum([m[3] for m in moves])
                j = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
                picks.append(moves[min(j, len(moves) - 1)])
            u = tuple(m[1] for m in picks)
            x = xs[-1]
            for k in range(spec.n_teams):
                totals[r, k] += spec.reward_at(k, t, x, u)
            y = tuple(draw(("y", k, t, x[k], u), spec.obs_row(k, t, x[k], u)) for k in range(spec.n_teams))
            if t < spec.horizon:
                xn = tuple(draw(("x", k, t, x[k], u), spec.trans_row(k, t, x[k], u)) for k in range(spec.n_teams))
                xs = xs + (xn,)
            node = (xs, h0 + ((y, u),), tuple(m[2] for m in picks))
    means = totals.mean(axis=0)
    se = totals.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros(spec.n_teams)
    return means.tolist(), se.tolist()


# ------------------------------------------------- tiny normal-form analysis


def pure_strategies(spec: GameSpec, team: int, budget: int | None = None) -> list[dict]:
    """Reduced pure coordination strategies of one team.

    Each is a dict {(t, h0, x_{1:t-d}, gamma_{1:t-1}): gamma_t} defined exactly
    on the information cells its own earlier choices leave reachable, with the
    other teams free to take any action.
    """
    budget = nf_budget() if budget is None else budget
    T = spec.horizon
    out: list[dict] = []

    def cells_of(nodes):
        groups: dict = defaultdict(set)
        for xs, h0, gammas in nodes:
            t = len(xs)
            groups[(t, h0, private_states(spec, xs, team, t), gammas)].add((xs, h0, gammas))
        return groups

    def step(t, nodes, chosen):
        if t > T:
            out.append(dict(chosen))
            if len(out) > budget:
                raise BudgetExceeded(f"team {spec.team_names[team]} has more than {budget} pure strategies")
            return
        groups = cells_of(nodes)
        keys = sorted(groups, key=repr)
        space = prescription_space(spec, team, t)
        for assignment in itertools.product(space.indices(), repeat=len(keys)):
            picked = dict(chosen)
            nxt = set()
            for key, g in zip(keys, assignment):
                picked[key] = g
                for xs, h0, gammas in groups[key]:
                    nxt |= _successors(spec, team, t, xs, h0, gammas, g)
            step(t + 1, nxt, picked)

    starts = {((x,), (), ()) for x in spec.joint_states(1) if all(spec.init[k][x[k]] > 0 for k in range(spec.n_teams))}
    step(1, starts, {})
    return out


def _successors(spec, team, t, xs, h0, gammas, g):
    x = xs[-1]
    own = prescription_space(spec, team, t).act(g, team_window(spec, xs, team, t))
    acts = [range(spec.n_actions(k, t)) if k != team else [own] for k in range(spec.n_teams)]
    out = set()
    for u in itertools.product(*acts):
        for y, xn, _ in nature(spec, t, x, u):
            nxs = xs + (xn,) if xn is not None else xs
            out.add((nxs, h0 + ((y, u),), gammas + (g,)))
    return out


def pure_strategy(table: dict) -> HistoryStrategy:
    return HistoryStrategy({k: point(g) for k, g in table.items()}, default=lambda *a: point(0))


def mixed_to_behavioral(tables: Sequence[dict], weights: Sequence[float]) -> dict:
    """Conditional prescription play at every cell some supported strategy reaches."""
    mass: dict = defaultdict(float)
    play: dict = defaultdict(lambda: defaultdict(float))
    for tab, w in zip(tables, weights):
        if w <= 0:
            continue
        for cell, g in tab.items():
            mass[cell] += w
            play[cell][g] += w
    return {cell: tuple(sorted((g, float(p / mass[cell])) for g, p in play[cell].items() if p > 0)) for cell in mass}


def action_map(spec: GameSpec, team: int, table: dict) -> dict:
    """{(t, h0, x_{1:t} of the team): team action} over everything the pure strategy reaches."""
    out: dict = {}
    nodes = {((x,), (), ()) for x in spec.joint_states(1) if all(spec.init[k][x[k]] > 0 for k in range(spec.n_teams))}
    for t in range(1, spec.horizon + 1):
        nxt = set()
        space = prescription_space(spec, team, t)
        for xs, h0, gammas in nodes:
            g = table[(t, h0, private_states(spec, xs, team, t), gammas)]
            out[(t, h0, tuple(x[team] for x in xs))] = space.act(g, team_window(spec, xs, team, t))
            nxt |= _successors(spec, team, t, xs, h0, gammas, g)
        nodes = nxt
    return out


class ActionIndicators:
    """Linear pieces of team-action behavior: Pr(u | key) = a_u . x / b . x."""

    def __init__(self, spec: GameSpec, team: int, tables: Sequence[dict]):
        maps = [action_map(spec, team, tab) for tab in tables]
        keys = sorted(set().union(*maps), key=repr)
        self.keys = keys
        self.n_actions = {k: spec.n_actions(team, k[0]) for k in keys}
        self.reach = {k: np.array([1.0 if k in m else 0.0 for m in maps]) for k in keys}
        self.acts = {
            k: np.array([[1.0 if m.get(k) == u else 0.0 for m in maps] for u in range(self.n_actions[k])])
            for k in keys
        }

    def behavior(self, x: np.ndarray, tol: float = 1e-12) -> dict:
        out = {}
        for k in self.keys:
            z = float(self.reach[k] @ x)
            if z > tol:
                out[k] = tuple(float(a @ x / z) for a in self.acts[k])
        return out


@dataclass
class TinyEquilibrium:
    behavior: list  # per team {(t, h0, x_{1:t}): action probabilities}
    coordination: list  # per team {cell: ((gamma, prob), ...)}
    mixed: list  # per team probabilities over reduced pure strategies
    payoffs: list
    supports: list  # support pairs merged into this equilibrium
    isolated: bool  # behavior proven constant on every merged component

    def profile(self) -> list[HistoryStrategy]:
        return [HistoryStrategy(dict(b), default=lambda *a: point(0)) for b in self.coordination]

    def behavior_key(self, digits: int = 7) -> tuple:
        return tuple(
            tuple(sorted((k, tuple(round(p, digits) + 0.0 for p in v)) for k, v in b.items())) for b in self.behavior
        )


def payoff_matrices(spec: GameSpec, pures: Sequence[Sequence[dict]]) -> tuple[np.ndarray, np.ndarray]:
    m, n = len(pures[0]), len(pures[1])
    A, B = np.zeros((m, n)), np.zeros((m, n))
    strat = [[pure_strategy(t) for t in side] for side in pures]
    for i in range(m):
        for j in range(n):
            A[i, j], B[i, j] = total_payoff(spec, [strat[0][i], strat[1][j]])
    return A, B


def bne_enumerate_tiny(spec: GameSpec, budget: int | None = None) -> list[TinyEquilibrium]:
    """All equilibria of the induced normal form, merged by realization-equivalent behavior."""
    if spec.n_teams != 2:
        raise ValueError("tiny enumeration needs exactly two teams")
    pures = [pure_strategies(spec, k, budget) for k in range(2)]
    A, B = payoff_matrices(spec, pures)
    ind = [ActionIndicators(spec, k, pures[k]) for k in range(2)]
    merged: dict = {}
    for e in all_equilibria(A, B):
        mixes = (e.x, e.y)
        beh = [ind[k].behavior(mixes[k]) for k in range(2)]
        const = e.isolated or all(
            _behavior_constant(ind[k], beh[k], _polytope(A, B, e.support, k)) for k in range(2)
        )
        eq = TinyEquilibrium(
            beh,
            [mixed_to_behavioral(pures[k], mixes[k]) for k in range(2)],
            [mixes[0].tolist(), mixes[1].tolist()],
            list(e.payoffs),
            [e.support],
            const,
        )
        key = eq.behavior_key()
        if key in merged:
            merged[key].supports.append(e.support)
            merged[key].isolated = merged[key].isolated and const
        else:
            merged[key] = eq
    return list(merged.values())


def _polytope(A, B, support, side):
    """(A_eq, b_eq, A_ub, b_ub) over (mix, v) for one side of a support pair."""
    I, J = support if side == 0 else (support[1], support[0])
    P = B if side == 0 else A.T
    n_rows, n_cols = P.shape
    nv = n_rows + 1
    eq, rhs = [np.r_[np.ones(n_rows), 0.0]], [1.0]
    for j in J:
        eq.append(np.r_[P[:, j], -1.0])
        rhs.append(0.0)
    for i in range(n_rows):
        if i not in I:
            row = np.zeros(nv)
            row[i] = 1.0
            eq.append(row)
            rhs.append(0.0)
    ub = [np.r_[P[:, c], -1.0] for c in range(n_cols) if c not in J]
    return np.array(eq), np.array(rhs), (np.array(ub) if ub else None), (np.zeros(len(ub)) if ub else None)


def _behavior_constant(ind: ActionIndicators, beh: dict, poly, tol: float = 1e-9) -> bool:
    """Whether every conditional action probability is constant over the support-pair polytope."""
    from scipy.optimize import linprog

    a_eq, b_eq, a_ub, b_ub = poly
    n = a_eq.shape[1] - 1
    bounds = [(0, 1)] * n + [(None, None)]
    for k, probs in beh.items():
        if ind.n_actions[k] <= 1:
            continue
        for u, c in enumerate(probs):
            lin = np.r_[ind.acts[k][u] - c * ind.reach[k], 0.0]
            for sign in (1.0, -1.0):
                res = linprog(sign * lin, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq, bounds=bounds, method="highs")
                if res.status != 0 or abs(res.fun) > tol:
                    return False
    return True


def continuation_values(spec: GameSpec, profile: Sequence[TeamStrategy], budget: int | None = None) -> list[dict]:
    """Per time t, {(team, h0, spi): E[sum_{tau >= t} r | h0, spi]} on the reachable set."""
    lay, _ = layers(spec, profile, budget)
    T = spec.horizon
    full = [p.full_history for p in profile]
    shrink = not any(full)
    node_val: dict = {}
    out: list = [None] * T
    for t in range(T, 0, -1):
        vals: dict = {}
        agg: dict = defaultdict(lambda: [0.0, 0.0])
        for node, w in lay[t - 1].items():
            moves = [strategy_moves(spec, t, k, node, profile[k]) for k in range(spec.n_teams)]
            v = np.zeros(spec.n_teams)
            for combo in itertools.product(*moves):
                p = 1.0
                for m in combo:
                    p *= m[3]
                u = tuple(m[1] for m in combo)
                x = node[0][-1]
                r = np.array([spec.reward_at(k, t, x, u) for k in range(spec.n_teams)])
                mems = tuple(m[2] for m in combo)
                for y, xn, q in nature(spec, t, x, u):
                    cont = 0.0
                    if t < T:
                        child = (node[0] + (xn,), node[1] + ((y, u),), mems)
                        child = compact(spec, child) if shrink else child
                        cont = node_val[child]
                    v += p * q * (r + cont)
            vals[node] = v
            for k in range(spec.n_teams):
                cell = (k, node[1], node[2][k][0])
                agg[cell][0] += w * v[k]
                agg[cell][1] += w
        node_val = vals
        out[t - 1] = {cell: a / z for cell, (a, z) in agg.items()}
    return out

