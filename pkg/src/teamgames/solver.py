"""Equilibrium construction over compressed common information.

``solve_cib`` runs the sequential decomposition with an inner damped
fixed point between stage policies and belief updates; ``solve_layered`` and
``solve_signaling_free`` handle the two classes where no such fixed point is
needed; ``certify_nonexistence_tiny`` decides tiny two-team games exactly.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .analysis import info_dependency_graph, is_public_team, is_separable, is_signaling_free
from .beliefs import (
    CCI,
    OFF_PATH,
    ROUND_DIGITS,
    common_beliefs,
    consistent_update,
    initial_cci,
    off_path_completion,
    signaling_free_update,
)
from .coordinator import BudgetExceeded, FunctionStrategy, TeamStrategy, prescription_space
from .model import GameSpec, SpecError
from .normal_form import solve_normal_form
from .rollout import layers, strategy_moves, team_window
from .stage import GAP_TOL, StageGame, _argmax
from .verifier import TinyEquilibrium, bne_enumerate_tiny, nash_gap

OFFPATH_POLICIES = ("signaling-free", "uniform")


class SolverError(RuntimeError):
    """Precondition violations of a solver."""


@dataclass
class SolverConfig:
    max_outer_iters: int = 60
    damping: float = 0.5
    restarts: int = 20
    seed: int = 0
    offpath_policy: str = "signaling-free"
    simple_mode: bool = False
    workers: int = 1
    tol: float = 1e-9

    def __post_init__(self):
        if self.offpath_policy not in OFFPATH_POLICIES:
            raise ValueError(f"offpath_policy must be one of {OFFPATH_POLICIES}")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")


# ------------------------------------------------------------------- records


class CellRecord:
    """Solved stage at one cell: stage policies, values and successor table."""

    def __init__(self, t, key, cci, stage: StageGame | None, lam, successors, offpath=None, residual=0.0,
                 iterations=0, values=None, default=None):
        self.t = t
        self.key = key
        self.cci = cci
        self.stage = stage
        self.lam = lam  # per team {spi: np.ndarray over stage.spaces[k]} or {spi: Dist}
        self.successors = successors  # {(y, u): key}
        self.offpath = offpath or {}
        self.residual = residual
        self.iterations = iterations
        self._values = values if values is not None else [dict() for _ in lam]
        self.default = default  # per team Dist used for every SPI (open-loop cells)
        if stage is not None and values is None:
            for k in range(len(lam)):
                self._values[k].update(stage.dp_backup(self._array_lam(), k))

    def _array_lam(self):
        return self.lam

    def policy(self, k: int, s) -> tuple:
        if self.default is not None and self.default[k] is not None:
            return self.default[k]
        st = self.stage
        if st is None:
            got = self.lam[k].get(s)
            return tuple(got) if got is not None else ((0, 1.0),)
        got = self.lam[k].get(s)
        if got is None:
            if not st.admissible(k, s):
                return ((st.spaces[k][0], 1.0),)
            v = st.interim_values(k, s, self.lam)
            got = np.zeros(len(v))
            got[_argmax(v)] = 1.0
            self.lam[k][s] = got
        return tuple((st.spaces[k][pos], float(p)) for pos, p in enumerate(got) if p > 0)

    def value(self, k: int, s) -> float:
        got = self._values[k].get(s)
        if got is None:
            st = self.stage
            if st is None or not st.admissible(k, s):
                got = 0.0
            else:
                v = st.interim_values(k, s, self.lam)
                pol = self.lam[k].get(s)
                got = float(v.max() if pol is None else np.asarray(pol) @ v)
            self._values[k][s] = got
        return got

    def positive_types(self, k: int) -> list:
        if self.stage is not None:
            return list(self.stage.types[k])
        return sorted(self.lam[k]) if self.lam[k] else []

    def known_types(self, k: int) -> list:
        return sorted(set(self.lam[k]) | set(self._values[k]))


@dataclass
class CIBSolution:
    spec: GameSpec
    mode: str
    root: object
    cells: dict
    offpath_policy: str | None = None
    residuals: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)
    verifier_report: dict | None = None

    def cell_of(self, h0: tuple):
        key = self.root
        for step in h0:
            key = self.cells[key].successors[step]
        return self.cells[key]

    def strategies(self) -> list[TeamStrategy]:
        memo: dict = {}

        def lookup(h0):
            got = memo.get(h0)
            if got is None:
                got = memo[h0] = self.cell_of(h0)
            return got

        def make(k):
            return FunctionStrategy(lambda t, h0, s, hist: lookup(h0).policy(k, s))

        return [make(k) for k in range(self.spec.n_teams)]

    def reachable(self) -> list:
        """Cells reachable from the root through the successor tables, in BFS order."""
        seen = {self.root}
        order = [self.root]
        for key in order:
            for nxt in self.cells[key].successors.values():
                if nxt not in seen:
                    seen.add(nxt)
                    order.append(nxt)
        return order

    def prune(self) -> None:
        keep = set(self.reachable())
        self.cells = {k: v for k, v in self.cells.items() if k in keep}

    def audit(self) -> dict:
        """Interim gaps and belief-consistency deviations over all cells."""
        gap = dev = 0.0
        for key in self.reachable():
            rec = self.cells[key]
            if rec.stage is not None:
                gap = max(gap, rec.stage.interim_gap(rec.lam))
            if rec.cci is not None and rec.stage is not None and rec.t < self.spec.horizon:
                dev = max(dev, _consistency_deviation(self.spec, rec, self.cells))
        return {"interim_gap": gap, "consistency_deviation": dev}


@dataclass
class NoFixedPointReport:
    """The search failed; this is not a proof that no equilibrium exists."""

    spec_hash: str
    failed_stage: int
    residuals: dict
    offending_cells: list
    obstruction: dict | None = None
    attempts: int = 0

    @property
    def stage(self) -> int:
        if self.obstruction and self.obstruction.get("stage") is not None:
            return self.obstruction["stage"]
        return self.failed_stage

    def as_dict(self) -> dict:
        return {
            "spec_hash": self.spec_hash,
            "status": "no-fixed-point",
            "stage": self.stage,
            "failed_stage": self.failed_stage,
            "residuals": {str(t): r for t, r in sorted(self.residuals.items())},
            "offending_cells": self.offending_cells,
            "obstruction": self.obstruction,
            "attempts": self.attempts,
            "proof_of_nonexistence": False,
        }


class _CellFailure(Exception):
    def __init__(self, t, key, residual):
        super().__init__(f"no fixed point at t={t}")
        self.t, self.key, self.residual = t, key, residual


# ------------------------------------------------------------- cell solving


def constant_prescription(spec: GameSpec, k: int, t: int, action: int) -> int:
    space = prescription_space(spec, k, t)
    agent_actions = spec.split_action(k, t, action)
    tables = []
    for j, a in enumerate(agent_actions):
        n = 1
        for d in space.window_dims[j]:
            n *= d
        tables.append((a,) * n)
    return space.index(tables)


class _CellSolver:
    def __init__(self, spec: GameSpec, config: SolverConfig, mode: str):
        self.spec = spec
        self.cfg = config
        self.mode = mode
        self.memo: dict = {}
        self.failed: dict = {}
        self.residuals: dict = {}
        self.offending: list = []
        self.attempts = 0
        self.open_loop = mode == "cib" and is_signaling_free(spec)
        self.components = info_dependency_graph(spec).components if mode == "layered" else None

    def spaces(self, t: int) -> list[list[int]]:
        spec = self.spec
        if self.open_loop:
            return [
                sorted({constant_prescription(spec, k, t, a) for a in range(spec.n_actions(k, t))})
                for k in range(spec.n_teams)
            ]
        return [list(prescription_space(spec, k, t, self.cfg.simple_mode).indices()) for k in range(spec.n_teams)]

    # successors ----------------------------------------------------------

    def expand(self, b: CCI, stage: StageGame, lam) -> tuple[dict, dict, dict]:
        spec, t = self.spec, b.t
        n = spec.n_teams
        xsupp = []
        for k in range(n):
            xs = set()
            for s in stage.types[k]:
                for rows in stage.outcomes(k, s):
                    xs.update(x for x, _, _, _ in rows)
            xsupp.append(sorted(xs))

        def policy_fn(k):
            def f(s):
                arr = lam[k].get(s)
                if arr is None:
                    return ()
                return tuple((stage.spaces[k][pos], float(p)) for pos, p in enumerate(arr) if p > 0)
            return f

        pols = [policy_fn(k) for k in range(n)]
        succ, recs, flags = {}, {}, {}
        for u in spec.joint_actions(t):
            per_team = []
            for k in range(n):
                opts = []
                for y in range(spec.n_obs(k, t)):
                    if not any(spec.obs_row(k, t, x, u)[y] > 0 for x in xsupp[k]):
                        continue
                    post = consistent_update(spec, t, b, k, pols[k], y, u)
                    off = post is OFF_PATH
                    if off:
                        post = off_path_completion(self.cfg.offpath_policy, spec, t, b, k, y, u)
                    opts.append((y, post, off))
                per_team.append(opts)
            for combo in itertools.product(*per_team):
                y = tuple(c[0] for c in combo)
                nb = b.successor([c[1] for c in combo], y, u)
                rec = self.solve(nb)
                succ[(y, u)] = rec.key
                recs[(y, u)] = rec
                flags[(y, u)] = [bool(c[2]) for c in combo]
        return succ, recs, flags

    @staticmethod
    def continuation(recs):
        def cont(i, y, u, s_next):
            return recs[(y, u)].value(i, s_next)
        return cont

    # main ----------------------------------------------------------------

    def solve(self, b: CCI) -> CellRecord:
        key = b.key()
        if key in self.memo:
            return self.memo[key]
        if key in self.failed:
            raise self.failed[key]
        try:
            rec = self._solve_layered(b, key) if self.mode == "layered" else self._solve_fixed_point(b, key)
        except _CellFailure as f:
            if f.t == b.t:
                self.failed[key] = f
            raise
        self.memo[key] = rec
        return rec

    def _rng(self, t: int, restart: int) -> np.random.Generator:
        return np.random.default_rng((self.cfg.seed, t, restart))

    def _initial(self, stage: StageGame, restart: int, rng) -> list[dict]:
        lam = []
        for k in range(self.spec.n_teams):
            m = len(stage.spaces[k])
            if restart == 0 or m == 1:
                lam.append({s: np.full(m, 1.0 / m) for s in stage.types[k]})
            else:
                lam.append({s: rng.dirichlet(np.ones(m)) for s in stage.types[k]})
        return lam

    def _solve_fixed_point(self, b: CCI, key) -> CellRecord:
        spec, cfg, t = self.spec, self.cfg, b.t
        base = StageGame(spec, b, self.spaces(t))
        if t == spec.horizon:
            lam = base.solve_ibne(self._rng(t, 0))
            if lam is None:
                self._note_failure(t, key, float("inf"))
                raise _CellFailure(t, key, float("inf"))
            return CellRecord(t, key, b, base, lam, {})
        best = float("inf")
        for restart in range(cfg.restarts):
            self.attempts += 1
            rng = self._rng(t, restart)
            lam = self._initial(base, restart, rng)
            history: list = []
            for it in range(cfg.max_outer_iters):
                try:
                    succ, recs, flags = self.expand(b, base, lam)
                except _CellFailure:
                    break
                stage = base.with_continuation(self.continuation(recs))
                if it and stage.interim_gap(lam) <= cfg.tol:
                    # lam is already an equilibrium of the stage its own updates induce
                    return CellRecord(t, key, b, stage, lam, succ, flags, 0.0, it + 1)
                new = stage.solve_ibne(rng)
                if new is None:
                    break
                res = _policy_distance(new, lam)
                best = min(best, res)
                if res <= cfg.tol:
                    return CellRecord(t, key, b, stage, lam, succ, flags, res, it + 1)
                if any(_policy_distance(new, old) <= cfg.tol for old in history):
                    # best replies cycle: fall back to damped averaging
                    history.clear()
                    lam = _mix(lam, new, cfg.damping)
                    continue
                history.append(new)
                if restart % 2:
                    alpha = 1.0 / (it + 2)  # fictitious-play averaging
                else:
                    alpha = 1.0 if it < 2 else cfg.damping
                lam = _mix(lam, new, alpha)
        self._note_failure(t, key, best)
        raise _CellFailure(t, key, best)

    def _solve_layered(self, b: CCI, key) -> CellRecord:
        spec, t = self.spec, b.t
        base = StageGame(spec, b, self.spaces(t))
        lam = [{s: _unit_array(len(base.spaces[k]), 0) for s in base.types[k]} for k in range(spec.n_teams)]
        rng = self._rng(t, 0)
        for comp in self.components:
            if t < spec.horizon:
                _, recs, _ = self.expand(b, base, lam)
                stage = base.with_continuation(self.continuation(recs))
            else:
                stage = base
            got = stage.solve_ibne(rng, fixed=lam, teams=list(comp))
            if got is None:
                self._note_failure(t, key, float("inf"))
                raise _CellFailure(t, key, float("inf"))
            lam = got
        succ, flags = {}, {}
        stage = base
        if t < spec.horizon:
            succ, recs, flags = self.expand(b, base, lam)
            stage = base.with_continuation(self.continuation(recs))
        return CellRecord(t, key, b, stage, lam, succ, flags, 0.0, 1)

    def _note_failure(self, t, key, residual):
        self.residuals[t] = min(self.residuals.get(t, float("inf")), residual)
        if len(self.offending) < 50:
            self.offending.append({"t": t, "cell": repr(key), "residual": residual})


def _unit_array(n: int, k: int) -> np.ndarray:
    a = np.zeros(n)
    a[k] = 1.0
    return a


def _policy_distance(a, b) -> float:
    d = 0.0
    for pa, pb in zip(a, b):
        for s, v in pa.items():
            d = max(d, float(np.max(np.abs(np.asarray(v) - np.asarray(pb[s])))))
    return d


def _mix(old, new, alpha):
    return [{s: (1 - alpha) * np.asarray(po[s]) + alpha * np.asarray(pn[s]) for s in po} for po, pn in zip(old, new)]


def _consistency_deviation(spec: GameSpec, rec: CellRecord, cells: dict) -> float:
    """Max gap between stored successor beliefs and a fresh on-path update."""
    b, st = rec.cci, rec.stage
    dev = 0.0
    for (y, u), nkey in rec.successors.items():
        nxt = cells.get(nkey)
        if nxt is None or nxt.cci is None:
            continue
        for k in range(spec.n_teams):
            if rec.offpath.get((y, u), [False] * spec.n_teams)[k]:
                continue

            def pol(s, k=k):
                arr = rec.lam[k].get(s)
                if arr is None:
                    return ()
                return tuple((st.spaces[k][pos], float(p)) for pos, p in enumerate(arr) if p > 0)

            post = consistent_update(spec, b.t, b, k, pol, y[k], u)
            if post is OFF_PATH:
                continue
            stored = nxt.cci.pi(k)
            for s in set(post) | set(stored):
                dev = max(dev, abs(post.get(s, 0.0) - stored.get(s, 0.0)))
    return dev


def attach_verification(spec: GameSpec, sol: CIBSolution, workers: int = 1) -> CIBSolution:
    """Run the end-to-end verifier and the cell audits; store both on the solution."""
    try:
        cert = nash_gap(spec, sol.strategies(), workers=workers)
        report = cert.as_dict()
    except BudgetExceeded as exc:
        report = {"spec_hash": spec.hash, "error": str(exc), "epsilon": None}
    report.update(sol.audit())
    sol.verifier_report = report
    return sol


def _finish(spec: GameSpec, solver: _CellSolver, root: CellRecord, mode: str, offpath) -> CIBSolution:
    sol = CIBSolution(spec, mode, root.key, dict(solver.memo), offpath)
    sol.prune()
    sol.residuals = {str(t): max((c.residual for c in sol.cells.values() if c.t == t), default=0.0)
                     for t in range(1, spec.horizon + 1)}
    sol.meta = {
        "cells": len(sol.cells),
        "attempts": solver.attempts,
        "reachable_cells_only": True,
        "rounding_digits": ROUND_DIGITS,
    }
    return sol


# ------------------------------------------------------------------ drivers


def solve_cib(spec: GameSpec, config: SolverConfig | None = None, diagnose: bool = True):
    """CIBSolution, or NoFixedPointReport when the stage fixed points cannot be closed."""
    cfg = config or SolverConfig()
    if cfg.simple_mode and not is_separable(spec):
        raise SpecError("simple prescriptions need a separable game")
    solver = _CellSolver(spec, cfg, "cib")
    try:
        root = solver.solve(initial_cci(spec))
    except _CellFailure as f:
        report = NoFixedPointReport(spec.hash, f.t, dict(solver.residuals), solver.offending, None, solver.attempts)
        if diagnose and spec.n_teams == 2:
            cert = certify_nonexistence_tiny(spec)
            report.obstruction = cert.as_dict(brief=True)
        return report
    return attach_verification(spec, _finish(spec, solver, root, "cib", cfg.offpath_policy), cfg.workers)


def check_layered(spec: GameSpec) -> None:
    if spec.delay != 1:
        raise SolverError(f"the layered solver needs delay 1, got {spec.delay}")
    graph = info_dependency_graph(spec)
    bad = [c for c in graph.components if len(c) > 1 and not all(is_public_team(spec, k) for k in c)]
    if bad:
        names = ["{" + ", ".join(spec.team_names[k] for k in c) + "}" for c in bad]
        raise SolverError("components mixing private teams with others: " + "; ".join(names))


def solve_layered(spec: GameSpec, config: SolverConfig | None = None) -> CIBSolution:
    check_layered(spec)
    cfg = config or SolverConfig()
    solver = _CellSolver(spec, cfg, "layered")
    try:
        root = solver.solve(initial_cci(spec))
    except _CellFailure as f:
        raise SolverError(f"stage game search failed at t={f.t}") from None
    return attach_verification(spec, _finish(spec, solver, root, "layered", cfg.offpath_policy), cfg.workers)


# ----------------------------------------------------------- signaling-free


def solve_signaling_free(spec: GameSpec, config: SolverConfig | None = None) -> CIBSolution:
    """Backward induction over filter beliefs with open-loop prescriptions."""
    if not is_signaling_free(spec):
        raise SolverError("the game is not signaling-free")
    n, T = spec.n_teams, spec.horizon
    memo: dict = {}
    rng = np.random.default_rng((config or SolverConfig()).seed)

    def key_of(t, beliefs):
        return ("sf", t, tuple(tuple(round(float(p), ROUND_DIGITS) + 0.0 for p in b) for b in beliefs))

    def solve(t, beliefs) -> CellRecord:
        key = key_of(t, beliefs)
        if key in memo:
            return memo[key]
        u0 = (0,) * n
        succ = {}
        cont = np.zeros(n)
        if t < T:
            ydist = [
                [(y, float(sum(beliefs[k][x] * spec.obs_row(k, t, x, u0)[y] for x in range(len(beliefs[k])))))
                 for y in range(spec.n_obs(k, t))]
                for k in range(n)
            ]
            ydist = [[(y, q) for y, q in row if q > 0] for row in ydist]
            children = {}
            for combo in itertools.product(*ydist):
                y = tuple(c[0] for c in combo)
                q = float(np.prod([c[1] for c in combo]))
                nb = [signaling_free_update(spec, k, t, beliefs[k], y[k]) for k in range(n)]
                rec = solve(t + 1, nb)
                children[y] = rec.key
                cont += q * np.array(rec.meta_value)
            for u in spec.joint_actions(t):
                for y, ck in children.items():
                    succ[(y, u)] = ck
        # expected stage reward per joint action
        dims = spec.joint_action_dims(t)
        pay = [np.zeros(dims) for _ in range(n)]
        for u in spec.joint_actions(t):
            for x in spec.joint_states(t):
                w = float(np.prod([beliefs[k][x[k]] for k in range(n)]))
                if w <= 0:
                    continue
                for i in range(n):
                    pay[i][u] += w * spec.reward_at(i, t, x, u)
        mixes = solve_normal_form(pay, rng)
        if mixes is None:
            raise SolverError(f"complete-information stage game unsolved at t={t}")
        default = []
        for k in range(n):
            dist = tuple(
                (constant_prescription(spec, k, t, a), float(p)) for a, p in enumerate(mixes[k]) if p > 0
            )
            default.append(tuple(sorted(dist)))
        value = [float(_expected(pay[i], mixes)) + cont[i] for i in range(n)]
        rec = CellRecord(t, key, None, None, [dict() for _ in range(n)], succ,
                         values=[_ConstDict(v) for v in value], default=default)
        rec.meta_value = value
        rec.beliefs = [np.asarray(b, dtype=float).tolist() for b in beliefs]
        memo[key] = rec
        return rec

    root = solve(1, [np.asarray(spec.init[k], dtype=float) for k in range(n)])
    sol = CIBSolution(spec, "signaling-free", root.key, memo, "signaling-free")
    sol.prune()
    sol.residuals = {str(t): 0.0 for t in range(1, T + 1)}
    sol.meta = {"cells": len(sol.cells), "root_value": root.meta_value, "open_loop": True}
    return attach_verification(spec, sol, (config or SolverConfig()).workers)


class _ConstDict(dict):
    """Value table independent of the SPI."""

    def __init__(self, v):
        super().__init__()
        self.v = v

    def get(self, key, default=None):
        return self.v


def _expected(tensor: np.ndarray, mixes) -> float:
    out = tensor
    for m in reversed(mixes):
        out = out @ np.asarray(m)
    return float(out)


# ----------------------------------------------------- tiny certification


@dataclass
class Certification:
    status: str  # CERTIFIED_NONE | FOUND | INCONCLUSIVE
    equilibria: list
    violations: list
    stage: int | None = None
    solution: CIBSolution | None = None
    reason: str = ""

    def as_dict(self, brief: bool = False) -> dict:
        out = {
            "status": self.status,
            "stage": self.stage,
            "equilibria": len(self.equilibria),
            "reason": self.reason,
        }
        if not brief:
            out["violations"] = self.violations
        else:
            out["violations"] = self.violations[:4]
        return out


def measurability_violations(spec: GameSpec, profile: Sequence[TeamStrategy], tol: float = 1e-7) -> list[dict]:
    """Pairs of on-path histories sharing a rounded CCI but demanding different stage play."""
    lay, _ = layers(spec, profile)
    out = []
    for t in range(1, spec.horizon + 1):
        beliefs = common_beliefs(spec, profile, t)
        groups: dict = {}
        for h0, cb in beliefs.items():
            groups.setdefault(_cci_key_from_history(spec, t, h0, cb), []).append(h0)
        play = _conditional_play(spec, profile, lay[t - 1], t)
        for members in groups.values():
            if len(members) < 2:
                continue
            for k in range(spec.n_teams):
                for a, c in itertools.combinations(sorted(members), 2):
                    pa, pc = play[k].get(a, {}), play[k].get(c, {})
                    for sw in set(pa) & set(pc):
                        da, dc = pa[sw], pc[sw]
                        if max(abs(da.get(u, 0.0) - dc.get(u, 0.0)) for u in set(da) | set(dc)) > tol:
                            out.append({
                                "t": t, "team": spec.team_names[k], "h0_a": repr(a), "h0_b": repr(c),
                                "play_a": {str(u): p for u, p in sorted(da.items())},
                                "play_b": {str(u): p for u, p in sorted(dc.items())},
                            })
    return out


def _cci_key_from_history(spec: GameSpec, t: int, h0: tuple, cb) -> tuple:
    n, d = spec.n_teams, spec.delay
    pad = (0,) * n
    ys = [step[0] for step in h0]
    us = [step[1] for step in h0]
    y_window = tuple(([pad] * (d - 1) + ys)[len(ys):])
    u_window = tuple(([pad] * d + us)[len(us):])
    pis = []
    for k in range(n):
        m = cb.spi_marginal(k)
        pis.append(tuple(sorted((s, round(p, ROUND_DIGITS)) for s, p in m.items() if round(p, ROUND_DIGITS) != 0)))
    return (t, tuple(pis), y_window, u_window)


def _conditional_play(spec: GameSpec, profile, layer: dict, t: int) -> list[dict]:
    """Per team: {h0: {(spi, window): {u: prob}}} from the exact node distribution."""
    acc = [dict() for _ in range(spec.n_teams)]
    for node, w in layer.items():
        xs, h0, mems = node
        for k in range(spec.n_teams):
            sw = (mems[k][0], team_window(spec, xs, k, t))
            slot = acc[k].setdefault(h0, {}).setdefault(sw, {})
            for _, u, _, p in strategy_moves(spec, t, k, node, profile[k]):
                slot[u] = slot.get(u, 0.0) + w * p
    for k in range(spec.n_teams):
        for h0, table in acc[k].items():
            for sw, dist in table.items():
                z = sum(dist.values())
                table[sw] = {u: p / z for u, p in dist.items()}
    return acc


def certify_nonexistence_tiny(spec: GameSpec, budget: int | None = None) -> Certification:
    if spec.n_teams != 2:
        return Certification("INCONCLUSIVE", [], [], reason="tiny certification needs exactly two teams")
    try:
        eqs = bne_enumerate_tiny(spec, budget)
    except BudgetExceeded as exc:
        return Certification("INCONCLUSIVE", [], [], reason=str(exc))
    all_viol = []
    for eq in eqs:
        viol = measurability_violations(spec, eq.profile())
        if not viol:
            return Certification("FOUND", eqs, [], None, solution_from_equilibrium(spec, eq))
        all_viol.append(viol)
    if all(eq.isolated for eq in eqs):
        stage = min(v["t"] for vs in all_viol for v in vs) if all_viol else None
        return Certification("CERTIFIED_NONE", eqs, [v for vs in all_viol for v in vs], stage,
                             reason="every equilibrium gives different play at histories sharing a CCI cell")
    return Certification("INCONCLUSIVE", eqs, [v for vs in all_viol for v in vs],
                         reason="a degenerate equilibrium component was only checked at one representative")


def solution_from_equilibrium(spec: GameSpec, eq: TinyEquilibrium) -> CIBSolution:
    return solution_from_profile(spec, eq.profile(), "enumerated")


def solution_from_profile(spec: GameSpec, profile: Sequence[TeamStrategy], mode: str) -> CIBSolution:
    """History-indexed cells carrying the profile's conditional play given (h0, SPI)."""
    from .spib import spib_tables

    tables = spib_tables(spec, profile)
    n, T = spec.n_teams, spec.horizon
    cells: dict = {}
    for k in range(n):
        for (t, h0, s), dist in tables[k].items():
            key = ("h", t, h0)
            rec = cells.get(key)
            if rec is None:
                rec = cells[key] = CellRecord(t, key, None, None, [dict() for _ in range(n)], {},
                                              values=[dict() for _ in range(n)])
            rec.lam[k][s] = dist
    for key, rec in cells.items():
        _, t, h0 = key
        if t < T:
            for y in spec.joint_observations(t):
                for u in spec.joint_actions(t):
                    nk = ("h", t + 1, h0 + ((y, u),))
                    if nk in cells:
                        rec.successors[(y, u)] = nk
    sol = CIBSolution(spec, mode, ("h", 1, ()), cells)
    sol.meta = {"cells": len(cells), "history_indexed": True}
    return sol
