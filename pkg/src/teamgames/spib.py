"""Search for equilibria in strategies that read (common history, SPI).

Each team's exact best response is perturbed onto the set where every
prescription keeps probability at least eps/|Gamma|, and the perturbed replies
are averaged fictitious-play style while eps shrinks. The final profile gets
a least-squares polish of the indifference conditions on its detected support,
and the candidate with the smallest measured gap is returned.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares

from .coordinator import FunctionStrategy, SPIBStrategy, TeamStrategy, prescription_space
from .model import GameSpec
from .rollout import layers, strategy_moves
from .verifier import NashCertificate, best_response, nash_gap

DEFAULT_EPS = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6)
ACCEPT_GAP = 1e-9


@dataclass
class SPIBConfig:
    eps_schedule: tuple = DEFAULT_EPS
    iters_per_eps: int = 40
    damping: float | None = None  # None: 1/(k+1) averaging
    seed: int = 0
    restarts: int = 2
    polish: bool = True
    support_tol: float = 1e-2
    workers: int = 1


@dataclass
class SPIBProfile:
    spec_hash: str
    tables: list  # per team {(t, h0, spi): np.ndarray over prescriptions}
    certificate: NashCertificate | None = None
    meta: dict = field(default_factory=dict)

    @property
    def gap(self) -> float:
        return float("inf") if self.certificate is None else self.certificate.epsilon

    def strategies(self, spec: GameSpec) -> list[TeamStrategy]:
        return strategies_from_tables(spec, self.tables)


def _uniform(spec: GameSpec, k: int, t: int) -> np.ndarray:
    n = len(prescription_space(spec, k, t))
    return np.full(n, 1.0 / n)


def _as_dist(arr: np.ndarray) -> tuple:
    return tuple((g, float(p)) for g, p in enumerate(arr) if p > 0)


def strategies_from_tables(spec: GameSpec, tables: Sequence[dict]) -> list[TeamStrategy]:
    out = []
    for k, tab in enumerate(tables):
        dists = {key: _as_dist(arr) for key, arr in tab.items()}
        out.append(SPIBStrategy(dists, default=lambda t, h0, s, k=k: _as_dist(_uniform(spec, k, t))))
    return out


def spib_tables(spec: GameSpec, profile: Sequence[TeamStrategy], budget: int | None = None) -> list[dict]:
    """Pr(gamma | t, h0, spi) of each team over every cell it can reach.

    The other teams are replaced by uniform play so that every common history
    they could produce appears; a team's conditional play at a cell does not
    depend on how the others reached it.
    """
    n = spec.n_teams
    out = []
    for k in range(n):
        prof = [
            profile[j] if j == k else FunctionStrategy(lambda t, h0, s, h, j=j: _as_dist(_uniform(spec, j, t)))
            for j in range(n)
        ]
        lay, _ = layers(spec, prof, budget)
        acc: dict = {}
        for t in range(1, spec.horizon + 1):
            ng = len(prescription_space(spec, k, t))
            for node, w in lay[t - 1].items():
                _, h0, mems = node
                row = acc.setdefault((t, h0, mems[k][0]), np.zeros(ng))
                for g, _, _, p in strategy_moves(spec, t, k, node, prof[k]):
                    row[g] += w * p
        for key, row in acc.items():
            z = row.sum()
            if z > 0:
                acc[key] = row / z
        out.append({key: tuple((g, float(p)) for g, p in enumerate(row) if p > 0) for key, row in acc.items()})
    return out


def _replies(spec: GameSpec, tables: list[dict]):
    prof = strategies_from_tables(spec, tables)
    return [best_response(spec, prof, i) for i in range(spec.n_teams)]


def _measure(spec: GameSpec, tables: list[dict], workers: int) -> NashCertificate:
    return nash_gap(spec, strategies_from_tables(spec, tables), workers=workers)


def _snap(tables: list[dict]) -> list[dict]:
    out = []
    for tab in tables:
        snapped = {}
        for key, arr in tab.items():
            e = np.zeros_like(arr)
            e[int(np.argmax(arr))] = 1.0
            snapped[key] = e
        out.append(snapped)
    return out


def _fictitious_play(spec: GameSpec, tables: list[dict], cfg: SPIBConfig, trace: list) -> list[dict]:
    for eps in cfg.eps_schedule:
        for k in range(1, cfg.iters_per_eps + 1):
            brs = _replies(spec, tables)
            alpha = cfg.damping if cfg.damping is not None else 1.0 / (k + 1)
            for i, br in enumerate(brs):
                tab = tables[i]
                for key, dist in br.strategy.table.items():
                    t = key[0]
                    cur = tab.get(key)
                    if cur is None:
                        cur = _uniform(spec, i, t)
                    target = np.full(len(cur), eps / len(cur))
                    target[dist[0][0]] += 1.0 - eps
                    tab[key] = cur + alpha * (target - cur)
        trace.append({"eps": eps, "iterations": cfg.iters_per_eps})
    return tables


def polish(spec: GameSpec, tables: list[dict], support_tol: float = 1e-2) -> list[dict]:
    """Solve the indifference conditions on the detected supports by least squares."""
    free = []
    base = []
    for i, tab in enumerate(tables):
        fixed = {}
        for key, arr in tab.items():
            supp = [g for g, p in enumerate(arr) if p > support_tol] or [int(np.argmax(arr))]
            if len(supp) == 1:
                fixed[key] = _unit(len(arr), supp[0])
            else:
                fixed[key] = arr
                free.append((i, key, supp))
        base.append(fixed)
    if not free:
        return base
    x0 = np.concatenate([tables[i][key][supp] / tables[i][key][supp].sum() for i, key, supp in free])

    def assemble(x):
        out = [dict(tab) for tab in base]
        pos = 0
        for i, key, supp in free:
            part = np.clip(x[pos: pos + len(supp)], 1e-15, None)
            pos += len(supp)
            row = np.zeros_like(base[i][key])
            row[supp] = part / part.sum()
            out[i][key] = row
        return out

    def residual(x):
        brs = _replies(spec, assemble(x))
        res = []
        for i, key, supp in free:
            q = brs[i].q.get(key)
            if q is None:
                res.extend([0.0] * (len(supp) - 1))
            else:
                res.extend(float(q[g] - q[supp[0]]) for g in supp[1:])
        return np.array(res)

    fit = least_squares(residual, x0, bounds=(0.0, 1.0), method="trf", xtol=1e-15, ftol=1e-15, gtol=1e-15,
                        max_nfev=200 * len(x0))
    return assemble(fit.x)


def solve_spib(spec: GameSpec, config: SPIBConfig | None = None) -> SPIBProfile:
    """Best profile found; its certificate carries the exact measured gap."""
    cfg = config or SPIBConfig()
    n = spec.n_teams
    start = [dict() for _ in range(n)]
    cert = _measure(spec, start, cfg.workers)
    if cert.epsilon <= ACCEPT_GAP:
        return SPIBProfile(spec.hash, _fill(spec, start), cert, {"accepted": "initial", "attempts": 0})
    if n == 1:
        brs = _replies(spec, start)
        tabs = [{key: _unit(len(_uniform(spec, 0, key[0])), d[0][0]) for key, d in brs[0].strategy.table.items()}]
        return SPIBProfile(spec.hash, tabs, _measure(spec, tabs, cfg.workers), {"accepted": "optimal control"})
    rng = np.random.default_rng(cfg.seed)
    best: SPIBProfile | None = None
    trace: list = []
    for restart in range(cfg.restarts):
        tables = _fill(spec, start)
        if restart:
            tables = [{key: rng.dirichlet(np.ones(len(arr))) for key, arr in tab.items()} for tab in tables]
        tables = _fictitious_play(spec, tables, cfg, trace)
        candidates = [("averaged", tables), ("snapped", _snap(tables))]
        if cfg.polish:
            candidates.append(("polished", polish(spec, tables, cfg.support_tol)))
        for label, tabs in candidates:
            c = _measure(spec, tabs, cfg.workers)
            if best is None or c.epsilon < best.gap:
                best = SPIBProfile(spec.hash, tabs, c, {"accepted": label, "restart": restart})
        if best.gap <= 1e-9:
            break
    best.meta["trace"] = trace
    best.meta["eps_schedule"] = list(cfg.eps_schedule)
    return best


def _unit(n: int, k: int) -> np.ndarray:
    e = np.zeros(n)
    e[k] = 1.0
    return e


def _fill(spec: GameSpec, tables: list[dict]) -> list[dict]:
    """Explicit rows for every cell the best-response passes visit."""
    out = [dict(tab) for tab in tables]
    for i, br in enumerate(_replies(spec, out)):
        for key in br.strategy.table:
            out[i].setdefault(key, _uniform(spec, i, key[0]))
    return out
