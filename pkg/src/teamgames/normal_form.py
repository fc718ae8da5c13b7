"""Bimatrix equilibria by support enumeration.

Each candidate support pair (I, J) splits into two independent feasibility
problems: the row mix on I must make every column in J a best reply for the
column player, and symmetrically. A pair counts only when both sides admit a
point strictly positive on its support, so every equilibrium is reported at
exactly one support pair.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .coordinator import BudgetExceeded

TOL = 1e-9
MAX_SUPPORT_PAIRS = 1 << 20


@dataclass(frozen=True)
class BimatrixEquilibrium:
    x: np.ndarray
    y: np.ndarray
    support: tuple[tuple[int, ...], tuple[int, ...]]
    payoffs: tuple[float, float]
    isolated: bool  # the support pair pins a single point

    def as_dict(self) -> dict:
        return {
            "x": self.x.tolist(),
            "y": self.y.tolist(),
            "support": [list(self.support[0]), list(self.support[1])],
            "payoffs": list(self.payoffs),
            "isolated": self.isolated,
        }


def _subsets(n: int, sizes=None):
    sizes = range(1, n + 1) if sizes is None else sizes
    for k in sizes:
        yield from itertools.combinations(range(n), k)


def _side(P: np.ndarray, I: tuple, J: tuple) -> tuple[np.ndarray, bool] | None:
    """Mix on rows I making exactly the columns J optimal against it.

    P[k, l] is the opponent's payoff when this side plays k and the opponent l.
    Returns (mix over all rows, isolated) or None when no mix is positive on I.
    """
    n_rows, n_cols = P.shape
    I, J = list(I), list(J)
    out_cols = [c for c in range(n_cols) if c not in J]
    # equalities: sum x = 1, P[I, j] x - v = 0
    eq = np.zeros((len(J) + 1, len(I) + 1))
    eq[0, : len(I)] = 1.0
    for r, j in enumerate(J, start=1):
        eq[r, : len(I)] = P[I, j]
        eq[r, -1] = -1.0
    rhs = np.zeros(len(J) + 1)
    rhs[0] = 1.0
    rank = np.linalg.matrix_rank(eq)
    if rank == len(I) + 1:
        sol, *_ = np.linalg.lstsq(eq, rhs, rcond=None)
        if np.max(np.abs(eq @ sol - rhs)) > TOL:
            return None
        x, v = sol[:-1], sol[-1]
        if np.min(x) <= TOL:
            return None
        if out_cols and np.max(P[np.ix_(I, out_cols)].T @ x) > v + TOL:
            return None
        full = np.zeros(n_rows)
        full[I] = x
        return full, True
    # rank deficient: maximize the smallest support probability
    nv = len(I) + 2  # x_I, v, m
    c = np.zeros(nv)
    c[-1] = -1.0
    a_eq = np.hstack([eq, np.zeros((eq.shape[0], 1))])
    rows = []
    for col in out_cols:
        row = np.zeros(nv)
        row[: len(I)] = P[I, col]
        row[len(I)] = -1.0
        rows.append(row)
    for k in range(len(I)):
        row = np.zeros(nv)
        row[k] = -1.0
        row[-1] = 1.0
        rows.append(row)
    res = linprog(
        c, A_ub=np.array(rows), b_ub=np.zeros(len(rows)), A_eq=a_eq, b_eq=rhs,
        bounds=[(0, 1)] * len(I) + [(None, None), (None, 1)], method="highs",
    )
    if res.status != 0 or -res.fun <= TOL:
        return None
    full = np.zeros(n_rows)
    full[I] = np.clip(res.x[: len(I)], 0, None)
    full /= full.sum()
    return full, False


def support_pairs_count(m: int, n: int) -> int:
    return ((1 << m) - 1) * ((1 << n) - 1)


def all_equilibria(A: np.ndarray, B: np.ndarray, max_pairs: int = MAX_SUPPORT_PAIRS) -> list[BimatrixEquilibrium]:
    """Every support pair carrying an equilibrium, with one representative each."""
    A, B = np.asarray(A, float), np.asarray(B, float)
    m, n = A.shape
    if support_pairs_count(m, n) > max_pairs:
        raise BudgetExceeded(f"{m}x{n} bimatrix has too many support pairs to enumerate")
    found = []
    y_cache: dict = {}
    for I in _subsets(m):
        for J in _subsets(n):
            xs = _side(B, I, J)
            if xs is None:
                continue
            if (J, I) not in y_cache:
                y_cache[(J, I)] = _side(A.T, J, I)
            ys = y_cache[(J, I)]
            if ys is None:
                continue
            found.append(_equilibrium(A, B, xs, ys, I, J))
    return found


def first_equilibrium(A: np.ndarray, B: np.ndarray, max_pairs: int = MAX_SUPPORT_PAIRS) -> BimatrixEquilibrium | None:
    """Pure profiles first, then supports by increasing total size."""
    A, B = np.asarray(A, float), np.asarray(B, float)
    m, n = A.shape
    for i in range(m):
        for j in range(n):
            if A[i, j] >= A[:, j].max() - TOL and B[i, j] >= B[i, :].max() - TOL:
                x, y = np.zeros(m), np.zeros(n)
                x[i] = y[j] = 1.0
                return _equilibrium(A, B, (x, True), (y, True), (i,), (j,))
    if support_pairs_count(m, n) > max_pairs:
        raise BudgetExceeded(f"{m}x{n} bimatrix has too many support pairs to enumerate")
    for total in range(3, m + n + 1):
        for k in range(max(1, total - n), min(m, total - 1) + 1):
            for I in itertools.combinations(range(m), k):
                for J in itertools.combinations(range(n), total - k):
                    xs = _side(B, I, J)
                    if xs is None:
                        continue
                    ys = _side(A.T, J, I)
                    if ys is not None:
                        return _equilibrium(A, B, xs, ys, I, J)
    return None


def _equilibrium(A, B, xs, ys, I, J) -> BimatrixEquilibrium:
    x, xi = xs
    y, yi = ys
    return BimatrixEquilibrium(x, y, (tuple(I), tuple(J)), (float(x @ A @ y), float(x @ B @ y)), xi and yi)


def regret(A: np.ndarray, B: np.ndarray, x: np.ndarray, y: np.ndarray) -> float:
    return float(max(np.max(A @ y) - x @ A @ y, np.max(x @ B) - x @ B @ y))


def solve_normal_form(payoffs, rng: np.random.Generator | None = None, iters: int = 5000):
    """Mixed equilibrium of an n-player game given payoff tensors indexed by joint action.

    Two players go through support enumeration; more players use fictitious
    play followed by best-reply dynamics, each audited. None on failure.
    """
    payoffs = [np.asarray(p, float) for p in payoffs]
    n = len(payoffs)
    dims = payoffs[0].shape
    if n == 1:
        x = np.zeros(dims[0])
        x[int(np.argmax(payoffs[0] >= payoffs[0].max() - TOL))] = 1.0
        return [x]
    if n == 2:
        eq = first_equilibrium(payoffs[0], payoffs[1])
        return None if eq is None else [eq.x, eq.y]
    rng = rng or np.random.default_rng(0)

    def against(i, mixes):
        out = np.moveaxis(payoffs[i], i, 0)
        for j in reversed([j for j in range(n) if j != i]):
            out = out @ mixes[j]
        return out

    def gap(mixes):
        return max(float(against(i, mixes).max() - against(i, mixes) @ mixes[i]) for i in range(n))

    def unit(m, k):
        e = np.zeros(m)
        e[k] = 1.0
        return e

    pure = [unit(d, 0) for d in dims]
    for _ in range(100):
        changed = False
        for i in range(n):
            v = against(i, pure)
            if v.max() > v @ pure[i] + TOL:
                pure[i] = unit(dims[i], int(np.argmax(v)))
                changed = True
        if not changed:
            return pure
    for attempt in range(4):
        mixes = [np.full(d, 1.0 / d) if attempt == 0 else rng.dirichlet(np.ones(d)) for d in dims]
        for it in range(1, iters + 1):
            replies = [unit(dims[i], int(np.argmax(against(i, mixes)))) for i in range(n)]
            mixes = [m + (r - m) / (it + 1) for m, r in zip(mixes, replies)]
            if it % 50 == 0 and gap(mixes) <= TOL:
                return mixes
    return None
