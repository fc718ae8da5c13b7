"""Structural analysis of a game: dependency graph and class predicates."""

from __future__ import annotations

from dataclasses import dataclass

import networkx as nx
import numpy as np

from .model import GameSpec

TOL = 1e-12


@dataclass(frozen=True)
class InfoDependencyGraph:
    n_teams: int
    edges: tuple[tuple[int, int], ...]  # (i, j) means i <- j
    components: tuple[tuple[int, ...], ...]  # topologically ordered

    def parents(self, i: int) -> list[int]:
        return sorted(j for a, j in self.edges if a == i)

    def component_of(self, i: int) -> int:
        for c, members in enumerate(self.components):
            if i in members:
                return c
        raise KeyError(i)


def _varies(arr: np.ndarray, axis: int) -> bool:
    if arr.shape[axis] <= 1:
        return False
    ref = np.take(arr, [0], axis=axis)
    return bool(np.max(np.abs(arr - ref)) > TOL)


def _action_axes(spec: GameSpec, t: int, kernel: np.ndarray, axis: int) -> np.ndarray:
    """Reshape the flat joint-action axis into one axis per team."""
    shape = kernel.shape[:axis] + spec.joint_action_dims(t) + kernel.shape[axis + 1:]
    return kernel.reshape(shape)


def depends_on(spec: GameSpec, i: int, j: int) -> bool:
    """Whether some kernel or reward of team i varies with team j's state or action."""
    n = spec.n_teams
    for t in range(1, spec.horizon + 1):
        kernels = [spec.observation[i][t - 1]]
        if t < spec.horizon:
            kernels.append(spec.transition[i][t - 1])
        for k in kernels:
            if _varies(_action_axes(spec, t, k, 1), 1 + j):
                return True
        r = spec.reward[i][t - 1]
        r = r.reshape(spec.joint_state_dims(t) + (r.shape[1],))
        if _varies(r, j):
            return True
        r = _action_axes(spec, t, r, n)
        if _varies(r, n + j):
            return True
    return False


def info_dependency_graph(spec: GameSpec) -> InfoDependencyGraph:
    n = spec.n_teams
    edges = tuple((i, j) for i in range(n) for j in range(n) if i != j and depends_on(spec, i, j))
    g = nx.DiGraph()
    g.add_nodes_from(range(n))
    # information flows from j to i when i <- j
    g.add_edges_from((j, i) for i, j in edges)
    cond = nx.condensation(g)
    order = nx.lexicographical_topological_sort(cond, key=lambda c: min(cond.nodes[c]["members"]))
    comps = tuple(tuple(sorted(cond.nodes[c]["members"])) for c in order)
    return InfoDependencyGraph(n, edges, comps)


def is_public_team(spec: GameSpec, team: int) -> bool:
    for k in spec.observation[team]:
        support = k > 0  # (x, u, y)
        overlap = support.sum(axis=0)  # (u, y): number of states emitting y
        if np.any(overlap > 1):
            return False
    return True


def is_signaling_free(spec: GameSpec) -> bool:
    n = spec.n_teams
    for i in range(n):
        for t in range(1, spec.horizon + 1):
            if _varies(spec.observation[i][t - 1], 1):
                return False
            if t < spec.horizon and _varies(spec.transition[i][t - 1], 1):
                return False
            r = spec.reward[i][t - 1]
            r = r.reshape(spec.joint_state_dims(t) + (r.shape[1],))
            if _varies(r, i):
                return False
    return True


def _per_agent_factorizes(joint: np.ndarray, in_dims: tuple[int, ...], out_dims: tuple[int, ...]) -> bool:
    """joint[x, u, x'] == prod_j M_j(x'_j | x_j, u) for the given mixed-radix splits."""
    n = len(in_dims)
    nu = joint.shape[1]
    k = joint.reshape(in_dims + (nu,) + out_dims)
    prod = np.ones_like(k)
    for j in range(n):
        other_out = tuple(n + 1 + a for a in range(n) if a != j)
        m = k.sum(axis=other_out, keepdims=True)
        # the marginal of agent j may depend only on x_j and u
        if any(_varies(m, a) for a in range(n) if a != j):
            return False
        prod = prod * m
    return bool(np.max(np.abs(prod - k)) <= TOL)


def _factorizations(n: int, parts: int):
    """Ordered factorizations of n into the given number of positive factors."""
    if parts == 1:
        yield (n,)
        return
    for f in range(1, n + 1):
        if n % f == 0:
            for rest in _factorizations(n // f, parts - 1):
                yield (f,) + rest


def is_separable(spec: GameSpec) -> bool:
    for i in range(spec.n_teams):
        na = spec.n_agents(i)
        if na == 1:
            continue
        for t in range(1, spec.horizon):
            if not _per_agent_factorizes(
                spec.transition[i][t - 1], spec.agent_state_dims(i, t), spec.agent_state_dims(i, t + 1)
            ):
                return False
        for t in range(1, spec.horizon + 1):
            k = spec.observation[i][t - 1]
            dims = spec.agent_state_dims(i, t)
            if not any(
                _per_agent_factorizes(k, dims, split) for split in _factorizations(k.shape[2], na)
            ):
                return False
    return True


def prescription_counts(spec: GameSpec, team: int, simple: bool = False) -> list[int]:
    from .coordinator import prescription_space

    return [prescription_space(spec, team, t, simple).size for t in range(1, spec.horizon + 1)]


def analyze(spec: GameSpec) -> dict:
    g = info_dependency_graph(spec)
    sep = is_separable(spec)
    return {
        "horizon": spec.horizon,
        "delay": spec.delay,
        "teams": [
            {
                "name": spec.team_names[i],
                "agents": spec.agent_names[i],
                "public": is_public_team(spec, i),
                "prescriptions": prescription_counts(spec, i),
                "simple_prescriptions": prescription_counts(spec, i, True) if sep else None,
            }
            for i in range(spec.n_teams)
        ],
        "edges": [[spec.team_names[i], spec.team_names[j]] for i, j in g.edges],
        "components": [[spec.team_names[i] for i in c] for c in g.components],
        "separable": sep,
        "signaling_free": is_signaling_free(spec),
        "spec_hash": spec.hash,
    }
