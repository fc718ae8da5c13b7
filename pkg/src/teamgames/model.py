"""Finite games among teams: document format, validation and indexing helpers.

Alphabets are indexed 0..n-1 in declaration order. Team states and team
actions are flattened in mixed radix over agents (first agent most
significant); joint quantities over teams are flattened the same way with the
first team most significant. Times t <= 0 are padding: singleton alphabets,
point-mass kernels and zero reward.
"""

from __future__ import annotations

import hashlib
import json
from functools import cached_property, lru_cache
from typing import Any, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

ROW_TOL = 1e-12


class SpecError(ValueError):
    """Raised for schema violations and invalid kernels."""


class AgentDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str
    states: list[list[str]] = Field(description="state labels for t = 1..T")
    actions: list[list[str]] = Field(description="action labels for t = 1..T")


class TeamDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str
    agents: list[AgentDoc] = Field(min_length=1)


class GameDoc(BaseModel):
    """Game description document; kernels are dense [time][state][joint-action][next]."""

    model_config = ConfigDict(extra="forbid")

    horizon: int = Field(ge=1)
    delay: int = Field(ge=1)
    teams: list[TeamDoc] = Field(min_length=1)
    observations: list[list[list[str]]] = Field(
        description="per team, per time t = 1..T, observation labels"
    )
    init: list[list[float]] = Field(description="per team distribution over X_1 (team joint state)")
    transition: list[list[list[list[list[float]]]]] = Field(
        description="per team, t = 1..T-1, [state][joint action][next state]"
    )
    observation_kernel: list[list[list[list[list[float]]]]] = Field(
        description="per team, t = 1..T, [state][joint action][observation]"
    )
    reward: list[list[list[list[float]]]] = Field(
        description="per team, t = 1..T, [joint state][joint action]"
    )


def schema_document() -> dict:
    return GameDoc.model_json_schema()


def _prod(xs: Sequence[int]) -> int:
    out = 1
    for x in xs:
        out *= int(x)
    return out


class GameSpec:
    """Validated, padded, immutable game description."""

    def __init__(self, doc: GameDoc):
        self.doc = doc
        self.horizon = doc.horizon
        self.delay = doc.delay
        self.team_names = [t.name for t in doc.teams]
        self.agent_names = [[a.name for a in t.agents] for t in doc.teams]
        self.state_labels = [[a.states for a in t.agents] for t in doc.teams]
        self.action_labels = [[a.actions for a in t.agents] for t in doc.teams]
        self.obs_labels = doc.observations
        self._check_shapes()
        self.init = [_frozen(np.asarray(p, dtype=float)) for p in doc.init]
        self.transition = [[_frozen(np.asarray(k, dtype=float)) for k in team] for team in doc.transition]
        self.observation = [
            [_frozen(np.asarray(k, dtype=float)) for k in team] for team in doc.observation_kernel
        ]
        self.reward = [[_frozen(np.asarray(r, dtype=float)) for r in team] for team in doc.reward]
        self._check_kernels()

    # ------------------------------------------------------------------ sizes
    @property
    def n_teams(self) -> int:
        return len(self.team_names)

    def n_agents(self, i: int) -> int:
        return len(self.agent_names[i])

    @lru_cache(maxsize=None)
    def agent_state_dims(self, i: int, t: int) -> tuple[int, ...]:
        if t <= 0:
            return (1,) * self.n_agents(i)
        return tuple(len(a[t - 1]) for a in self.state_labels[i])

    @lru_cache(maxsize=None)
    def agent_action_dims(self, i: int, t: int) -> tuple[int, ...]:
        if t <= 0:
            return (1,) * self.n_agents(i)
        return tuple(len(a[t - 1]) for a in self.action_labels[i])

    def n_states(self, i: int, t: int) -> int:
        return _prod(self.agent_state_dims(i, t))

    def n_actions(self, i: int, t: int) -> int:
        return _prod(self.agent_action_dims(i, t))

    def n_obs(self, i: int, t: int) -> int:
        if t <= 0:
            return 1
        return len(self.obs_labels[i][t - 1])

    @lru_cache(maxsize=None)
    def joint_action_dims(self, t: int) -> tuple[int, ...]:
        return tuple(self.n_actions(k, t) for k in range(self.n_teams))

    @lru_cache(maxsize=None)
    def joint_state_dims(self, t: int) -> tuple[int, ...]:
        return tuple(self.n_states(k, t) for k in range(self.n_teams))

    @lru_cache(maxsize=None)
    def joint_obs_dims(self, t: int) -> tuple[int, ...]:
        return tuple(self.n_obs(k, t) for k in range(self.n_teams))

    def n_joint_actions(self, t: int) -> int:
        return _prod(self.joint_action_dims(t))

    # --------------------------------------------------------------- indexing
    @lru_cache(maxsize=None)
    def _unravel_table(self, dims: tuple[int, ...]) -> tuple[tuple[int, ...], ...]:
        return tuple(tuple(int(v) for v in idx) for idx in np.ndindex(*dims)) if dims else ((),)

    def split_state(self, i: int, t: int, x: int) -> tuple[int, ...]:
        """Team state index -> per-agent state indices."""
        return self._unravel_table(self.agent_state_dims(i, t))[x]

    def split_action(self, i: int, t: int, u: int) -> tuple[int, ...]:
        return self._unravel_table(self.agent_action_dims(i, t))[u]

    def merge_action(self, i: int, t: int, parts: Sequence[int]) -> int:
        return _ravel(parts, self.agent_action_dims(i, t))

    def merge_state(self, i: int, t: int, parts: Sequence[int]) -> int:
        return _ravel(parts, self.agent_state_dims(i, t))

    def flat_action(self, t: int, u: Sequence[int]) -> int:
        return _ravel(u, self.joint_action_dims(t))

    def flat_state(self, t: int, x: Sequence[int]) -> int:
        return _ravel(x, self.joint_state_dims(t))

    def joint_actions(self, t: int) -> tuple[tuple[int, ...], ...]:
        return self._unravel_table(self.joint_action_dims(t))

    def joint_observations(self, t: int) -> tuple[tuple[int, ...], ...]:
        return self._unravel_table(self.joint_obs_dims(t))

    def joint_states(self, t: int) -> tuple[tuple[int, ...], ...]:
        return self._unravel_table(self.joint_state_dims(t))

    # ---------------------------------------------------------------- kernels
    def trans_row(self, i: int, t: int, x: int, u: Sequence[int]) -> np.ndarray:
        """Pr(x_{t+1}^i | x_t^i = x, u_t = u); t = 0 yields the initial law."""
        if t >= 1:
            return self.transition[i][t - 1][x, self.flat_action(t, u)]
        if t == 0:
            return self.init[i]
        return _ONE

    def obs_row(self, i: int, t: int, x: int, u: Sequence[int]) -> np.ndarray:
        if t >= 1:
            return self.observation[i][t - 1][x, self.flat_action(t, u)]
        return _ONE

    def reward_at(self, i: int, t: int, x: Sequence[int], u: Sequence[int]) -> float:
        if t < 1:
            return 0.0
        return float(self.reward[i][t - 1][self.flat_state(t, x), self.flat_action(t, u)])

    # ------------------------------------------------------------- validation
    def _check_shapes(self) -> None:
        T, doc = self.horizon, self.doc
        n = len(doc.teams)
        for name, arr in (
            ("observations", doc.observations),
            ("init", doc.init),
            ("transition", doc.transition),
            ("observation_kernel", doc.observation_kernel),
            ("reward", doc.reward),
        ):
            if len(arr) != n:
                raise SpecError(f"{name}: expected {n} team entries, got {len(arr)}")
        for i, team in enumerate(doc.teams):
            for j, ag in enumerate(team.agents):
                for field in ("states", "actions"):
                    seq = getattr(ag, field)
                    where = f"teams[{i}].agents[{j}].{field}"
                    if len(seq) != T:
                        raise SpecError(f"{where}: expected {T} time entries, got {len(seq)}")
                    for t, labels in enumerate(seq):
                        if not labels:
                            raise SpecError(f"{where}[{t}]: empty alphabet")
                        if len(set(labels)) != len(labels):
                            raise SpecError(f"{where}[{t}]: duplicate labels")
            obs = doc.observations[i]
            if len(obs) != T:
                raise SpecError(f"observations[{i}]: expected {T} time entries, got {len(obs)}")
            for t, labels in enumerate(obs):
                if not labels:
                    raise SpecError(f"observations[{i}][{t}]: empty alphabet")
        for i in range(n):
            _expect_shape(f"init[{i}]", doc.init[i], (self.n_states(i, 1),))
            if len(doc.transition[i]) != T - 1:
                raise SpecError(f"transition[{i}]: expected {T - 1} time entries")
            if len(doc.observation_kernel[i]) != T:
                raise SpecError(f"observation_kernel[{i}]: expected {T} time entries")
            if len(doc.reward[i]) != T:
                raise SpecError(f"reward[{i}]: expected {T} time entries")
            for t in range(1, T):
                _expect_shape(
                    f"transition[{i}][{t - 1}]",
                    doc.transition[i][t - 1],
                    (self.n_states(i, t), self.n_joint_actions(t), self.n_states(i, t + 1)),
                )
            for t in range(1, T + 1):
                _expect_shape(
                    f"observation_kernel[{i}][{t - 1}]",
                    doc.observation_kernel[i][t - 1],
                    (self.n_states(i, t), self.n_joint_actions(t), self.n_obs(i, t)),
                )
                _expect_shape(
                    f"reward[{i}][{t - 1}]",
                    doc.reward[i][t - 1],
                    (_prod(self.joint_state_dims(t)), self.n_joint_actions(t)),
                )

    def _check_kernels(self) -> None:
        for i in range(self.n_teams):
            _check_rows(f"init[{i}]", self.init[i][None, :])
            for t, k in enumerate(self.transition[i]):
                _check_rows(f"transition[{i}][{t}]", k)
            for t, k in enumerate(self.observation[i]):
                _check_rows(f"observation_kernel[{i}][{t}]", k)
            for t, r in enumerate(self.reward[i]):
                if not np.all(np.isfinite(r)):
                    raise SpecError(f"reward[{i}][{t}]: non-finite entry")

    # ----------------------------------------------------------------- output
    def to_document(self) -> dict:
        return self.doc.model_dump()

    def dumps(self) -> str:
        return json.dumps(self.to_document(), sort_keys=True, separators=(",", ":"))

    @cached_property
    def hash(self) -> str:
        return hashlib.sha256(self.dumps().encode()).hexdigest()

    def __eq__(self, other: object) -> bool:
        return isinstance(other, GameSpec) and (self is other or self.hash == other.hash)

    def __hash__(self) -> int:
        return hash(self.hash)

    def __repr__(self) -> str:
        return (
            f"GameSpec(T={self.horizon}, d={self.delay}, teams={self.team_names}, "
            f"hash={self.hash[:10]})"
        )


_ONE = np.ones(1)
_ONE.flags.writeable = False


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


def _ravel(parts: Sequence[int], dims: Sequence[int]) -> int:
    idx = 0
    for p, n in zip(parts, dims):
        idx = idx * n + int(p)
    return idx


def _expect_shape(where: str, value: Any, shape: tuple[int, ...]) -> None:
    def walk(v, depth, path):
        if depth == len(shape):
            if isinstance(v, list):
                raise SpecError(f"{where}{path}: too many nesting levels")
            return
        if not isinstance(v, list) or len(v) != shape[depth]:
            got = len(v) if isinstance(v, list) else "scalar"
            raise SpecError(
                f"{where}{path}: dimension mismatch, expected length {shape[depth]}, got {got}"
            )
        for k, sub in enumerate(v):
            walk(sub, depth + 1, f"{path}[{k}]")

    walk(value, 0, "")


def _check_rows(where: str, k: np.ndarray) -> None:
    if np.any(k < 0):
        bad = tuple(int(v) for v in np.argwhere(k < 0)[0])
        raise SpecError(f"{where}{list(bad[:-1])}: negative entry {k[bad]:.3g}")
    sums = k.sum(axis=-1)
    dev = np.abs(sums - 1.0)
    if np.any(dev > ROW_TOL):
        bad = tuple(int(v) for v in np.argwhere(dev > ROW_TOL)[0])
        raise SpecError(
            f"{where}{list(bad)}: row is not stochastic (sum {sums[bad]:.15g}, deviation {dev[bad]:.3g})"
        )


def spec_from_document(data: dict) -> GameSpec:
    try:
        doc = GameDoc.model_validate(data)
    except ValidationError as exc:
        err = exc.errors()[0]
        path = ".".join(str(p) for p in err["loc"])
        raise SpecError(f"schema violation at {path or '<root>'}: {err['msg']}") from None
    return GameSpec(doc)


def load_spec(text: str) -> GameSpec:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise SpecError("schema violation at <root>: expected an object")
    return spec_from_document(data)


def dump_spec(spec: GameSpec, indent: int | None = None) -> str:
    return json.dumps(spec.to_document(), sort_keys=True, indent=indent)
