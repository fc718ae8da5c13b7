"""Built-in games: the guessing games, the three-stage non-existence game and
random generators for the two structured classes with guaranteed equilibria."""

from __future__ import annotations

import itertools
from typing import Callable, Sequence

import numpy as np

from .model import GameSpec, SpecError, spec_from_document

NONE = ["none"]
PM = ["-1", "+1"]


def _val(label: str) -> int:
    return int(label)


def build_document(
    horizon: int,
    delay: int,
    teams: Sequence[tuple[str, Sequence[tuple[str, Sequence[Sequence[str]], Sequence[Sequence[str]]]]]],
    observations: Sequence[Sequence[Sequence[str]]],
    init: Callable[[int, tuple], float],
    transition: Callable[[int, int, tuple, tuple, tuple], float],
    observation: Callable[[int, int, tuple, tuple, str], float],
    reward: Callable[[int, int, tuple, tuple], float],
) -> dict:
    """Tabulate a game document from label-level callables.

    Team states are passed as tuples of agent labels, joint actions as tuples
    (per team) of tuples of agent labels, joint states likewise.
    """
    n = len(teams)

    def team_states(i, t):
        return list(itertools.product(*[ag[1][t - 1] for ag in teams[i][1]]))

    def team_actions(i, t):
        return list(itertools.product(*[ag[2][t - 1] for ag in teams[i][1]]))

    def joint_actions(t):
        return list(itertools.product(*[team_actions(i, t) for i in range(n)]))

    def joint_states(t):
        return list(itertools.product(*[team_states(i, t) for i in range(n)]))

    doc = {
        "horizon": horizon,
        "delay": delay,
        "teams": [
            {
                "name": name,
                "agents": [
                    {"name": an, "states": [list(s) for s in st], "actions": [list(a) for a in ac]}
                    for an, st, ac in agents
                ],
            }
            for name, agents in teams
        ],
        "observations": [[list(o) for o in obs] for obs in observations],
        "init": [[float(init(i, x)) for x in team_states(i, 1)] for i in range(n)],
        "transition": [
            [
                [
                    [[float(transition(i, t, x, u, x2)) for x2 in team_states(i, t + 1)] for u in joint_actions(t)]
                    for x in team_states(i, t)
                ]
                for t in range(1, horizon)
            ]
            for i in range(n)
        ],
        "observation_kernel": [
            [
                [
                    [[float(observation(i, t, x, u, y)) for y in observations[i][t - 1]] for u in joint_actions(t)]
                    for x in team_states(i, t)
                ]
                for t in range(1, horizon + 1)
            ]
            for i in range(n)
        ],
        "reward": [
            [
                [[float(reward(i, t, x, u)) for u in joint_actions(t)] for x in joint_states(t)]
                for t in range(1, horizon + 1)
            ]
            for i in range(n)
        ],
    }
    return doc


def _no_obs(i, t, x, u, y):
    return 1.0


def _static(i, t, x, u, x2):
    return 1.0 if x == x2 else 0.0


def guessing() -> GameSpec:
    """Team A (two agents) hides a static pair of signs; team B guesses them at t = 2."""
    a_agents = [(f"A{j + 1}", [PM, PM], [PM, NONE]) for j in range(2)]
    b_agents = [(f"B{j + 1}", [["0"], ["0"]], [NONE, PM]) for j in range(2)]

    def reward(i, t, x, u):
        xa = [_val(v) for v in x[0]]
        if t == 1:
            if i == 1:
                return 0.0
            ua = [_val(v) for v in u[0]]
            return 1.0 if xa[0] * ua[0] * xa[1] * ua[1] == -1 else 0.0
        ub = [_val(v) for v in u[1]]
        hits = sum(1.0 for j in range(2) if xa[j] == ub[j])
        return -hits if i == 0 else hits

    doc = build_document(
        2, 2, [("A", a_agents), ("B", b_agents)], [[NONE, NONE], [NONE, NONE]],
        init=lambda i, x: 0.25 if i == 0 else 1.0,
        transition=_static, observation=_no_obs, reward=reward,
    )
    return spec_from_document(doc)


def guessing_communication() -> GameSpec:
    """Team A acts at both times and is rewarded for reporting its teammate's sign at t = 2."""
    a_agents = [(f"A{j + 1}", [PM, PM], [PM, PM]) for j in range(2)]
    b_agents = [(f"B{j + 1}", [["0"], ["0"]], [NONE, PM]) for j in range(2)]

    def reward(i, t, x, u):
        if t == 1:
            return 0.0
        xa = [_val(v) for v in x[0]]
        ua = [_val(v) for v in u[0]]
        ub = [_val(v) for v in u[1]]
        caught = 1.0 if xa == ub else 0.0
        if i == 1:
            return caught
        swap = 1.0 if (xa[1] == ua[0] and xa[0] == ua[1]) else 0.0
        return swap + (1.0 - caught)

    doc = build_document(
        2, 2, [("A", a_agents), ("B", b_agents)], [[NONE, NONE], [NONE, NONE]],
        init=lambda i, x: 0.25 if i == 0 else 1.0,
        transition=_static, observation=_no_obs, reward=reward,
    )
    return spec_from_document(doc)


NONEXISTENCE_PAYOFF = {("-1", "L"): 0.0, ("-1", "R"): 1.0, ("+1", "L"): 2.0, ("+1", "R"): 0.0}


def nonexistence(eps: float = 0.1) -> GameSpec:
    """Alice flips her sign at t = 1; Bob guesses the resulting sign at t = 3."""
    eps = float(eps)
    if not 0.0 < eps < 1.0 / 3.0:
        raise SpecError(f"nonexistence requires eps in (0, 1/3), got {eps}")
    alice = [("Alice", [PM, PM, PM], [PM, NONE, NONE])]
    bob = [("Bob", [["0"]] * 3, [NONE, NONE, ["L", "R"]])]

    def transition(i, t, x, u, x2):
        if i == 1:
            return 1.0
        if t == 1:
            return 1.0 if _val(x2[0]) == _val(x[0]) * _val(u[0][0]) else 0.0
        return 1.0 if x2 == x else 0.0

    def reward(i, t, x, u):
        if t == 1:
            r = eps if u[0][0] == "+1" else 0.0
        elif t == 3:
            r = NONEXISTENCE_PAYOFF[(x[0][0], u[1][0])]
        else:
            r = 0.0
        return r if i == 0 else -r

    doc = build_document(
        3, 1, [("Alice", alice), ("Bob", bob)], [[NONE] * 3, [NONE] * 3],
        init=lambda i, x: 0.5 if i == 0 else 1.0,
        transition=transition, observation=_no_obs, reward=reward,
    )
    return spec_from_document(doc)


def nonexistence_parameters(spec: GameSpec, profile) -> tuple[float, float, float, float]:
    """(p1, p2, q_minus, q_plus) of a profile on the nonexistence game.

    p1 = Pr(Alice plays -1 | x = -1), p2 = Pr(Alice plays +1 | x = +1) and
    q_u = Pr(Bob plays L at t = 3 | Alice's action u at t = 1).
    """
    from .coordinator import initial_spi, prescription_space

    space_a = prescription_space(spec, 0, 1)
    p1 = p2 = 0.0
    for g, w in profile[0].dist(1, (), initial_spi(spec, 0), ((), ()) if profile[0].full_history else None):
        table = space_a.decode(g)[0]
        p1 += w * (table[0] == 0)
        p2 += w * (table[1] == 1)
    space_b = prescription_space(spec, 1, 3)
    qs = []
    for u1 in (0, 1):
        h0 = (((0, 0), (u1, 0)), ((0, 0), (0, 0)))
        hist = ((0, 0), (0, 0)) if profile[1].full_history else None
        q = sum(w for g, w in profile[1].dist(3, h0, (0, ()), hist) if space_b.decode(g)[0][0] == 0)
        qs.append(float(q))
    return float(p1), float(p2), qs[0], qs[1]


def _labels(prefix: str, n: int) -> list[str]:
    return [f"{prefix}{k}" for k in range(n)]


def _random_row(rng: np.random.Generator, n: int) -> np.ndarray:
    p = rng.dirichlet(np.ones(n))
    p = np.round(p, 6)
    p[-1] = 1.0 - p[:-1].sum()
    if p[-1] < 0:
        p = np.full(n, 1.0 / n)
    return p


def random_signaling_free(
    seed: int = 0, teams: int = 2, agents: int = 1, nx: int = 2, nu: int = 2, ny: int = 2,
    T: int = 2, d: int = 1,
) -> GameSpec:
    """Uncontrolled states and observations; rewards ignore the own team's state."""
    rng = np.random.default_rng(seed)
    team_defs = [
        (f"T{i}", [(f"T{i}a{j}", [_labels("x", nx)] * T, [_labels("u", nu)] * T) for j in range(agents)])
        for i in range(teams)
    ]
    obs = [[_labels("y", ny)] * T for _ in range(teams)]
    nX = nx ** agents
    trans = {(i, t): [_random_row(rng, nX) for _ in range(nX)] for i in range(teams) for t in range(1, T)}
    lik = {(i, t): [_random_row(rng, ny) for _ in range(nX)] for i in range(teams) for t in range(1, T + 1)}
    init = {i: _random_row(rng, nX) for i in range(teams)}
    tables: dict = {}

    def index_of(labels):
        idx = 0
        for lab in labels:
            idx = idx * nx + int(lab[1:])
        return idx

    def reward(i, t, x, u):
        key = (i, t, tuple(x[k] for k in range(teams) if k != i), u)
        if key not in tables:
            tables[key] = float(np.round(rng.uniform(-1, 1), 3))
        return tables[key]

    doc = build_document(
        T, d, team_defs, obs,
        init=lambda i, x: init[i][index_of(x)],
        transition=lambda i, t, x, u, x2: trans[(i, t)][index_of(x)][index_of(x2)],
        observation=lambda i, t, x, u, y: lik[(i, t)][index_of(x)][int(y[1:])],
        reward=reward,
    )
    return spec_from_document(doc)


def random_layered(
    seed: int = 0, teams: int = 2, nx: int = 2, nu: int = 2, ny: int = 2, T: int = 2,
    public_scc: bool | None = None,
) -> GameSpec:
    """d = 1 games whose dependency graph satisfies the layered-solver precondition.

    With ``public_scc`` the first two teams observe their own state exactly and
    are mutually coupled; otherwise every team depends only on earlier teams.
    """
    rng = np.random.default_rng(seed)
    if public_scc is None:
        public_scc = bool(rng.integers(2)) and teams >= 2
    team_defs = [(f"T{i}", [(f"T{i}a0", [_labels("x", nx)] * T, [_labels("u", nu)] * T)]) for i in range(teams)]

    def is_public(i):
        return public_scc and i < 2

    obs = [[_labels("y", nx if is_public(i) else ny)] * T for i in range(teams)]

    def parents(i):
        if public_scc and i < 2:
            return [0, 1]
        return list(range(i + 1))

    tables: dict = {}

    def cached(key, make):
        if key not in tables:
            tables[key] = make()
        return tables[key]

    def xi(x):
        return int(x[0][1:])

    def transition(i, t, x, u, x2):
        ctx = tuple(u[k] for k in parents(i))
        return cached(("f", i, t, xi(x), ctx), lambda: _random_row(rng, nx))[xi(x2)]

    def observation(i, t, x, u, y):
        if is_public(i):
            return 1.0 if int(y[1:]) == xi(x) else 0.0
        ctx = tuple(u[k] for k in parents(i))
        return cached(("l", i, t, xi(x), ctx), lambda: _random_row(rng, ny))[int(y[1:])]

    def reward(i, t, x, u):
        ctx = tuple((x[k], u[k]) for k in parents(i))
        return cached(("r", i, t, ctx), lambda: float(np.round(rng.uniform(-1, 1), 3)))

    init = {i: _random_row(rng, nx) for i in range(teams)}
    doc = build_document(
        T, 1, team_defs, obs,
        init=lambda i, x: init[i][int(x[0][1:])],
        transition=transition, observation=observation, reward=reward,
    )
    return spec_from_document(doc)


def random_game(
    seed: int = 0, teams: int = 2, agents: Sequence[int] | int = 1, nx: int = 2, nu: int = 2,
    ny: int = 2, T: int = 2, d: int = 1, sizes_vary: bool = True,
) -> GameSpec:
    """Unstructured random game: controlled dynamics, action-dependent observations.

    With ``sizes_vary`` each alphabet size is drawn from 1..n independently per
    (agent, time), so the generator covers singleton padding-like cases too.
    """
    rng = np.random.default_rng(seed)
    if isinstance(agents, int):
        agents = [agents] * teams

    def size(n):
        return int(rng.integers(1, n + 1)) if sizes_vary else n

    team_defs = []
    for i in range(teams):
        ags = []
        for j in range(agents[i]):
            st = [_labels("x", size(nx)) for _ in range(T)]
            ac = [_labels("u", size(nu)) for _ in range(T)]
            ags.append((f"T{i}a{j}", st, ac))
        team_defs.append((f"T{i}", ags))
    obs = [[_labels("y", size(ny)) for _ in range(T)] for _ in range(teams)]
    tables: dict = {}

    def cached(key, make):
        if key not in tables:
            tables[key] = make()
        return tables[key]

    def nstates(i, t):
        return int(np.prod([len(a[1][t - 1]) for a in team_defs[i][1]]))

    def idx(i, t, x):
        out = 0
        for lab, a in zip(x, team_defs[i][1]):
            out = out * len(a[1][t - 1]) + int(lab[1:])
        return out

    doc = build_document(
        T, d, team_defs, obs,
        init=lambda i, x: cached(("i", i), lambda: _random_row(rng, nstates(i, 1)))[idx(i, 1, x)],
        transition=lambda i, t, x, u, x2: cached(
            ("f", i, t, x, u), lambda: _random_row(rng, nstates(i, t + 1))
        )[idx(i, t + 1, x2)],
        observation=lambda i, t, x, u, y: cached(
            ("l", i, t, x, u), lambda: _random_row(rng, len(obs[i][t - 1]))
        )[int(y[1:])],
        reward=lambda i, t, x, u: cached(("r", i, t, x, u), lambda: float(np.round(rng.uniform(-1, 1), 3))),
    )
    return spec_from_document(doc)


BUILTINS: dict[str, Callable[..., GameSpec]] = {
    "guessing": guessing,
    "guessing-communication": guessing_communication,
    "nonexistence": nonexistence,
    "random-signaling-free": random_signaling_free,
    "random-layered": random_layered,
}

_PARAM_ALIASES = {"|X|": "nx", "|U|": "nu", "|Y|": "ny", "ε": "eps", "epsilon": "eps"}


def builtin(name: str, params: dict | None = None) -> GameSpec:
    if name not in BUILTINS:
        raise SpecError(f"unknown built-in {name!r}; choose from {sorted(BUILTINS)}")
    kwargs = {}
    for k, v in (params or {}).items():
        k = _PARAM_ALIASES.get(k, k)
        kwargs[k] = _coerce(v)
    try:
        return BUILTINS[name](**kwargs)
    except TypeError as exc:
        raise SpecError(f"bad parameters for {name}: {exc}") from None


def _coerce(v):
    if not isinstance(v, str):
        return v
    low = v.lower()
    if low in ("true", "false"):
        return low == "true"
    for cast in (int, float):
        try:
            return cast(v)
        except ValueError:
            pass
    return v
