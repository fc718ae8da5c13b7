import numpy as np
import pytest

from teamgames.builtins import (
    guessing,
    nonexistence,
    nonexistence_parameters,
    random_game,
    random_layered,
    random_signaling_free,
)
from teamgames.coordinator import FunctionStrategy, point, prescription_space
from teamgames.model import SpecError
from teamgames.solver import (
    CIBSolution,
    NoFixedPointReport,
    SolverConfig,
    SolverError,
    certify_nonexistence_tiny,
    solve_cib,
    solve_layered,
    solve_signaling_free,
)
from teamgames.spib import SPIBConfig, solve_spib
from teamgames.verifier import best_response, nash_gap, total_payoff

from games import decoupled, dominant_sf, public_pennies, sf_zero_sum, single_team, zero_reward
from oracles.belief_checks import random_profile

EPS = 0.1
THIRD = 1.0 / 3.0
# sum of per-stage LP values, see tests/oracles/frozen_values.py
SF_ZERO_SUM_VALUE = 0.16999999999999998
SINGLE_TEAM_OPTIMUM = 0.9875440000000001


def _constant(spec, k, t, g) -> bool:
    return all(len(set(tab)) == 1 for tab in prescription_space(spec, k, t).decode(g))


def _check_solution(sol, gap=1e-6):
    assert isinstance(sol, CIBSolution)
    rep = sol.verifier_report
    assert rep["epsilon"] is not None and rep["epsilon"] <= gap
    assert rep["interim_gap"] <= 1e-9
    assert rep["consistency_deviation"] <= 1e-9


# ------------------------------------------------------------------ CIB


def test_cib_on_signaling_free_game_plays_open_loop():
    spec = random_signaling_free(seed=7)
    sol = solve_cib(spec)
    _check_solution(sol)
    for key in sol.reachable():
        rec = sol.cells[key]
        for k in range(spec.n_teams):
            for s in rec.positive_types(k):
                assert all(_constant(spec, k, rec.t, g) for g, _ in rec.policy(k, s))


def test_cib_reports_nonexistence_obstruction():
    spec = nonexistence(EPS)
    rep = solve_cib(spec)
    assert isinstance(rep, NoFixedPointReport)
    assert rep.stage == 3
    doc = rep.as_dict()
    assert doc["proof_of_nonexistence"] is False
    assert doc["obstruction"]["status"] == "CERTIFIED_NONE"
    assert doc["spec_hash"] == spec.hash


def test_cib_report_without_diagnosis_names_the_failing_stage():
    rep = solve_cib(nonexistence(EPS), SolverConfig(restarts=2), diagnose=False)
    assert isinstance(rep, NoFixedPointReport)
    assert rep.obstruction is None and rep.stage == rep.failed_stage
    assert rep.offending_cells


def test_cib_zero_reward_has_no_gap():
    sol = solve_cib(zero_reward(T=2))
    _check_solution(sol, gap=0.0)


def test_cib_guessing_game():
    spec = guessing()
    sol = solve_cib(spec)
    _check_solution(sol)
    ja, jb = total_payoff(spec, sol.strategies())
    assert ja == pytest.approx(0.0, abs=1e-9) and jb == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("seed", range(4))
def test_cib_random_games(seed):
    spec = random_game(seed=seed, T=2, d=1 + seed % 2)
    sol = solve_cib(spec)
    _check_solution(sol)


def test_cib_simple_mode():
    spec = guessing()
    sol = solve_cib(spec, SolverConfig(simple_mode=True))
    _check_solution(sol)
    with pytest.raises(SpecError):
        solve_cib(random_game(seed=2, agents=[2, 1]), SolverConfig(simple_mode=True))


def test_cib_uniform_offpath_policy_is_recorded():
    sol = solve_cib(random_game(seed=1), SolverConfig(offpath_policy="uniform"))
    _check_solution(sol)
    assert sol.offpath_policy == "uniform"


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(offpath_policy="nearest")
    with pytest.raises(ValueError):
        SolverConfig(damping=0.0)


def test_cib_is_deterministic():
    spec = random_game(seed=3, T=2, d=2)
    a, b = solve_cib(spec), solve_cib(spec)
    assert a.verifier_report == b.verifier_report
    assert sorted(map(repr, a.cells)) == sorted(map(repr, b.cells))


# ----------------------------------------------------------------- SPIB


def test_spib_nonexistence_profile():
    spec = nonexistence(EPS)
    prof = solve_spib(spec)
    assert prof.gap <= 1e-6
    params = nonexistence_parameters(spec, prof.strategies(spec))
    np.testing.assert_allclose(params, [THIRD, THIRD, THIRD + EPS, THIRD - EPS], atol=1e-3)


def test_spib_single_team_is_optimal_control():
    spec = single_team(seed=0)
    prof = solve_spib(spec)
    assert abs(prof.gap) <= 1e-12
    assert total_payoff(spec, prof.strategies(spec))[0] == pytest.approx(SINGLE_TEAM_OPTIMUM, abs=1e-12)


def test_spib_zero_reward_accepts_first_iterate():
    prof = solve_spib(zero_reward(T=2, d=1))
    assert prof.gap == 0.0 and prof.meta["accepted"] == "initial"


def test_spib_seed_invariance():
    spec = nonexistence(EPS)
    a = solve_spib(spec, SPIBConfig(seed=0))
    b = solve_spib(spec, SPIBConfig(seed=5, restarts=3))
    assert a.gap <= 1e-9 and b.gap <= 1e-6
    ja, jb = total_payoff(spec, a.strategies(spec)), total_payoff(spec, b.strategies(spec))
    np.testing.assert_allclose(ja, jb, atol=1e-6)


# ------------------------------------------------------- signaling-free


def test_signaling_free_dominant_action():
    spec = dominant_sf()
    sol = solve_signaling_free(spec)
    _check_solution(sol, gap=1e-9)
    for rec in sol.cells.values():
        for k in range(2):
            ((g, p),) = rec.default[k]
            assert p == 1.0
            assert prescription_space(spec, k, rec.t).decode(g) == ((1, 1),)


def test_signaling_free_zero_sum_value():
    sol = solve_signaling_free(sf_zero_sum(0))
    _check_solution(sol, gap=1e-9)
    assert sol.meta["root_value"][0] == pytest.approx(SF_ZERO_SUM_VALUE, abs=1e-10)
    assert sol.meta["root_value"][1] == pytest.approx(-SF_ZERO_SUM_VALUE, abs=1e-10)


def _manual_backup(spec, sol, key, i):
    """Root value by composing one-stage backups along the stored successor table."""
    rec = sol.cells[key]
    t, n = rec.t, spec.n_teams
    val = 0.0
    acts = [{prescription_space(spec, k, t).decode(g)[0][0]: p for g, p in rec.default[k]} for k in range(n)]
    for x in spec.joint_states(t):
        wx = np.prod([rec.beliefs[k][x[k]] for k in range(n)])
        for u in spec.joint_actions(t):
            wu = np.prod([acts[k].get(u[k], 0.0) for k in range(n)])
            val += wx * wu * spec.reward_at(i, t, x, u)
    if t < spec.horizon:
        u0 = spec.joint_actions(t)[0]
        for y in spec.joint_observations(t):
            q = np.prod([sum(rec.beliefs[k][x] * spec.obs_row(k, t, x, u0)[y[k]]
                             for x in range(len(rec.beliefs[k]))) for k in range(n)])
            if q > 0:
                val += q * _manual_backup(spec, sol, rec.successors[(y, u0)], i)
    return val


@pytest.mark.parametrize("seed", [0, 3])
def test_signaling_free_root_value_composes(seed):
    spec = random_signaling_free(seed=seed, T=3)
    sol = solve_signaling_free(spec)
    for i in range(spec.n_teams):
        assert _manual_backup(spec, sol, sol.root, i) == pytest.approx(sol.meta["root_value"][i], abs=1e-10)
        assert total_payoff(spec, sol.strategies())[i] == pytest.approx(sol.meta["root_value"][i], abs=1e-10)


def test_signaling_free_builtin_seed_seven():
    _check_solution(solve_signaling_free(random_signaling_free(seed=7)), gap=1e-9)


def test_signaling_free_precondition():
    with pytest.raises(SolverError):
        solve_signaling_free(nonexistence(EPS))


# -------------------------------------------------------------- layered


def test_layered_decoupled_teams_play_optimal_control():
    spec = decoupled(seed=1)
    sol = solve_layered(spec)
    _check_solution(sol, gap=1e-9)
    payoff = total_payoff(spec, sol.strategies())
    other = random_profile(spec, 4, full=False)
    for i in range(2):
        # the optimum does not depend on the other team's play
        assert best_response(spec, other, i).value == pytest.approx(payoff[i], abs=1e-12)


def test_layered_public_pennies_mix_evenly():
    spec = public_pennies()
    sol = solve_layered(spec)
    _check_solution(sol, gap=1e-9)
    for key in sol.reachable():
        rec = sol.cells[key]
        for k in range(2):
            marg = rec.stage.marginal(k, rec.lam[k])
            for a in range(2):
                assert sum(p for (x, u), p in marg.items() if u == a) == pytest.approx(0.5, abs=1e-9)


def test_layered_precondition_names_the_component():
    with pytest.raises(SolverError, match="Alice"):
        solve_layered(nonexistence(EPS))
    with pytest.raises(SolverError, match="delay"):
        solve_layered(random_game(seed=0, d=2))


@pytest.mark.parametrize("seed", range(3))
def test_layered_random_builtins(seed):
    _check_solution(solve_layered(random_layered(seed=seed)), gap=1e-9)


# ------------------------------------------------------------ certify


def test_certify_nonexistence():
    cert = certify_nonexistence_tiny(nonexistence(EPS))
    assert cert.status == "CERTIFIED_NONE" and cert.stage == 3
    assert len(cert.equilibria) == 1
    assert {v["t"] for v in cert.violations} == {3}


def test_certify_zero_reward_finds_a_measurable_equilibrium():
    spec = zero_reward(T=1)
    cert = certify_nonexistence_tiny(spec)
    assert cert.status == "FOUND"
    assert nash_gap(spec, cert.solution.strategies()).epsilon <= 1e-12
    sol = solve_cib(spec)
    _check_solution(sol, gap=1e-6)


def test_certify_guessing_exceeds_the_default_budget():
    cert = certify_nonexistence_tiny(guessing(), budget=64)
    assert cert.status == "INCONCLUSIVE"
    assert "more than 64 pure strategies" in cert.reason


def test_certify_needs_two_teams():
    assert certify_nonexistence_tiny(single_team(seed=0)).status == "INCONCLUSIVE"
