import numpy as np
import pytest

from teamgames.beliefs import (
    CCI,
    OFF_PATH,
    InadmissibleError,
    common_beliefs,
    consistent_update,
    exact_common_belief,
    initial_cci,
    off_path_completion,
    private_belief,
    signaling_free_filter,
    signaling_free_update,
)
from teamgames.builtins import guessing, nonexistence, random_game, random_signaling_free
from teamgames.coordinator import initial_spi, point, prescription_space

from games import channel_chain
from oracles.belief_checks import (
    consistent_update_error,
    desk_specs,
    factorization_error,
    private_belief_error,
    random_profile,
)
from profiles import ID, NG, alice_strategy, nonexistence_profile

THIRD = 1.0 / 3.0


def _sums_to_one(dist):
    assert sum(dist.values()) == pytest.approx(1.0, abs=1e-12)


def test_delay_one_belief_is_transition_row():
    spec = random_game(seed=3, T=3, d=1)
    for k in range(spec.n_teams):
        for x in range(spec.n_states(k, 1)):
            for u in spec.joint_actions(1):
                got = private_belief(spec, k, 2, (), (u,), (x, ()))
                row = spec.trans_row(k, 1, x, u)
                assert got == pytest.approx({(j,): p for j, p in enumerate(row) if p > 0})


def test_guessing_window_follows_the_prescription():
    spec = guessing()
    team_u = spec.merge_action(0, 1, [1, 0])  # agent 1 says +1, agent 2 says -1
    s = (0, ((ID, NG),))
    got = private_belief(spec, 0, 2, (0,), ((0, 0), (team_u, 0)), s)
    # id maps x to itself, ng negates: both agents hold +1, and the state is static
    x = spec.merge_state(0, 1, [1, 1])
    assert got == {(x, x): 1.0}


def test_guessing_beliefs_match_enumeration():
    spec = guessing()
    for seed in range(3):
        assert private_belief_error(spec, random_profile(spec, seed, full=True)) <= 1e-10


def test_inconsistent_conditioning_raises():
    spec = guessing()
    const_minus = ((0, 0), (0, 0))
    team_u = spec.merge_action(0, 1, [1, 1])
    with pytest.raises(InadmissibleError):
        private_belief(spec, 0, 2, (0,), ((0, 0), (team_u, 0)), (0, (const_minus,)))
    with pytest.raises(ValueError):
        private_belief(spec, 0, 2, (), ((0, 0),), (0, (const_minus,)))


def _alice_policy(spec, p1, p2):
    strat = alice_strategy(spec, p1, p2)
    return lambda s: strat.dist(1, (), s, None)


def test_nonexistence_posterior_after_minus_one():
    spec = nonexistence(0.1)
    post = consistent_update(spec, 1, initial_cci(spec), 0, _alice_policy(spec, THIRD, THIRD), 0, (0, 0))
    assert post[(0, ())] == pytest.approx(THIRD, abs=1e-12)
    assert post[(1, ())] == pytest.approx(2 * THIRD, abs=1e-12)
    exact = exact_common_belief(spec, nonexistence_profile(spec), (((0, 0), (0, 0)),))
    marg = exact.spi_marginal(0)
    for s, p in post.items():
        assert marg[s] == pytest.approx(p, abs=1e-12)


def test_deterministic_update_is_a_point_mass():
    spec = nonexistence(0.1)
    ident = prescription_space(spec, 0, 1).index([ID])
    post = consistent_update(spec, 1, initial_cci(spec), 0, lambda s: point(ident), 0, (1, 0))
    assert post == {(1, ()): 1.0}


def test_update_without_support_is_off_path():
    spec = nonexistence(0.1)
    always_plus = prescription_space(spec, 0, 1).index([(1, 1)])
    post = consistent_update(spec, 1, initial_cci(spec), 0, lambda s: point(always_plus), 0, (0, 0))
    assert post is OFF_PATH


def test_off_path_completions():
    spec = nonexistence(0.1)
    b = initial_cci(spec)
    uni = off_path_completion("uniform", spec, 1, b, 0, 0, (0, 0))
    assert uni == {(0, ()): 0.5, (1, ()): 0.5}
    bob = off_path_completion("signaling-free", spec, 1, b, 1, 0, (0, 0))
    assert bob == {(0, ()): 1.0}  # Bob's only SPI
    with pytest.raises(ValueError):
        off_path_completion("nearest", spec, 1, b, 0, 0, (0, 0))


def test_signaling_free_completion_agrees_on_path_for_open_loop_play():
    spec = random_signaling_free(seed=4, T=3)
    b = initial_cci(spec)
    for k in range(spec.n_teams):
        space = prescription_space(spec, k, 1)
        const = space.index([(1, 1)])
        for y in range(2):
            u = (1,) * spec.n_teams
            post = consistent_update(spec, 1, b, k, lambda s: point(const), y, u)
            if post is OFF_PATH:
                continue
            sf = off_path_completion("signaling-free", spec, 1, b, k, y, u)
            assert sf == pytest.approx(post, abs=1e-12)
            _sums_to_one(post)


def test_signaling_free_update_channels():
    prior = np.array([0.4, 0.6])
    perfect = channel_chain(1.0)
    kernel = np.array([[0.7, 0.3], [0.3, 0.7]])
    for y in (0, 1):
        np.testing.assert_allclose(signaling_free_update(perfect, 0, 1, prior, y), kernel[y], atol=1e-15)
    blind = channel_chain(0.5)
    np.testing.assert_allclose(signaling_free_update(blind, 0, 1, prior, 1), prior @ kernel, atol=1e-15)
    with pytest.raises(InadmissibleError):
        signaling_free_filter(perfect, 0, 1, np.array([1.0, 0.0]), 1)
    with pytest.raises(ValueError):
        signaling_free_update(perfect, 0, 2, prior, 0)


def test_signaling_free_update_matches_joint_bayes():
    spec = channel_chain(0.8)
    prior = np.array([0.4, 0.6])
    lik = {0: np.array([0.8, 0.2]), 1: np.array([0.2, 0.8])}
    kernel = np.array([[0.7, 0.3], [0.3, 0.7]])
    for y in (0, 1):
        joint = np.zeros((2, 2))  # (x_t, x_{t+1}) jointly with the observed y
        for x in range(2):
            for x2 in range(2):
                joint[x, x2] = prior[x] * lik[y][x] * kernel[x, x2]
        expected = joint.sum(axis=0) / joint.sum()
        np.testing.assert_allclose(signaling_free_update(spec, 0, 1, prior, y), expected, atol=1e-15)


def test_initial_common_belief_is_the_prior():
    spec = nonexistence(0.1)
    cb = exact_common_belief(spec, nonexistence_profile(spec), ())
    assert cb.prob == 1.0
    s0 = initial_spi(spec, 0)
    assert cb.marginal(0) == {(s0, (0,)): 0.5, (s0, (1,)): 0.5}
    assert cb.spi_marginal(1) == {initial_spi(spec, 1): 1.0}


def test_common_belief_after_minus_one():
    spec = nonexistence(0.1)
    cb = exact_common_belief(spec, nonexistence_profile(spec), (((0, 0), (0, 0)),))
    assert cb.spi_marginal(0) == pytest.approx({(0, ()): THIRD, (1, ()): 2 * THIRD}, abs=1e-12)
    assert cb.factorization_error() <= 1e-12


def test_zero_probability_history_is_rejected(tmp_path):
    spec = nonexistence(0.1)
    ident = prescription_space(spec, 0, 1).index([ID])
    profile = [alice_strategy(spec, 1.0, 1.0), nonexistence_profile(spec)[1]]
    assert point(ident) == profile[0].dist(1, (), initial_spi(spec, 0), None)
    trace = tmp_path / "joint.tsv"
    cb = exact_common_belief(spec, profile, (((0, 0), (1, 0)),), trace=str(trace))
    assert cb.spi_marginal(0) == {(1, ()): 1.0}
    assert trace.read_text().startswith("h0\tteam_parts\tprob\n")
    with pytest.raises(InadmissibleError):
        exact_common_belief(spec, profile, (((0, 0), (1, 0)), ((0, 0), (0, 1))))


def test_cci_shapes_and_keys():
    spec = guessing()
    b = initial_cci(spec)
    assert len(b.y_window) == 1 and len(b.u_window) == 2
    nb = b.successor([{(0, ((ID, ID),)): 1.0 - 1e-13, (1, ((ID, ID),)): 1e-13}, b.pi(1)], (0, 0), (3, 0))
    assert nb.t == 2 and nb.u_window == ((0, 0), (3, 0))
    twin = CCI(2, nb.pis[:1] + (((nb.pis[1][0][0], 1.0),),), nb.y_window, nb.u_window)
    assert nb.key() == twin.key()  # rounding drops the 1e-13 mass


DESK = desk_specs(20)


@pytest.mark.parametrize("case", range(20))
def test_beliefs_match_enumeration_on_desk_specs(case):
    spec = DESK[case]
    for seed in range(5):
        assert private_belief_error(spec, random_profile(spec, 100 * case + seed, full=True)) <= 1e-10
    assert consistent_update_error(spec, random_profile(spec, case, full=False)) <= 1e-10
    assert factorization_error(spec, random_profile(spec, case, full=True)) <= 1e-10


def test_common_beliefs_are_probability_vectors():
    spec = DESK[9]
    for t in range(1, spec.horizon + 1):
        for cb in common_beliefs(spec, random_profile(spec, 1, full=True), t).values():
            _sums_to_one(cb.joint)
