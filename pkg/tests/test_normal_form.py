import itertools

import numpy as np
import pytest

from teamgames.coordinator import BudgetExceeded
from teamgames.normal_form import all_equilibria, first_equilibrium, regret, solve_normal_form, support_pairs_count


def _indifferent_mix(P, I, J):
    """Mix on I (square supports) equalizing the opponent's payoffs over J; None if not a proper mix."""
    k = len(I)
    M = np.zeros((k + 1, k + 1))
    M[:k, :k] = P[np.ix_(I, J)].T
    M[:k, k] = -1.0
    M[k, :k] = 1.0
    rhs = np.zeros(k + 1)
    rhs[k] = 1.0
    try:
        sol = np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError:
        return None
    if (sol[:k] <= 1e-12).any():
        return None
    x = np.zeros(P.shape[0])
    x[list(I)] = sol[:k]
    return x


def _brute_force(A, B):
    """Equal-size support enumeration for nondegenerate bimatrix games."""
    m, n = A.shape
    out = []
    for k in range(1, min(m, n) + 1):
        for I in itertools.combinations(range(m), k):
            for J in itertools.combinations(range(n), k):
                x = _indifferent_mix(B, I, J)
                y = _indifferent_mix(A.T, J, I)
                if x is None or y is None:
                    continue
                if regret(A, B, x, y) <= 1e-9:
                    out.append((x, y))
    return out


def test_matching_pennies_unique_mixed():
    A = np.array([[1.0, -1.0], [-1.0, 1.0]])
    eqs = all_equilibria(A, -A)
    assert len(eqs) == 1
    np.testing.assert_allclose(eqs[0].x, [0.5, 0.5], atol=1e-12)
    np.testing.assert_allclose(eqs[0].y, [0.5, 0.5], atol=1e-12)
    assert eqs[0].isolated and eqs[0].payoffs == pytest.approx((0.0, 0.0), abs=1e-12)


def test_zero_sum_two_by_two_value():
    A = np.array([[2.0, -1.0], [-1.0, 1.0]])
    (eq,) = all_equilibria(A, -A)
    np.testing.assert_allclose(eq.x, [0.4, 0.6], atol=1e-12)
    np.testing.assert_allclose(eq.y, [0.4, 0.6], atol=1e-12)
    assert eq.payoffs[0] == pytest.approx(0.2, abs=1e-12)


def test_all_zero_game_reports_every_support_pair():
    Z = np.zeros((2, 2))
    eqs = all_equilibria(Z, Z)
    assert len(eqs) == 9
    assert sum(e.isolated for e in eqs) == 4  # only pure pairs pin a single point
    for e in eqs:
        assert regret(Z, Z, e.x, e.y) == 0.0
        assert set(np.flatnonzero(e.x)) == set(e.support[0])
        assert set(np.flatnonzero(e.y)) == set(e.support[1])


@pytest.mark.parametrize("seed", range(8))
def test_random_games_match_brute_force(seed):
    rng = np.random.default_rng(seed)
    m, n = 3, 3
    A, B = rng.normal(size=(m, n)), rng.normal(size=(m, n))
    eqs = all_equilibria(A, B)
    oracle = _brute_force(A, B)
    assert len(eqs) == len(oracle)
    assert len(eqs) % 2 == 1  # nondegenerate games have an odd count
    for e in eqs:
        assert regret(A, B, e.x, e.y) <= 1e-9
        assert any(np.allclose(e.x, x, atol=1e-9) and np.allclose(e.y, y, atol=1e-9) for x, y in oracle)


def test_first_equilibrium_prefers_pure_points():
    A = np.array([[3.0, 0.0], [0.0, 1.0]])
    eq = first_equilibrium(A, A)
    np.testing.assert_array_equal(eq.x, [1.0, 0.0])
    np.testing.assert_array_equal(eq.y, [1.0, 0.0])


def test_support_budget():
    assert support_pairs_count(3, 2) == 21
    with pytest.raises(BudgetExceeded):
        all_equilibria(np.zeros((30, 30)), np.zeros((30, 30)))


def test_solve_normal_form_by_player_count():
    (x,) = solve_normal_form([np.array([0.1, 0.7, 0.7])])
    np.testing.assert_array_equal(x, [0, 1, 0])
    A = np.array([[1.0, -1.0], [-1.0, 1.0]])
    x, y = solve_normal_form([A, -A])
    np.testing.assert_allclose([x, y], [[0.5, 0.5]] * 2, atol=1e-12)
    rng = np.random.default_rng(3)
    pays = [rng.normal(size=(2, 2, 2)) for _ in range(3)]
    mixes = solve_normal_form(pays, rng)
    assert mixes is not None
    for i in range(3):
        v = np.moveaxis(pays[i], i, 0)
        for j in reversed([j for j in range(3) if j != i]):
            v = v @ mixes[j]
        assert v.max() - v @ mixes[i] <= 1e-9


def test_cyclic_three_player_game_reports_failure():
    # each player wants to match the next one, the last wants to mismatch the first;
    # the only equilibrium is fully mixed and averaged replies cycle around it
    pays = [np.zeros((2, 2, 2)) for _ in range(3)]
    for a, b, c in itertools.product(range(2), repeat=3):
        pays[0][a, b, c] = 1.0 if a == b else -1.0
        pays[1][a, b, c] = 1.0 if b == c else -1.0
        pays[2][a, b, c] = 1.0 if c != a else -1.0
    assert solve_normal_form(pays, np.random.default_rng(0), iters=500) is None
