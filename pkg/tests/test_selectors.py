import math

import numpy as np
import pytest

from schemas.selection_schema import Method
from services.errors import InvalidInputError
from services.oracle import ProblemContext, coverage_value, exact_top_k, exhaustive_optimal
from services.selectors import select_max_norm, select_submodular_greedy, select_user_expectation
from tests.conftest import matrix, random_instance

GREEDY_RATIO = 1.0 - 1.0 / math.e


def test_max_norm_examples():
    assert select_max_norm(matrix([[3, 0], [0, 2], [1, 1]]), 2).indices == (0, 1)
    assert select_max_norm(matrix([[3, 0], [0, 2], [1, 1]]), 3).indices == (0, 1, 2)
    assert select_max_norm(matrix([[1, 0], [0, 1], [-1, 0]]), 2).indices == (0, 1)


def test_max_norm_rejects_bad_m(toy_items):
    with pytest.raises(InvalidInputError):
        select_max_norm(toy_items, 0)
    with pytest.raises(InvalidInputError):
        select_max_norm(toy_items, 4)


def test_user_expectation_examples(toy_users, toy_items):
    assert select_user_expectation(toy_users, toy_items, 1).indices == (2,)
    single = matrix([[0.2, 0.9]])
    assert select_user_expectation(single, toy_items, 2).indices == exact_top_k((0.2, 0.9), toy_items, 2).item_indices
    symmetric = matrix([[1.0, 0.0], [-1.0, 0.0]])
    result = select_user_expectation(symmetric, toy_items, 2)
    assert result.indices == (0, 1)
    assert result.scores == (0.0, 0.0)


def test_user_expectation_needs_users(toy_items):
    with pytest.raises(InvalidInputError):
        select_user_expectation(matrix(np.zeros((0, 2))), toy_items, 1)


def test_submodular_greedy_examples(toy_users, toy_items):
    first = select_submodular_greedy(toy_users, toy_items, 1)
    assert first.indices == (2,)
    assert first.scores == pytest.approx((1.2,))
    second = select_submodular_greedy(toy_users, toy_items, 2)
    assert second.method == Method.submodular
    assert second.indices == (2, 0)
    assert second.scores == pytest.approx((1.2, 0.4))


def test_single_user_greedy_picks_its_favourite():
    rng = np.random.default_rng(3)
    for _ in range(20):
        users, items = random_instance(rng, n_items=12, n_users=1, dim=4)
        first = select_submodular_greedy(users, items, 1).indices[0]
        assert first == exact_top_k(users.vectors[0], items, 1).item_indices[0]


def test_lazy_greedy_matches_plain_greedy():
    rng = np.random.default_rng(11)
    for trial in range(120):
        users, items = random_instance(rng, n_items=int(rng.integers(2, 40)), n_users=int(rng.integers(1, 25)),
                                       dim=int(rng.integers(1, 6)), non_negative=trial % 2 == 0)
        m = int(rng.integers(1, items.count + 1))
        plain = select_submodular_greedy(users, items, m)
        lazy = select_submodular_greedy(users, items, m, lazy=True)
        assert lazy == plain


def test_lazy_greedy_matches_on_heavy_ties():
    users = matrix([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    items = matrix([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0], [0.5, 0.5]])
    for m in range(1, 6):
        assert select_submodular_greedy(users, items, m, lazy=True) == select_submodular_greedy(users, items, m)


def test_greedy_prefix_property_and_diminishing_gains():
    rng = np.random.default_rng(12)
    users, items = random_instance(rng, n_items=30, n_users=15, dim=5)
    full = select_submodular_greedy(users, items, 12)
    for m in range(1, 12):
        assert select_submodular_greedy(users, items, m).indices == full.indices[:m]
    gains = full.scores[1:]
    assert all(after <= before + 1e-9 for before, after in zip(gains, gains[1:]))


def test_static_rankings_have_prefix_property(toy_users):
    rng = np.random.default_rng(4)
    _, items = random_instance(rng, n_items=25, n_users=1, dim=2)
    assert select_max_norm(items, 5).indices == select_max_norm(items, 10).indices[:5]
    assert (select_user_expectation(toy_users, items, 5).indices
            == select_user_expectation(toy_users, items, 10).indices[:5])


def test_greedy_guarantee_against_exhaustive_optimum():
    rng = np.random.default_rng(20240601)
    for trial in range(200):
        n = int(rng.integers(2, 16))
        m = int(rng.integers(1, min(4, n) + 1))
        users, items = random_instance(rng, n_items=n, n_users=int(rng.integers(1, 21)),
                                       dim=int(rng.integers(1, 5)), non_negative=True)
        context = ProblemContext(users, items)
        greedy = select_submodular_greedy(users, items, m, context=context)
        optimum = exhaustive_optimal(users, items, m, context=context)
        greedy_value = coverage_value(users, items, greedy.indices, context=context)
        assert greedy_value >= GREEDY_RATIO * optimum.coverage - 1e-9, f"trial {trial}"


def test_greedy_guarantee_on_shifted_objective_with_negative_scores():
    # f(Y) - W*c with c the smallest score is normalized, monotone and submodular
    rng = np.random.default_rng(77)
    for _ in range(100):
        n = int(rng.integers(2, 12))
        m = int(rng.integers(1, min(4, n) + 1))
        users, items = random_instance(rng, n_items=n, n_users=int(rng.integers(1, 15)), dim=3)
        context = ProblemContext(users, items)
        shift = users.count * float(context.scores.min())
        greedy = select_submodular_greedy(users, items, m, context=context)
        optimum = exhaustive_optimal(users, items, m, context=context)
        greedy_value = coverage_value(users, items, greedy.indices, context=context) - shift
        assert greedy_value >= GREEDY_RATIO * (optimum.coverage - shift) - 1e-9
