import math

import numpy as np
import pytest
from pydantic import ValidationError

from schemas.ratings_schema import RatingsTable
from schemas.report_schema import NormDiagnostics, Population
from schemas.selection_schema import Method, SelectionResult
from services.errors import InvalidInputError
from services.metrics import (
    ap_at_m, map_at_m, ndcg_at_m, norm_distribution, norm_group_occupancy, norm_groups, norm_vs_high_ratings,
    metric_report, precision_at_m, ranking_scores,
)
from services.oracle import exact_top_k
from services.selectors import select_max_norm, select_submodular_greedy
from tests.conftest import matrix, random_instance

# user (1, 0): Top(u, 2) = {0, 1}; items 2 and 3 are misses
ITEMS = [[1.0, 0.0], [0.8, 0.0], [0.0, 1.0], [-1.0, 0.0]]
U = (1.0, 0.0)


def ranking(items, indices):
    return SelectionResult(method=Method.external, indices=tuple(indices),
                           ranked_ids=tuple(items.ids[i] for i in indices),
                           scores=tuple(0.0 for _ in indices), m=len(indices))


@pytest.fixture
def items():
    return matrix(ITEMS)


def test_perfect_rankings_score_one(items):
    for order in ([0, 1], [1, 0]):
        assert precision_at_m(U, items, ranking(items, order), 2) == 1.0
    exact = ranking(items, [0, 1])
    assert ap_at_m(U, items, exact, 2) == 1.0
    assert ndcg_at_m(U, items, exact, 2) == 1.0


def test_worked_metric_values(items):
    hit_miss = ranking(items, [0, 2])
    miss_hit = ranking(items, [2, 0])
    assert precision_at_m(U, items, hit_miss, 2) == 0.5
    assert ap_at_m(U, items, hit_miss, 2) == pytest.approx(0.5, abs=1e-6)
    assert ap_at_m(U, items, miss_hit, 2) == pytest.approx(0.25, abs=1e-6)
    expected = (1 / math.log2(3)) / (1 + 1 / math.log2(3))
    assert ndcg_at_m(U, items, miss_hit, 2) == pytest.approx(expected, abs=1e-12)
    assert ndcg_at_m(U, items, miss_hit, 2) == pytest.approx(0.3869, abs=1e-4)


def test_all_misses_score_zero(items):
    misses = ranking(items, [2, 3])
    assert precision_at_m(U, items, misses, 2) == 0.0
    assert ap_at_m(U, items, misses, 2) == 0.0
    assert ndcg_at_m(U, items, misses, 2) == 0.0


def test_short_ranking_is_rejected(items):
    with pytest.raises(InvalidInputError):
        precision_at_m(U, items, ranking(items, [0]), 2)


def test_precision_is_order_free_but_ap_and_ndcg_are_not():
    rng = np.random.default_rng(3)
    users, items = random_instance(rng, n_items=20, n_users=1, dim=3)
    u = users.vectors[0]
    top = list(exact_top_k(u, items, 4).item_indices)
    mixed = [top[0], top[1]] + [i for i in range(items.count) if i not in top][:2]
    swapped = [mixed[2], mixed[1], mixed[0], mixed[3]]
    assert precision_at_m(u, items, ranking(items, mixed), 4) == precision_at_m(u, items, ranking(items, swapped), 4)
    assert ap_at_m(u, items, ranking(items, mixed), 4) > ap_at_m(u, items, ranking(items, swapped), 4)
    assert ndcg_at_m(u, items, ranking(items, mixed), 4) > ndcg_at_m(u, items, ranking(items, swapped), 4)


def test_population_metrics_average_per_user_values():
    rng = np.random.default_rng(10)
    users, items = random_instance(rng, n_items=30, n_users=12, dim=4)
    for result in (select_max_norm(items, 8), select_submodular_greedy(users, items, 8)):
        scores = ranking_scores(users, items, result, 8)
        per_user = [(precision_at_m(u, items, result, 8), ap_at_m(u, items, result, 8), ndcg_at_m(u, items, result, 8))
                    for u in users.vectors]
        means = np.mean(per_user, axis=0)
        assert scores.precision == pytest.approx(means[0], abs=1e-12)
        assert scores.map == pytest.approx(means[1], abs=1e-12)
        assert map_at_m(users, items, result, 8) == pytest.approx(means[1], abs=1e-12)
        assert scores.ndcg == pytest.approx(means[2], abs=1e-12)
        assert all(0.0 <= v <= 1.0 for v in scores)


def test_norm_distribution_examples():
    equal = norm_distribution(matrix([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]]))
    assert equal.median == 1.0
    scaled = norm_distribution(matrix([[1.0, 0.0], [0.0, 2.0], [4.0, 0.0]]))
    assert scaled.normalized_norms == (0.25, 0.5, 1.0)
    assert scaled.median == 0.5
    even = norm_distribution(matrix([[1.0], [2.0], [3.0], [4.0]]))
    assert even.median == 0.5
    with pytest.raises(InvalidInputError):
        norm_distribution(matrix([[0.0, 0.0]]))


def test_norm_diagnostics_range_check():
    with pytest.raises(ValidationError):
        NormDiagnostics(normalized_norms=(1.2,), median=1.2)


def test_norm_groups_use_ceiling_cut_points():
    items = matrix([[float(v)] for v in range(1, 11)])
    groups = dict(norm_groups(items, (0.1, 0.25, 1.0)))
    assert list(groups) == ["0%-10%", "10%-25%", "25%-100%"]
    assert groups["0%-10%"].tolist() == [9]
    assert groups["10%-25%"].tolist() == [8, 7]
    assert len(groups["25%-100%"]) == 7
    with pytest.raises(InvalidInputError):
        norm_groups(items, (0.5, 0.2))


def test_occupancy_with_single_user_and_full_k_matches_group_sizes():
    rng = np.random.default_rng(6)
    users, items = random_instance(rng, n_items=40, n_users=1, dim=3)
    edges = (0.1, 0.25, 0.5, 1.0)
    occupancy = norm_group_occupancy(users, items, items.count, edges)
    sizes = {label: len(members) / items.count for label, members in norm_groups(items, edges)}
    assert occupancy == pytest.approx(sizes, abs=1e-12)
    assert sum(occupancy.values()) == pytest.approx(1.0, abs=1e-9)


def test_giant_norm_item_takes_the_whole_pool():
    items = matrix([[100.0, 100.0]] + [[float(i % 3) * 0.1, 0.2] for i in range(99)])
    users = matrix(np.abs(np.random.default_rng(1).standard_normal((25, 2))))
    occupancy = norm_group_occupancy(users, items, 1, (0.01, 1.0))
    assert occupancy == {"0%-1%": 1.0, "1%-100%": 0.0}


def test_norm_vs_high_ratings_examples():
    items = matrix([[1.0, 0.0], [0.0, 2.0]], ids=["a", "b"])
    ratings = RatingsTable.from_triples([
        ("u1", "a", 3.0), ("u1", "b", 5.0), ("u2", "b", 5.0), ("u3", "b", 5.0), ("u3", "a", 4.5),
    ])
    buckets = norm_vs_high_ratings(items, ratings)
    assert [(b.high_count, b.n_items, b.mean, b.variance) for b in buckets] == [(0, 1, 1.0, 0.0), (3, 1, 2.0, 0.0)]
    low = RatingsTable.from_triples([("u1", "a", 1.0), ("u2", "b", 2.0)])
    (only,) = norm_vs_high_ratings(items, low)
    assert (only.high_count, only.n_items, only.mean, only.variance) == (0, 2, 1.5, 0.25)


def test_norm_grows_with_popularity_on_constructed_data():
    norms = np.arange(1, 7, dtype=np.float64)
    items = matrix(np.column_stack([norms, np.zeros(6)]), ids=[f"i{k}" for k in range(6)])
    triples = [(f"u{u}", f"i{k}", 5.0) for k in range(6) for u in range(k)]
    buckets = norm_vs_high_ratings(items, RatingsTable.from_triples(triples))
    means = [b.mean for b in buckets]
    assert means == sorted(means) and len(means) == 6


def test_metric_report_bundles_scores_and_loss(items):
    users = matrix([[1.0, 0.0]])
    report = metric_report(users, items, ranking(items, [2, 0, 1]), 2, population=Population.warm, label="file")
    assert (report.method, report.m, report.population) == ("file", 2, Population.warm)
    assert report.precision == 0.5
    assert report.ndcg == pytest.approx(0.3869, abs=1e-4)
    assert report.fav_loss_value == 0.0
    assert metric_report(users, items, ranking(items, [3, 2]), 2).fav_loss_value == 1.0
