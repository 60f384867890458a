import numpy as np
import pytest

from schemas.experiment_schema import ExperimentConfig, ExperimentInputs, SyntheticSpec
from schemas.graph_schema import GraphMode
from schemas.ratings_schema import RatingsTable
from schemas.report_schema import Population
from schemas.selection_schema import Method
from services.errors import InvalidInputError
from services.experiment import inputs_from_ratings, inputs_from_synthetic, matrix_digest, run_experiment
from services.report import render_csv, render_json
from tests.conftest import matrix, random_instance

ALL_BUT_OPTIMAL = (Method.max_norm, Method.max_in_degree, Method.user_expectation, Method.ipgs,
                   Method.submodular, Method.hull)


def small_inputs(seed=0, n_items=12, n_users=15, dim=3):
    cfg = ExperimentConfig(seed=seed)
    return inputs_from_synthetic(SyntheticSpec(n_items=n_items, n_users=n_users, dim=dim, clusters=3, seed=seed), cfg)


def small_config(**overrides):
    values = dict(m_grid=(1, 2, 3), methods=ALL_BUT_OPTIMAL + (Method.optimal,), graph_k=3, ef_construction=12,
                  ef_search=12, hull_directions=200)
    values.update(overrides)
    return ExperimentConfig(**values)


def losses(report, population=Population.warm):
    table = {}
    for row in report.rows:
        if row.population == population and row.error is None:
            table.setdefault(row.method, {})[row.m] = row.fav_loss
    return table


def test_report_has_one_row_per_method_m_and_population():
    report = run_experiment(small_config(), small_inputs())
    assert len(report.rows) == 7 * 3 * 2
    assert all(row.error is None for row in report.rows)
    for row in report.rows:
        if row.population == Population.cold:
            assert None not in (row.precision, row.map, row.ndcg)
        else:
            assert (row.precision, row.map, row.ndcg) == (None, None, None)
        assert row.wall_time is None and row.shared_time is None


def test_optimal_lower_bounds_every_method():
    table = losses(run_experiment(small_config(), small_inputs(seed=3)))
    for m in (1, 2, 3):
        for method in ALL_BUT_OPTIMAL:
            assert table["optimal"][m] <= table[method.value][m] + 1e-9


def test_prefix_methods_lose_less_as_m_grows():
    table = losses(run_experiment(small_config(methods=ALL_BUT_OPTIMAL), small_inputs(seed=4)))
    for method, by_m in table.items():
        values = [by_m[m] for m in sorted(by_m)]
        assert values == sorted(values, reverse=True), method


def test_max_norm_over_all_items_loses_nothing():
    inputs = small_inputs(n_items=6)
    report = run_experiment(ExperimentConfig(m_grid=(6,), methods=(Method.max_norm,)), inputs)
    assert [row.fav_loss for row in report.rows] == [0.0, 0.0]


def test_repeated_runs_are_byte_identical():
    cfg = small_config()
    first = run_experiment(cfg, small_inputs(seed=8))
    second = run_experiment(cfg, small_inputs(seed=8))
    assert render_json(first) == render_json(second)
    assert render_csv(first) == render_csv(second)


def test_parallel_methods_match_sequential():
    inputs = small_inputs(seed=5)
    sequential = run_experiment(small_config(), inputs)
    parallel = run_experiment(small_config(parallel_methods=True), inputs, threads=4)
    assert render_csv(sequential) == render_csv(parallel)


def test_budget_failure_only_marks_optimal_rows():
    report = run_experiment(small_config(exhaustive_budget=1), small_inputs())
    for row in report.rows:
        if row.method == "optimal":
            assert row.error.startswith("BudgetExceededError: ")
            assert row.fav_loss is None
        else:
            assert row.error is None and row.fav_loss is not None


def test_graph_failure_only_marks_graph_methods():
    report = run_experiment(small_config(graph_k=50, methods=ALL_BUT_OPTIMAL), small_inputs())
    failed = {row.method for row in report.rows if row.error}
    assert failed == {"max_in_degree", "ipgs"}
    assert all("InvalidInputError" in row.error for row in report.rows if row.error)


def test_exact_search_ipgs_needs_no_graph():
    cfg = small_config(graph_k=50, methods=(Method.ipgs,), exact_search=True)
    report = run_experiment(cfg, small_inputs())
    assert all(row.error is None for row in report.rows)


def test_m_larger_than_catalogue_is_rejected():
    with pytest.raises(InvalidInputError, match="exceed"):
        run_experiment(small_config(m_grid=(2, 40)), small_inputs())


def test_timings_fill_wall_and_shared_time():
    report = run_experiment(small_config(timings=True, methods=(Method.max_norm, Method.max_in_degree)),
                            small_inputs())
    for row in report.rows:
        assert row.wall_time is not None and row.wall_time >= 0.0
        assert (row.shared_time is not None) == (row.method == "max_in_degree")


def test_warm_only_inputs_produce_warm_rows():
    users, items = random_instance(np.random.default_rng(1), n_items=10, n_users=6, dim=2)
    report = run_experiment(small_config(), ExperimentInputs(warm_users=users, items=items))
    assert {row.population for row in report.rows} == {Population.warm}
    assert "cold_users" not in report.provenance.input_digests


def test_provenance_records_digests_and_config():
    cfg = small_config()
    inputs = small_inputs()
    report = run_experiment(cfg, inputs)
    assert report.provenance.config_hash == cfg.config_hash()
    assert report.provenance.input_digests == {
        "cold_users": matrix_digest(inputs.cold_users),
        "items": matrix_digest(inputs.items),
        "warm_users": matrix_digest(inputs.warm_users),
    }
    assert matrix_digest(matrix([[1.0]], ids=["a"])) != matrix_digest(matrix([[1.0]], ids=["b"]))


def test_ratings_pipeline_builds_all_three_matrices():
    rng = np.random.default_rng(0)
    triples = [(f"u{u}", f"i{i}", float(rng.integers(1, 6))) for u in range(20) for i in range(8)
               if (u + i) % 3]
    cfg = ExperimentConfig(dim=2, mf_epochs=3, m_grid=(2,), methods=(Method.max_norm, Method.submodular))
    inputs = inputs_from_ratings(RatingsTable.from_triples(triples), cfg)
    assert (inputs.warm_users.count, inputs.cold_users.count) == (16, 4)
    assert inputs.items.dim == inputs.cold_users.dim == 2
    report = run_experiment(cfg, inputs)
    assert len(report.rows) == 4 and all(row.error is None for row in report.rows)


@pytest.mark.slow
def test_method_ordering_and_cold_warm_agreement():
    methods = (Method.max_norm, Method.max_in_degree, Method.user_expectation, Method.ipgs, Method.submodular)
    cfg = ExperimentConfig(m_grid=(20,), methods=methods, graph_mode=GraphMode.exact, exact_search=True)
    warm_losses = {method.value: [] for method in methods}
    agreements = 0
    for seed in range(20):
        # default generator: 40 tight clusters, more than M, so picks must spread across clusters
        spec = SyntheticSpec(seed=seed)
        inputs = inputs_from_synthetic(spec, cfg.model_copy(update={"seed": seed}))
        assert inputs.warm_users.count == 1000
        report = run_experiment(cfg, inputs)
        warm = {method: by_m[20] for method, by_m in losses(report, Population.warm).items()}
        cold = {method: by_m[20] for method, by_m in losses(report, Population.cold).items()}
        for method, value in warm.items():
            warm_losses[method].append(value)
        agreements += min(warm, key=warm.get) == min(cold, key=cold.get)
    means = {method: np.mean(values) for method, values in warm_losses.items()}
    for method in ("max_norm", "max_in_degree", "user_expectation", "ipgs"):
        assert means["submodular"] <= means[method]
    assert means["ipgs"] <= means["user_expectation"]
    assert agreements >= 16
