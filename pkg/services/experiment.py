"""End-to-end experiment: select on warm users, evaluate on warm and cold users.

Every selector except the exhaustive optimum has the prefix property, so each
runs once at the largest M of the grid and shorter rankings are its heads.
"""
import hashlib
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Optional

import structlog
from pydantic import ValidationError

import config
from schemas.embedding_schema import EmbeddingMatrix, SelectionProblem
from schemas.experiment_schema import ExperimentConfig, ExperimentInputs, SyntheticSpec
from schemas.graph_schema import GraphMode, ProximityGraph
from schemas.ratings_schema import RatingsTable
from schemas.report_schema import REPORT_SCHEMA_VERSION, EvalReport, Population, Provenance, ReportRow
from schemas.selection_schema import Method, SelectionResult
from services.errors import InvalidInputError
from services.factorization import fit_cold_users, train_mf
from services.hull import select_hull
from services.ipgraph import build_approx_ip_graph, build_exact_ip_graph, select_ipgs, select_max_in_degree
from services.metrics import ranking_scores
from services.oracle import ProblemContext, fav_loss, select_optimal
from services.ratings import split_embedding, split_users
from services.selectors import select_max_norm, select_submodular_greedy, select_user_expectation
from services.synthetic import gen_synthetic

logger = structlog.get_logger(__name__)


def matrix_digest(matrix: EmbeddingMatrix) -> str:
    digest = hashlib.sha256()
    digest.update("\n".join(matrix.ids).encode("utf-8"))
    digest.update(matrix.vectors.astype("<f8").tobytes())
    return digest.hexdigest()


def inputs_from_synthetic(spec: SyntheticSpec, cfg: ExperimentConfig) -> ExperimentInputs:
    users, items = gen_synthetic(spec)
    warm, cold = split_embedding(users, cfg.split_ratio, cfg.seed)
    return ExperimentInputs(warm_users=warm, items=items, cold_users=cold)


def inputs_from_ratings(ratings: RatingsTable, cfg: ExperimentConfig) -> ExperimentInputs:
    """Splits users, trains ALS on the warm part and ridge-fits the cold part.

    Cold ratings on items the warm users never rated are dropped, those items
    have no vector.
    """
    warm_ratings, cold_ratings = split_users(ratings, cfg.split_ratio, cfg.seed)
    warm, items = train_mf(warm_ratings, dim=cfg.dim, reg=cfg.mf_reg, epochs=cfg.mf_epochs, seed=cfg.seed)
    cold = fit_cold_users(cold_ratings.restrict_items(items.ids), items, reg=cfg.cold_reg)
    return ExperimentInputs(warm_users=warm, items=items, cold_users=cold)


class _Clock:
    """Monotonic wall time, or nothing at all when timings are off."""

    def __init__(self, enabled: bool):
        self.enabled = enabled

    def measure(self, fn: Callable[[], object]) -> tuple[object, Optional[float]]:
        start = time.perf_counter()
        value = fn()
        return value, (time.perf_counter() - start) if self.enabled else None


class _Outcome:
    def __init__(self, method: Method):
        self.method = method
        self.rankings: dict[int, SelectionResult] = {}
        self.errors: dict[int, str] = {}
        self.wall_time: Optional[float] = None
        self.shared_time: Optional[float] = None


def _error_text(exc: BaseException) -> str:
    return f"{type(exc).__name__}: {exc}"


class ExperimentRunner:
    def __init__(self, cfg: ExperimentConfig, inputs: ExperimentInputs, threads: int = config.THREADS):
        self.cfg = cfg
        self.inputs = inputs
        self.threads = threads
        self.clock = _Clock(cfg.timings)
        self.warm = ProblemContext(inputs.warm_users, inputs.items)
        cold = inputs.cold_users
        self.cold = ProblemContext(cold, inputs.items) if cold is not None and cold.count else None
        self.graph: Optional[ProximityGraph] = None
        self.graph_error: Optional[str] = None
        self.graph_time: Optional[float] = None

    def _check(self) -> None:
        n = self.inputs.items.count
        too_large = [m for m in self.cfg.m_grid if m > n]
        if too_large:
            raise InvalidInputError(f"m_grid values {too_large} exceed the {n} available items")
        if self.inputs.warm_users.count < 1:
            raise InvalidInputError("at least one warm user is required")
        try:
            SelectionProblem(items=self.inputs.items, users=self.inputs.warm_users, m=self.cfg.m_grid[-1])
        except ValidationError as exc:
            raise InvalidInputError(f"invalid selection problem: {exc}") from exc

    def _uses_graph(self, method: Method) -> bool:
        return method == Method.max_in_degree or (method == Method.ipgs and not self.cfg.exact_search)

    def _needs_graph(self) -> bool:
        return any(self._uses_graph(method) for method in self.cfg.methods)

    def _build_graph(self) -> None:
        cfg, items = self.cfg, self.inputs.items
        try:
            if cfg.graph_mode == GraphMode.exact:
                build = lambda: build_exact_ip_graph(items, cfg.graph_k)  # noqa: E731
            else:
                build = lambda: build_approx_ip_graph(  # noqa: E731
                    items, cfg.graph_k, cfg.ef_construction, order=cfg.insertion_order, seed=cfg.seed)
            self.graph, self.graph_time = self.clock.measure(build)
        except Exception as exc:
            logger.error("graph_build_failed", error=_error_text(exc), exc_info=True)
            self.graph_error = _error_text(exc)

    def _select(self, method: Method, m: int) -> SelectionResult:
        cfg, users, items = self.cfg, self.inputs.warm_users, self.inputs.items
        if self._uses_graph(method) and self.graph is None:
            raise InvalidInputError(f"proximity graph unavailable: {self.graph_error}")
        if method == Method.max_norm:
            return select_max_norm(items, m)
        if method == Method.max_in_degree:
            return select_max_in_degree(items, m, self.graph)
        if method == Method.user_expectation:
            return select_user_expectation(users, items, m)
        if method == Method.ipgs:
            return select_ipgs(users, items, m, self.graph, cfg.ef_search,
                               exact_search=cfg.exact_search, threads=self.threads)
        if method == Method.submodular:
            return select_submodular_greedy(users, items, m, lazy=cfg.lazy_greedy, context=self.warm)
        if method == Method.hull:
            return select_hull(users, items, m, num_directions=cfg.hull_directions, seed=cfg.seed,
                               lazy=cfg.lazy_greedy, context=self.warm)
        return select_optimal(users, items, m, budget=cfg.exhaustive_budget, context=self.warm)

    def _run_method(self, method: Method) -> _Outcome:
        outcome = _Outcome(method)
        outcome.shared_time = self.graph_time if self._uses_graph(method) else None
        grid = self.cfg.m_grid
        if method == Method.optimal:
            elapsed = 0.0
            for m in grid:
                try:
                    ranking, spent = self.clock.measure(lambda: self._select(method, m))
                    outcome.rankings[m] = ranking
                    elapsed += spent or 0.0
                except Exception as exc:
                    logger.warning("optimal_skipped", m=m, error=_error_text(exc))
                    outcome.errors[m] = _error_text(exc)
            outcome.wall_time = elapsed if self.cfg.timings else None
            return outcome
        try:
            ranking, outcome.wall_time = self.clock.measure(lambda: self._select(method, grid[-1]))
        except Exception as exc:
            logger.error("method_failed", method=method.value, error=_error_text(exc), exc_info=True)
            outcome.errors = {m: _error_text(exc) for m in grid}
            return outcome
        outcome.rankings = {m: ranking.head(m) for m in grid}
        return outcome

    def _rows(self, outcome: _Outcome) -> list[ReportRow]:
        rows = []
        populations = [(Population.warm, self.warm)]
        if self.cold is not None:
            populations.append((Population.cold, self.cold))
        for m in self.cfg.m_grid:
            for population, context in populations:
                base = dict(method=outcome.method.value, m=m, population=population,
                            wall_time=outcome.wall_time, shared_time=outcome.shared_time)
                if m in outcome.errors:
                    rows.append(ReportRow(**base, error=outcome.errors[m]))
                    continue
                ranking = outcome.rankings[m]
                loss = fav_loss(context.users, context.items, ranking, context=context)
                values = dict(fav_loss=loss, fav_loss_per_user=loss / context.users.count)
                if population == Population.cold:
                    scores = ranking_scores(context.users, context.items, ranking, m, scores=context.scores)
                    values.update(precision=scores.precision, map=scores.map, ndcg=scores.ndcg)
                rows.append(ReportRow(**base, **values))
            logger.info("selection_evaluated", method=outcome.method.value, m=m,
                        failed=m in outcome.errors)
        return rows

    def provenance(self) -> Provenance:
        digests = {"warm_users": matrix_digest(self.inputs.warm_users), "items": matrix_digest(self.inputs.items)}
        if self.inputs.cold_users is not None:
            digests["cold_users"] = matrix_digest(self.inputs.cold_users)
        digests.update(self.inputs.extra_digests)
        return Provenance(config_hash=self.cfg.config_hash(), seed=self.cfg.seed,
                          input_digests=dict(sorted(digests.items())))

    def run(self) -> EvalReport:
        self._check()
        if self._needs_graph():
            self._build_graph()
        methods = list(self.cfg.methods)
        if self.cfg.parallel_methods and len(methods) > 1:
            with ThreadPoolExecutor(max_workers=min(self.threads, len(methods))) as pool:
                # map keeps method order
                outcomes = list(pool.map(self._run_method, methods))
        else:
            outcomes = [self._run_method(method) for method in methods]
        rows = [row for outcome in outcomes for row in self._rows(outcome)]
        return EvalReport(schema_version=REPORT_SCHEMA_VERSION, provenance=self.provenance(), rows=rows)


def run_experiment(cfg: ExperimentConfig, inputs: ExperimentInputs,
                   threads: int = config.THREADS) -> EvalReport:
    report = ExperimentRunner(cfg, inputs, threads=threads).run()
    failed = sum(1 for row in report.rows if row.error)
    logger.info("experiment_finished", rows=len(report.rows), failed_rows=failed,
                config_hash=report.provenance.config_hash)
    return report
