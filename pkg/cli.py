"""Command-line entry point.

Exit codes: 0 success, 2 invalid input or configuration, 1 any other failure.
Data goes to stdout or --out files; logs go to stderr.
"""
import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

import structlog
from pydantic import ValidationError

import config
from schemas.embedding_schema import EmbeddingMatrix, SelectionProblem
from schemas.experiment_schema import ExperimentConfig, ExperimentInputs, SyntheticSpec
from schemas.graph_schema import GraphMode, InsertionOrder, ProximityGraph
from schemas.report_schema import Population
from schemas.selection_schema import Method, SelectionResult
from services.errors import BudgetExceededError, InvalidInputError
from services.experiment import inputs_from_ratings, inputs_from_synthetic, run_experiment
from services.factorization import fit_cold_users, train_mf
from services.hull import select_hull
from services.ipgraph import build_approx_ip_graph, build_exact_ip_graph, select_ipgs, select_max_in_degree
from services.metrics import metric_report, norm_distribution, norm_group_occupancy, norm_vs_high_ratings
from services.oracle import select_optimal
from services.ratings import load_ratings
from services.report import emit_diagnostics, emit_figure_tables, emit_report, render_csv, render_json
from services.selectors import select_max_norm, select_submodular_greedy, select_user_expectation
from services.storage import dump_graph, load_graph, read_embedding, write_embedding
from services.synthetic import gen_synthetic

logger = structlog.get_logger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_INVALID = 2


def _write_or_print(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _config_flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def add_config_flags(parser: argparse.ArgumentParser) -> None:
    """One string flag per ExperimentConfig field; pydantic does the parsing."""
    group = parser.add_argument_group("experiment config")
    for name, field in ExperimentConfig.model_fields.items():
        group.add_argument(_config_flag(name), dest=name, default=None,
                           help=f"(default: {field.default})")


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    mapping = config.read_config_file(args.config) if getattr(args, "config", None) else {}
    overrides = {name: getattr(args, name, None) for name in ExperimentConfig.model_fields}
    return ExperimentConfig.from_mapping(mapping, **overrides)


def cmd_gen(args: argparse.Namespace) -> int:
    spec = SyntheticSpec(n_items=args.items, n_users=args.users, dim=args.dim, clusters=args.clusters,
                         center_scale=args.center_scale, cluster_std=args.cluster_std,
                         norm_skew=args.norm_skew, seed=args.seed)
    users, items = gen_synthetic(spec)
    write_embedding(items, args.out_items, binary=args.binary)
    write_embedding(users, args.out_users, binary=args.binary)
    return EXIT_OK


def cmd_mf_train(args: argparse.Namespace) -> int:
    ratings = load_ratings(args.ratings)
    users, items = train_mf(ratings, dim=args.dim, reg=args.reg, epochs=args.epochs, seed=args.seed)
    write_embedding(users, args.out_users, binary=args.binary)
    write_embedding(items, args.out_items, binary=args.binary)
    return EXIT_OK


def cmd_fit_cold(args: argparse.Namespace) -> int:
    ratings = load_ratings(args.ratings)
    items = read_embedding(args.items)
    write_embedding(fit_cold_users(ratings, items, reg=args.reg), args.out, binary=args.binary)
    return EXIT_OK


def _build_graph(items: EmbeddingMatrix, args: argparse.Namespace) -> ProximityGraph:
    if GraphMode(args.mode) == GraphMode.exact:
        return build_exact_ip_graph(items, args.k)
    return build_approx_ip_graph(items, args.k, args.ef_construction,
                                 order=InsertionOrder(args.order), seed=args.seed)


def cmd_graph_build(args: argparse.Namespace) -> int:
    dump_graph(_build_graph(read_embedding(args.items), args), args.out)
    return EXIT_OK


def _users(args: argparse.Namespace) -> EmbeddingMatrix:
    if not args.users:
        raise InvalidInputError(f"--users is required for method {args.method}")
    return read_embedding(args.users)


def _select(args: argparse.Namespace, items: EmbeddingMatrix) -> SelectionResult:
    method = Method(args.method)
    if method == Method.max_norm:
        return select_max_norm(items, args.m)
    users = _users(args) if method != Method.max_in_degree else None
    if users is not None:
        SelectionProblem(items=items, users=users, m=args.m)
    graph = None
    if method == Method.max_in_degree or (method == Method.ipgs and not args.exact_search):
        graph = load_graph(args.graph) if args.graph else _build_graph(items, args)
    if method == Method.max_in_degree:
        return select_max_in_degree(items, args.m, graph)
    if method == Method.user_expectation:
        return select_user_expectation(users, items, args.m)
    if method == Method.ipgs:
        return select_ipgs(users, items, args.m, graph, args.ef_search, exact_search=args.exact_search)
    if method == Method.submodular:
        return select_submodular_greedy(users, items, args.m, lazy=args.lazy)
    if method == Method.hull:
        return select_hull(users, items, args.m, num_directions=args.hull_directions, seed=args.seed,
                           lazy=args.lazy)
    return select_optimal(users, items, args.m, budget=args.budget)


def cmd_select(args: argparse.Namespace) -> int:
    result = _select(args, read_embedding(args.items))
    lines = [f"{rank}\t{item}\t{score:.6g}"
             for rank, (item, score) in enumerate(zip(result.ranked_ids, result.scores), start=1)]
    _write_or_print("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def _read_ranking(path: str, items: EmbeddingMatrix) -> SelectionResult:
    index = items.id_index()
    ranked = []
    for number, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        fields = line.split()
        if not fields:
            continue
        # accepts bare ids or the `rank id score` lines written by `select`
        external = fields[1] if len(fields) == 3 else fields[0]
        if external not in index:
            raise InvalidInputError(f"{path}:{number}: unknown item {external!r}")
        ranked.append(external)
    indices = tuple(index[e] for e in ranked)
    # evaluation never reads the scores of a file ranking
    return SelectionResult(method=Method.external, indices=indices, ranked_ids=tuple(ranked),
                           scores=tuple(0.0 for _ in ranked), m=len(ranked))


def cmd_evaluate(args: argparse.Namespace) -> int:
    items = read_embedding(args.items)
    users = read_embedding(args.users)
    ranking = _read_ranking(args.ranking, items)
    m = args.m or ranking.m
    report = metric_report(users, items, ranking, m, population=Population(args.population),
                           label=args.label or Path(args.ranking).stem)
    _write_or_print(report.model_dump_json(indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_diagnose(args: argparse.Namespace) -> int:
    items = read_embedding(args.items)
    diagnostics = norm_distribution(items)
    if args.users:
        users = read_embedding(args.users)
        occupancy = norm_group_occupancy(users, items, min(args.k, items.count))
        diagnostics = diagnostics.model_copy(update={"group_occupancy": occupancy})
    buckets = None
    if args.ratings:
        ratings = load_ratings(args.ratings).restrict_items(items.ids)
        buckets = norm_vs_high_ratings(items, ratings, high_threshold=args.high_threshold)
    if args.out_dir:
        emit_diagnostics(items, diagnostics, buckets, args.out_dir)
    summary = {"median": diagnostics.median, "group_occupancy": diagnostics.group_occupancy}
    sys.stdout.write(json.dumps(summary, indent=2) + "\n")
    return EXIT_OK


def _run_inputs(args: argparse.Namespace, cfg: ExperimentConfig) -> ExperimentInputs:
    if args.ratings:
        return inputs_from_ratings(load_ratings(args.ratings), cfg)
    if args.items and args.users:
        cold = read_embedding(args.cold_users) if args.cold_users else None
        return ExperimentInputs(warm_users=read_embedding(args.users), items=read_embedding(args.items),
                                cold_users=cold)
    if args.items or args.users:
        raise InvalidInputError("--items and --users must be given together")
    spec = SyntheticSpec(n_items=args.synthetic_items, n_users=args.synthetic_users, dim=cfg.dim,
                         clusters=args.clusters, norm_skew=args.norm_skew, seed=cfg.seed)
    return inputs_from_synthetic(spec, cfg)


def cmd_run(args: argparse.Namespace) -> int:
    cfg = load_config(args)
    report = run_experiment(cfg, _run_inputs(args, cfg))
    if args.out:
        emit_report(report, args.format, args.out)
    else:
        sys.stdout.write(render_csv(report) if args.format == "csv" else render_json(report))
    if args.figures:
        emit_figure_tables(report, args.figures)
    if args.store:
        from database import SessionLocal, engine
        import models
        from services.report import store_report

        models.Base.metadata.create_all(bind=engine)
        with SessionLocal() as db:
            run_id = store_report(db, report, cfg)
        logger.info("run_stored", run_id=run_id)
    return EXIT_OK


def _add_graph_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--k", type=int, default=10)
    parser.add_argument("--mode", choices=[m.value for m in GraphMode], default=GraphMode.approximate.value)
    parser.add_argument("--ef-construction", type=int, default=200)
    parser.add_argument("--order", choices=[o.value for o in InsertionOrder], default=InsertionOrder.norm.value)
    parser.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="itemsel", description="Cold-start item subset selection")
    parser.add_argument("--log-level", default=config.LOG_LEVEL)
    parser.add_argument("--log-json", action="store_true", default=config.LOG_JSON)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate synthetic user and item embeddings")
    p.add_argument("--items", type=int, default=2000)
    p.add_argument("--users", type=int, default=1250)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--clusters", type=int, default=40)
    p.add_argument("--center-scale", type=float, default=1.0)
    p.add_argument("--cluster-std", type=float, default=0.3)
    p.add_argument("--norm-skew", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-items", required=True)
    p.add_argument("--out-users", required=True)
    p.add_argument("--binary", action="store_true")
    p.set_defaults(handler=cmd_gen)

    p = sub.add_parser("mf-train", help="train ALS embeddings from ratings")
    p.add_argument("--ratings", required=True)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--reg", type=float, default=0.1)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-users", required=True)
    p.add_argument("--out-items", required=True)
    p.add_argument("--binary", action="store_true")
    p.set_defaults(handler=cmd_mf_train)

    p = sub.add_parser("fit-cold", help="ridge-fit cold users against fixed item vectors")
    p.add_argument("--ratings", required=True)
    p.add_argument("--items", required=True)
    p.add_argument("--reg", type=float, default=0.1)
    p.add_argument("--out", required=True)
    p.add_argument("--binary", action="store_true")
    p.set_defaults(handler=cmd_fit_cold)

    p = sub.add_parser("graph-build", help="build an inner-product proximity graph")
    p.add_argument("--items", required=True)
    _add_graph_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_graph_build)

    p = sub.add_parser("select", help="select M items with one method")
    p.add_argument("--items", required=True)
    p.add_argument("--users")
    p.add_argument("--method", choices=[m.value for m in Method if m != Method.external], required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--graph")
    _add_graph_flags(p)
    p.add_argument("--ef-search", type=int, default=200)
    p.add_argument("--exact-search", action="store_true")
    p.add_argument("--lazy", action="store_true")
    p.add_argument("--hull-directions", type=int, default=1000)
    p.add_argument("--budget", type=int, default=2_000_000)
    p.add_argument("--out")
    p.set_defaults(handler=cmd_select)

    p = sub.add_parser("evaluate", help="fav_loss and ranking metrics of a ranking file")
    p.add_argument("--items", required=True)
    p.add_argument("--users", required=True)
    p.add_argument("--ranking", required=True)
    p.add_argument("--m", type=int)
    p.add_argument("--population", choices=[pop.value for pop in Population], default=Population.cold.value)
    p.add_argument("--label", help="method name to report (defaults to the ranking file stem)")
    p.add_argument("--out")
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("diagnose", help="norm-bias diagnostics")
    p.add_argument("--items", required=True)
    p.add_argument("--users")
    p.add_argument("--ratings")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--high-threshold", type=float, default=5.0)
    p.add_argument("--out-dir")
    p.set_defaults(handler=cmd_diagnose)

    p = sub.add_parser("run", help="full pipeline: select, evaluate, report")
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--ratings")
    p.add_argument("--items")
    p.add_argument("--users", help="warm user embeddings")
    p.add_argument("--cold-users")
    p.add_argument("--synthetic-items", type=int, default=2000)
    p.add_argument("--synthetic-users", type=int, default=1250)
    p.add_argument("--clusters", type=int, default=40)
    p.add_argument("--norm-skew", type=float, default=0.0)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--out")
    p.add_argument("--figures", help="directory for per-figure long-format CSVs")
    p.add_argument("--store", action="store_true", help="persist the report to the database")
    add_config_flags(p)
    p.set_defaults(handler=cmd_run)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    config.configure_logging(args.log_level.upper(), args.log_json)
    try:
        return args.handler(args)
    except (InvalidInputError, ValidationError, BudgetExceededError, FileNotFoundError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INVALID
    except Exception as exc:
        logger.error("command_failed", command=args.command, error=str(exc), exc_info=True)
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
