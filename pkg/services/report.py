"""Report serialization (CSV, JSON, per-figure tables) and persistence."""
import csv
import io
import json
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import structlog
from sqlalchemy.orm import Session

import models
from schemas.embedding_schema import EmbeddingMatrix
from schemas.experiment_schema import ExperimentConfig
from schemas.report_schema import EvalReport, NormBucket, NormDiagnostics, Population, Provenance, ReportRow
from services.errors import InvalidInputError

logger = structlog.get_logger(__name__)

PathLike = Union[str, Path]

CSV_COLUMNS = (
    "method", "m", "population", "fav_loss", "fav_loss_per_user", "precision", "map", "ndcg",
    "wall_time", "shared_time", "error", "schema_version",
)
METRIC_COLUMNS = ("precision", "map", "ndcg")


def format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def _csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    return buffer.getvalue()


def render_csv(report: EvalReport) -> str:
    return _csv_text(CSV_COLUMNS, (
        [getattr(row, column) for column in CSV_COLUMNS[:-1]] + [report.schema_version]
        for row in report.rows
    ))


def render_json(report: EvalReport) -> str:
    return report.model_dump_json(indent=2) + "\n"


def parse_json(text: str) -> EvalReport:
    return EvalReport.model_validate_json(text)


def _write(path: Path, text: str) -> None:
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        logger.error("report_write_failed", path=str(path), error=exc.strerror)
        raise OSError(exc.errno, f"cannot write report to {path}: {exc.strerror}") from exc


def emit_report(report: EvalReport, fmt: str, path: PathLike) -> None:
    path = Path(path)
    if fmt == "csv":
        text = render_csv(report)
    elif fmt == "json":
        text = render_json(report)
    else:
        raise InvalidInputError(f"unknown report format {fmt!r}, expected 'csv' or 'json'")
    _write(path, text)
    logger.info("report_written", path=str(path), format=fmt, rows=len(report.rows))


def emit_figure_tables(report: EvalReport, directory: PathLike) -> list[Path]:
    """Long-format tables: fav_loss per method/population/M and cold ranking metrics."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    ok = [row for row in report.rows if not row.error]
    fav_path = directory / "fav_loss.csv"
    _write(fav_path, _csv_text(
        ("method", "population", "m", "fav_loss", "fav_loss_per_user"),
        ((r.method, r.population, r.m, r.fav_loss, r.fav_loss_per_user) for r in ok),
    ))
    metric_path = directory / "ranking_metrics.csv"
    _write(metric_path, _csv_text(
        ("method", "m", "metric", "value"),
        ((r.method, r.m, metric, getattr(r, metric))
         for r in ok if r.population == Population.cold
         for metric in METRIC_COLUMNS),
    ))
    return [fav_path, metric_path]


def emit_diagnostics(items: EmbeddingMatrix, diagnostics: NormDiagnostics,
                     buckets: Optional[list[NormBucket]], directory: PathLike) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    path = directory / "norm_distribution.csv"
    _write(path, _csv_text(("item", "normalized_norm"), zip(items.ids, diagnostics.normalized_norms)))
    written.append(path)
    path = directory / "norm_groups.csv"
    _write(path, _csv_text(("group", "fraction"), diagnostics.group_occupancy.items()))
    written.append(path)
    if buckets is not None:
        path = directory / "norm_vs_ratings.csv"
        _write(path, _csv_text(
            ("high_count", "n_items", "mean", "variance"),
            ((b.high_count, b.n_items, b.mean, b.variance) for b in buckets),
        ))
        written.append(path)
    logger.info("diagnostics_written", directory=str(directory), files=len(written))
    return written


def store_report(db: Session, report: EvalReport, cfg: Optional[ExperimentConfig] = None) -> int:
    provenance = report.provenance or Provenance(config_hash="", seed=0)
    run = models.ExperimentRun(
        config_hash=provenance.config_hash,
        seed=provenance.seed,
        schema_version=report.schema_version,
        config_json=cfg.model_dump_json() if cfg is not None else None,
        input_digests=json.dumps(provenance.input_digests, sort_keys=True),
    )
    run.rows = [
        models.ReportRow(position=position, **row.model_dump(mode="json"))
        for position, row in enumerate(report.rows)
    ]
    db.add(run)
    db.commit()
    db.refresh(run)
    logger.info("report_stored", run_id=run.id, rows=len(report.rows))
    return run.id


def load_report(db: Session, run_id: int) -> Optional[EvalReport]:
    run = db.query(models.ExperimentRun).filter(models.ExperimentRun.id == run_id).first()
    if run is None:
        return None
    return EvalReport(
        schema_version=run.schema_version,
        provenance=Provenance(
            config_hash=run.config_hash,
            seed=run.seed,
            input_digests=json.loads(run.input_digests or "{}"),
        ),
        rows=[ReportRow.model_validate(row) for row in run.rows],
    )


def list_runs(db: Session, skip: int = 0, limit: int = 100) -> list[models.ExperimentRun]:
    return (db.query(models.ExperimentRun)
            .order_by(models.ExperimentRun.id)
            .offset(skip).limit(limit).all())
