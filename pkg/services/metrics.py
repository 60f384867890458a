"""Ranking metrics against each user's exact top-M, and norm-bias diagnostics.

Relevance is membership in Top(u, M), the user's M largest inner products
(ties by ascending index). Metrics only look at the ranked ids, never at how a
selector produced them.
"""
import math
from typing import NamedTuple, Optional, Sequence

import numpy as np

from schemas.embedding_schema import EmbeddingMatrix
from schemas.ratings_schema import RatingsTable
from schemas.report_schema import MetricReport, NormBucket, NormDiagnostics, Population
from schemas.selection_schema import SelectionResult
from services.errors import InvalidInputError
from services.numerics import rank_descending, row_norms, score_matrix, top_k_rows
from services.oracle import exact_top_k, fav_loss

DEFAULT_PERCENTILE_EDGES = (0.001, 0.01, 0.05, 0.1, 0.25, 0.5, 1.0)


class RankingScores(NamedTuple):
    precision: float
    map: float
    ndcg: float


def _ranked_prefix(y: SelectionResult, m: int) -> np.ndarray:
    if m < 1:
        raise InvalidInputError(f"m must be positive, got {m}")
    if len(y.indices) < m:
        raise InvalidInputError(f"ranking has {len(y.indices)} items, fewer than m={m}")
    return np.asarray(y.indices[:m], dtype=np.int64)


def _hits(u, items: EmbeddingMatrix, y: SelectionResult, m: int) -> np.ndarray:
    prefix = _ranked_prefix(y, m)
    top = exact_top_k(u, items, m).item_indices
    return np.isin(prefix, top).astype(np.float64)


def ideal_dcg(m: int) -> float:
    return sum(1.0 / math.log2(r + 1) for r in range(1, m + 1))


def _precision(hits: np.ndarray) -> np.ndarray:
    return hits.mean(axis=-1)


def _average_precision(hits: np.ndarray) -> np.ndarray:
    m = hits.shape[-1]
    precision_at_r = np.cumsum(hits, axis=-1) / np.arange(1, m + 1)
    return (hits * precision_at_r).sum(axis=-1) / m


def _ndcg(hits: np.ndarray) -> np.ndarray:
    m = hits.shape[-1]
    discounts = 1.0 / np.log2(np.arange(2, m + 2))
    gains = np.power(2.0, hits) - 1.0
    return (gains * discounts).sum(axis=-1) / ideal_dcg(m)


def precision_at_m(u, items: EmbeddingMatrix, y: SelectionResult, m: int) -> float:
    return float(_precision(_hits(u, items, y, m)))


def ap_at_m(u, items: EmbeddingMatrix, y: SelectionResult, m: int) -> float:
    return float(_average_precision(_hits(u, items, y, m)))


def ndcg_at_m(u, items: EmbeddingMatrix, y: SelectionResult, m: int) -> float:
    return float(_ndcg(_hits(u, items, y, m)))


def hit_matrix(users: EmbeddingMatrix, items: EmbeddingMatrix, y: SelectionResult, m: int,
               scores: Optional[np.ndarray] = None) -> np.ndarray:
    """W x m indicator of y(r) in Top(u_w, m)."""
    prefix = _ranked_prefix(y, m)
    scores = score_matrix(users, items) if scores is None else scores
    top = top_k_rows(scores, m)
    return (prefix[None, :, None] == top[:, None, :]).any(axis=2).astype(np.float64)


def map_at_m(users: EmbeddingMatrix, items: EmbeddingMatrix, y: SelectionResult, m: int) -> float:
    return float(_average_precision(hit_matrix(users, items, y, m)).mean())


def ranking_scores(users: EmbeddingMatrix, items: EmbeddingMatrix, y: SelectionResult, m: int,
                   scores: Optional[np.ndarray] = None) -> RankingScores:
    """Precision@m, MAP@m and NDCG@m averaged over the user population."""
    if users.count < 1:
        raise InvalidInputError("ranking metrics need at least one user")
    hits = hit_matrix(users, items, y, m, scores=scores)
    return RankingScores(
        precision=float(_precision(hits).mean()),
        map=float(_average_precision(hits).mean()),
        ndcg=float(_ndcg(hits).mean()),
    )


def metric_report(users: EmbeddingMatrix, items: EmbeddingMatrix, y: SelectionResult, m: int,
                  population: Population = Population.cold, label: Optional[str] = None) -> MetricReport:
    """All ranking metrics plus fav_loss of the head of y, for one population."""
    scores = ranking_scores(users, items, y, m)
    return MetricReport(method=label or y.method.value, m=m, precision=scores.precision, map=scores.map,
                        ndcg=scores.ndcg, fav_loss_value=fav_loss(users, items, y.head(m)),
                        population=population)


def norm_distribution(items: EmbeddingMatrix) -> NormDiagnostics:
    if items.count < 1:
        raise InvalidInputError("norm distribution needs at least one item")
    norms = row_norms(items.vectors)
    peak = norms.max()
    if peak <= 0.0:
        raise InvalidInputError("all item vectors are zero")
    normalized = norms / peak
    # lower median for even counts
    median = float(np.sort(normalized)[(len(normalized) - 1) // 2])
    return NormDiagnostics(normalized_norms=tuple(float(v) for v in normalized), median=median)


def _group_label(low: float, high: float) -> str:
    return f"{low * 100:g}%-{high * 100:g}%"


def norm_groups(items: EmbeddingMatrix, percentile_edges: Sequence[float]) -> list[tuple[str, np.ndarray]]:
    """Partitions items by norm rank into cumulative top-fraction groups.

    Group g holds ranks [ceil(e_{g-1} N), ceil(e_g N)) of the norm-descending
    ranking.
    """
    edges = list(percentile_edges)
    if not edges or any(not 0.0 < e <= 1.0 for e in edges) or edges != sorted(edges):
        raise InvalidInputError(f"percentile edges must be increasing values in (0, 1], got {edges}")
    order = rank_descending(row_norms(items.vectors))
    groups = []
    low_edge, low_cut = 0.0, 0
    for edge in edges:
        # edge * N may land one rounding step above an integer
        cut = max(low_cut, min(items.count, math.ceil(edge * items.count - 1e-9)))
        groups.append((_group_label(low_edge, edge), order[low_cut:cut]))
        low_edge, low_cut = edge, cut
    return groups


def norm_group_occupancy(users: EmbeddingMatrix, items: EmbeddingMatrix, k: int,
                         percentile_edges: Sequence[float] = DEFAULT_PERCENTILE_EDGES) -> dict[str, float]:
    """Share of the pooled exact top-k MIPS results (k * W entries) held by each norm group."""
    if not 1 <= k <= items.count:
        raise InvalidInputError(f"k must be in [1, {items.count}], got {k}")
    if users.count < 1:
        raise InvalidInputError("occupancy needs at least one user")
    pooled = top_k_rows(score_matrix(users, items), k).reshape(-1)
    counts = np.bincount(pooled, minlength=items.count)
    total = float(pooled.size)
    return {label: float(counts[members].sum()) / total for label, members in norm_groups(items, percentile_edges)}


def norm_vs_high_ratings(items: EmbeddingMatrix, ratings: RatingsTable,
                         high_threshold: float = 5.0) -> list[NormBucket]:
    """Mean and population variance of item norms per high-rating count."""
    index = items.id_index()
    counts = np.zeros(items.count, dtype=np.int64)
    for _, item, rating in ratings.triples():
        if item not in index:
            raise InvalidInputError(f"rated item {item!r} has no embedding")
        if rating >= high_threshold:
            counts[index[item]] += 1
    norms = row_norms(items.vectors)
    buckets = []
    for count in np.unique(counts).tolist():
        members = norms[counts == count]
        buckets.append(NormBucket(
            high_count=int(count),
            n_items=int(members.size),
            mean=float(members.mean()),
            variance=float(members.var()),
        ))
    return buckets
