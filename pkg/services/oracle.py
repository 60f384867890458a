"""Brute-force reference computations: exact MIPS, fav_loss, coverage and the
exhaustive optimum. Everything else in the package is checked against these."""
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np
import structlog

from schemas.embedding_schema import EmbeddingMatrix
from schemas.selection_schema import Method, SelectionResult, TopResult
from services.errors import BudgetExceededError, EmptySelectionError, InvalidInputError
from services.numerics import check_dims, score_matrix, top_k

logger = structlog.get_logger(__name__)

DEFAULT_EXHAUSTIVE_BUDGET = 2_000_000


@dataclass(frozen=True)
class ProblemContext:
    """Users and items plus lazily cached scores shared across methods."""

    users: EmbeddingMatrix
    items: EmbeddingMatrix

    def __post_init__(self):
        check_dims(self.users, self.items)

    @cached_property
    def scores(self) -> np.ndarray:
        return score_matrix(self.users, self.items)

    @cached_property
    def item_scores(self) -> np.ndarray:
        # item-major copy; row n holds u_w^T x_n for every user
        return np.ascontiguousarray(self.scores.T)

    @cached_property
    def best_values(self) -> np.ndarray:
        return self.scores.max(axis=1)

    @cached_property
    def total_best(self) -> float:
        return float(self.best_values.sum())

    def subset_best(self, subset: Sequence[int]) -> np.ndarray:
        subset = _as_subset(subset, self.items.count)
        return self.scores[:, subset].max(axis=1)


class OptimalSubset(NamedTuple):
    indices: tuple[int, ...]
    loss: float
    coverage: float


def _as_subset(subset: Iterable[int], n: int) -> list[int]:
    subset = sorted(set(int(i) for i in subset))
    if not subset:
        raise EmptySelectionError("the maximum over an empty selection is undefined")
    if subset[0] < 0 or subset[-1] >= n:
        raise InvalidInputError(f"selection index outside [0, {n})")
    return subset


def _result_indices(items: EmbeddingMatrix, y: SelectionResult) -> list[int]:
    if not y.indices:
        raise EmptySelectionError("the maximum over an empty selection is undefined")
    for index, external in zip(y.indices, y.ranked_ids):
        if not 0 <= index < items.count or items.ids[index] != external:
            raise InvalidInputError(f"selected item {external!r} is not item {index} of the matrix")
    return list(y.indices)


def exact_top_k(u: Sequence[float], items: EmbeddingMatrix, k: int, user_index: int = 0) -> TopResult:
    u = np.asarray(u, dtype=np.float64).reshape(1, -1)
    if k < 1 or k > items.count:
        raise InvalidInputError(f"k must be in [1, {items.count}], got {k}")
    scores = score_matrix(EmbeddingMatrix.from_array(u), items)[0]
    best = top_k(scores, k)
    return TopResult(
        user_index=user_index,
        item_indices=tuple(int(i) for i in best),
        values=tuple(float(v) for v in scores[best]),
    )


def fav_loss(users: EmbeddingMatrix, items: EmbeddingMatrix, y: SelectionResult,
             context: Optional[ProblemContext] = None) -> float:
    """Sum over users of (best value over all items - best value over the selection)."""
    context = context or ProblemContext(users, items)
    subset = _result_indices(items, y)
    gaps = context.best_values - context.scores[:, subset].max(axis=1)
    return float(gaps.sum())


def subset_loss(context: ProblemContext, subset: Iterable[int]) -> float:
    gaps = context.best_values - context.subset_best(list(subset))
    return float(gaps.sum())


def coverage_value(users: EmbeddingMatrix, items: EmbeddingMatrix, subset: Iterable[int],
                   context: Optional[ProblemContext] = None) -> float:
    """f(Y) = sum over users of the best inner product within the subset."""
    context = context or ProblemContext(users, items)
    return float(context.subset_best(list(subset)).sum())


def exhaustive_optimal(users: EmbeddingMatrix, items: EmbeddingMatrix, m: int,
                       budget: int = DEFAULT_EXHAUSTIVE_BUDGET,
                       candidates: Optional[Sequence[int]] = None,
                       context: Optional[ProblemContext] = None) -> OptimalSubset:
    """Exact minimiser of fav_loss over all size-m subsets of the candidates.

    Enumeration is depth-first in lexicographic order; a branch is pruned when
    even the best remaining items cannot beat the incumbent, so ties keep the
    lexicographically smallest index set.
    """
    context = context or ProblemContext(users, items)
    pool = list(range(items.count)) if candidates is None else _as_subset(candidates, items.count)
    if not 1 <= m <= len(pool):
        raise InvalidInputError(f"m must be in [1, {len(pool)}], got {m}")
    required = math.comb(len(pool), m)
    if required > budget:
        raise BudgetExceededError(required, budget)

    scores = context.scores[:, pool]
    n_users = scores.shape[0]
    # suffix_max[j] = per-user best over pool positions j..end
    suffix_max = np.full((len(pool) + 1, n_users), -np.inf)
    for j in range(len(pool) - 1, -1, -1):
        suffix_max[j] = np.maximum(suffix_max[j + 1], scores[:, j])

    best_value = -np.inf
    best_combo: tuple[int, ...] = ()
    chosen: list[int] = []

    def descend(start: int, current: np.ndarray) -> None:
        nonlocal best_value, best_combo
        remaining = m - len(chosen)
        if remaining == 0:
            value = float(current.sum())
            if value > best_value:
                best_value, best_combo = value, tuple(chosen)
            return
        for j in range(start, len(pool) - remaining + 1):
            bound = float(np.maximum(current, suffix_max[j]).sum())
            if bound <= best_value:
                # later branches only see a subset of these items
                return
            chosen.append(j)
            descend(j + 1, np.maximum(current, scores[:, j]))
            chosen.pop()

    descend(0, np.full(n_users, -np.inf))
    indices = tuple(pool[j] for j in best_combo)
    loss = subset_loss(context, indices)
    logger.debug("exhaustive_optimal", m=m, subsets=required, loss=loss)
    return OptimalSubset(indices=indices, loss=loss, coverage=float(context.subset_best(indices).sum()))


def _marginal_contributions(chosen: np.ndarray) -> np.ndarray:
    if chosen.shape[1] == 1:
        return chosen.sum(axis=0)
    coverage = chosen.max(axis=1).sum()
    return np.array([coverage - np.delete(chosen, j, axis=1).max(axis=1).sum()
                     for j in range(chosen.shape[1])])


def select_optimal(users: EmbeddingMatrix, items: EmbeddingMatrix, m: int,
                   budget: int = DEFAULT_EXHAUSTIVE_BUDGET,
                   context: Optional[ProblemContext] = None) -> SelectionResult:
    """Wraps the exhaustive optimum as a ranking (ascending index order).

    Each item's score is its marginal contribution to the optimum's coverage,
    f(Y) - f(Y without y); a single-item optimum scores its own coverage.
    """
    context = context or ProblemContext(users, items)
    optimum = exhaustive_optimal(users, items, m, budget=budget, context=context)
    per_item = _marginal_contributions(context.scores[:, list(optimum.indices)])
    return SelectionResult(
        method=Method.optimal,
        indices=optimum.indices,
        ranked_ids=tuple(items.ids[i] for i in optimum.indices),
        scores=tuple(float(s) for s in per_item),
        m=m,
    )
