"""Max-Norm, User-Expectation and the submodular greedy selector."""
import heapq
from typing import Optional, Sequence

import numpy as np
import structlog

from schemas.embedding_schema import EmbeddingMatrix
from schemas.selection_schema import Method, SelectionResult
from services.errors import InvalidInputError
from services.numerics import check_dims, rank_descending, row_norms
from services.oracle import ProblemContext

logger = structlog.get_logger(__name__)

# relative slack on stale gains; covers rounding in the submodular bound
LAZY_SLACK = 1e-9


def _check_m(items: EmbeddingMatrix, m: int) -> None:
    if not 1 <= m <= items.count:
        raise InvalidInputError(f"m must be in [1, {items.count}], got {m}")


def _check_users(users: EmbeddingMatrix) -> None:
    if users.count < 1:
        raise InvalidInputError("at least one warm user is required")


def ranked_result(method: Method, items: EmbeddingMatrix, scores: np.ndarray, m: int) -> SelectionResult:
    """Top-m of a static per-item score, descending with index tie-break."""
    order = rank_descending(scores)[:m]
    return SelectionResult(
        method=method,
        indices=tuple(int(i) for i in order),
        ranked_ids=tuple(items.ids[i] for i in order),
        scores=tuple(float(scores[i]) for i in order),
        m=m,
    )


def select_max_norm(items: EmbeddingMatrix, m: int) -> SelectionResult:
    _check_m(items, m)
    return ranked_result(Method.max_norm, items, row_norms(items.vectors), m)


def user_expectation_vector(users: EmbeddingMatrix) -> np.ndarray:
    _check_users(users)
    total = np.zeros(users.dim)
    for u in users.vectors:
        total += u
    return total / users.count


def select_user_expectation(users: EmbeddingMatrix, items: EmbeddingMatrix, m: int) -> SelectionResult:
    check_dims(users, items)
    _check_m(items, m)
    q = user_expectation_vector(users)
    return ranked_result(Method.user_expectation, items, items.vectors @ q, m)


class GreedyState:
    """Chosen items plus each user's best inner product with them.

    `item_scores` is the item-major score matrix (row n = u^T x_n over users).
    Candidate values f(Y + x) are row sums of max(best, row) and always go
    through `augmented_values`, so plain and lazy greedy compare identical bits.
    """

    def __init__(self, item_scores: np.ndarray):
        self.item_scores = item_scores
        self.chosen: list[int] = []
        self.gains: list[float] = []
        self.value = 0.0
        self.best_per_user = np.full(item_scores.shape[1], -np.inf)
        self._taken = np.zeros(item_scores.shape[0], dtype=bool)

    def augmented_values(self, candidates: np.ndarray) -> np.ndarray:
        return np.maximum(self.item_scores[candidates], self.best_per_user).sum(axis=1)

    def is_taken(self, index: int) -> bool:
        return bool(self._taken[index])

    def add(self, index: int, value: float) -> None:
        self.gains.append(value - self.value if self.chosen else value)
        self.chosen.append(index)
        self.value = value
        self._taken[index] = True
        np.maximum(self.best_per_user, self.item_scores[index], out=self.best_per_user)

    def step_plain(self, pool: np.ndarray) -> Optional[int]:
        free = pool[~self._taken[pool]]
        if free.size == 0:
            return None
        values = self.augmented_values(free)
        # argmax returns the first maximum; pools are sorted so that is the lowest index
        best = int(np.argmax(values))
        self.add(int(free[best]), float(values[best]))
        return int(free[best])


class LazyQueue:
    """CELF priority queue of stale marginal gains over a candidate pool."""

    def __init__(self, state: GreedyState, pool: np.ndarray):
        self.state = state
        self.heap: list[tuple[float, int]] = []
        if not state.chosen:
            # gains against the empty set are not upper bounds when scores go
            # negative, so the first pick is a full scan
            state.step_plain(pool)
        free = pool[~state._taken[pool]]
        if free.size:
            values = state.augmented_values(free)
            self.heap = [(-(float(v) - state.value), int(i)) for v, i in zip(values, free)]
            heapq.heapify(self.heap)

    def step(self) -> Optional[int]:
        state = self.state
        while self.heap and state.is_taken(self.heap[0][1]):
            heapq.heappop(self.heap)
        if not self.heap:
            return None
        current = state.value
        best_value, best_index = -np.inf, -1
        evaluated: list[tuple[float, int]] = []
        while self.heap:
            stale_gain, index = -self.heap[0][0], self.heap[0][1]
            bound = current + stale_gain
            slack = LAZY_SLACK * max(1.0, abs(bound), abs(best_value) if best_value > -np.inf else 0.0)
            if best_value > -np.inf and bound + slack < best_value:
                break
            heapq.heappop(self.heap)
            if state.is_taken(index):
                continue
            value = float(state.augmented_values(np.asarray([index]))[0])
            evaluated.append((value, index))
            if value > best_value or (value == best_value and index < best_index):
                best_value, best_index = value, index
        state.add(best_index, best_value)
        for value, index in evaluated:
            if index != best_index:
                heapq.heappush(self.heap, (-(value - current), index))
        return best_index


def greedy_indices(context: ProblemContext, m: int, lazy: bool = False,
                   pools: Sequence[Sequence[int]] = ()) -> GreedyState:
    """Runs greedy over successive candidate pools until m items are chosen.

    Each pool is exhausted (or m is reached) before the next pool is opened;
    with no pools the whole item set is one pool.
    """
    n = context.items.count
    pool_list = [np.asarray(sorted(set(p)), dtype=np.int64) for p in pools] or [np.arange(n)]
    state = GreedyState(context.item_scores)
    for pool in pool_list:
        queue = LazyQueue(state, pool) if lazy else None
        while len(state.chosen) < m:
            picked = queue.step() if queue else state.step_plain(pool)
            if picked is None:
                break
        if len(state.chosen) >= m:
            break
    return state


def state_result(method: Method, items: EmbeddingMatrix, state: GreedyState) -> SelectionResult:
    return SelectionResult(
        method=method,
        indices=tuple(state.chosen),
        ranked_ids=tuple(items.ids[i] for i in state.chosen),
        scores=tuple(state.gains),
        m=len(state.chosen),
    )


def select_submodular_greedy(users: EmbeddingMatrix, items: EmbeddingMatrix, m: int,
                             lazy: bool = False,
                             context: Optional[ProblemContext] = None) -> SelectionResult:
    _check_users(users)
    _check_m(items, m)
    context = context or ProblemContext(users, items)
    state = greedy_indices(context, m, lazy=lazy)
    logger.debug("greedy_done", m=m, lazy=lazy, value=state.value)
    return state_result(Method.submodular, items, state)
