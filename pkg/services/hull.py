"""Extreme points of the item set and the hull-restricted selector.

The optimal selection only ever needs extreme points of Conv(X), so the hull
serves as a candidate-pruning step ahead of greedy. In high dimension only a
sampled (sound but possibly incomplete) extreme set is computed.
"""
from typing import Optional

import numpy as np
import structlog

from schemas.embedding_schema import EmbeddingMatrix
from schemas.hull_schema import ExtremeSet
from schemas.selection_schema import Method, SelectionResult
from services.errors import InvalidInputError
from services.oracle import ProblemContext
from services.selectors import _check_m, _check_users, greedy_indices, state_result

logger = structlog.get_logger(__name__)

DIRECTION_CHUNK = 4096
EXACT_HULL_BUDGET = 10_000


def support_argmax(items: EmbeddingMatrix, d) -> int:
    direction = np.asarray(d, dtype=np.float64).reshape(-1)
    if direction.size != items.dim:
        raise InvalidInputError(f"direction dim {direction.size} differs from item dim {items.dim}")
    if not np.any(direction):
        raise InvalidInputError("support direction must be non-zero")
    return int(np.argmax(items.vectors @ direction))


def sample_directions(dim: int, count: int, seed: int) -> np.ndarray:
    """Uniform unit directions; the first n rows are the same for any count >= n."""
    draws = np.random.default_rng(seed).standard_normal((count, dim))
    lengths = np.linalg.norm(draws, axis=1, keepdims=True)
    lengths[lengths == 0.0] = 1.0
    return draws / lengths


def approx_extreme_points(items: EmbeddingMatrix, num_directions: int, seed: int = 0) -> ExtremeSet:
    if num_directions < 1:
        raise InvalidInputError(f"num_directions must be positive, got {num_directions}")
    directions = sample_directions(items.dim, num_directions, seed)
    witness: dict[int, int] = {}
    for start in range(0, num_directions, DIRECTION_CHUNK):
        chunk = directions[start:start + DIRECTION_CHUNK]
        winners = np.argmax(items.vectors @ chunk.T, axis=0)
        for offset, winner in enumerate(winners.tolist()):
            witness.setdefault(winner, start + offset)
    logger.debug("extreme_points_sampled", directions=num_directions, found=len(witness))
    return ExtremeSet(indices=tuple(witness), num_directions=num_directions, witness=witness)


def _cross(o: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    return float((a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]))


def exact_hull_2d(items: EmbeddingMatrix, budget: int = EXACT_HULL_BUDGET) -> ExtremeSet:
    """Gift-wrapping hull vertices; collinear boundary points are not vertices.

    Exact duplicates count as one point, represented by their lowest index.
    """
    if items.dim != 2:
        raise InvalidInputError(f"exact hull is only available in 2-D, got dim {items.dim}")
    if items.count > budget:
        raise InvalidInputError(f"exact hull limited to {budget} points, got {items.count}")
    points = items.vectors
    representatives: dict[tuple[float, float], int] = {}
    for i, (x, y) in enumerate(points.tolist()):
        representatives.setdefault((x, y), i)
    candidates = sorted(representatives.values())
    if len(candidates) < 3:
        return ExtremeSet(indices=tuple(candidates), num_directions=0, exact=True)

    start = min(candidates, key=lambda i: (points[i][0], points[i][1], i))
    hull = [start]
    current = start
    for _ in range(len(candidates)):
        nxt = None
        for r in candidates:
            if r == current:
                continue
            if nxt is None:
                nxt = r
                continue
            turn = _cross(points[current], points[nxt], points[r])
            if turn < 0:
                nxt = r
            elif turn == 0:
                # collinear: keep the farther point, the nearer one is not a vertex
                if (np.sum((points[r] - points[current]) ** 2)
                        > np.sum((points[nxt] - points[current]) ** 2)):
                    nxt = r
        if nxt == start:
            break
        hull.append(nxt)
        current = nxt
    return ExtremeSet(indices=tuple(hull), num_directions=0, exact=True)


def select_hull(users: EmbeddingMatrix, items: EmbeddingMatrix, m: int,
                num_directions: int = 1000, seed: int = 0,
                extremes: Optional[ExtremeSet] = None,
                lazy: bool = False,
                context: Optional[ProblemContext] = None) -> SelectionResult:
    """Greedy over the extreme set; if that set is smaller than m, greedy pads
    from the remaining items."""
    _check_users(users)
    _check_m(items, m)
    context = context or ProblemContext(users, items)
    extremes = extremes or approx_extreme_points(items, num_directions, seed)
    rest = sorted(set(range(items.count)) - set(extremes.indices))
    pools = [extremes.indices, rest] if rest else [extremes.indices]
    state = greedy_indices(context, m, lazy=lazy, pools=pools)
    logger.debug("hull_selection", m=m, extremes=len(extremes), value=state.value)
    return state_result(Method.hull, items, state)
