"""Inner-product proximity graphs and the two selectors built on them.

The approximate graph is a single-layer NSW: nodes are inserted one at a time,
each beam-searches its top-k inner-product neighbours among the nodes already
in the graph, links to them, and offers each neighbour a reverse edge. A node
keeps at most 2k out-edges; when full, its weakest edge is evicted in favour
of a stronger newcomer.
"""
import heapq
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

import numpy as np
import structlog

import config
from schemas.embedding_schema import EmbeddingMatrix
from schemas.graph_schema import GraphMode, InsertionOrder, ProximityGraph, SearchParams
from schemas.selection_schema import Method, SelectionResult
from services.errors import InvalidInputError
from services.numerics import check_dims, row_norms, score_matrix, top_k_rows
from services.selectors import _check_m, _check_users, ranked_result

logger = structlog.get_logger(__name__)

EXACT_BLOCK_ROWS = 1024


def _check_k(items: EmbeddingMatrix, k: int) -> None:
    if not 1 <= k < items.count:
        raise InvalidInputError(f"k must be in [1, {items.count - 1}] for {items.count} items, got {k}")


def max_norm_entry(items: EmbeddingMatrix) -> int:
    # argmax keeps the lowest index on ties
    return int(np.argmax(row_norms(items.vectors)))


def _ordered_row(vectors: np.ndarray, source: int, targets: list[int]) -> tuple[int, ...]:
    values = (vectors[targets] @ vectors[source]).tolist()
    return tuple(t for _, t in sorted(zip((-v for v in values), targets)))


def build_exact_ip_graph(items: EmbeddingMatrix, k: int) -> ProximityGraph:
    """Links every item to the k items with the largest x_i^T x_j, j != i."""
    _check_k(items, k)
    vectors = items.vectors
    adjacency: list[tuple[int, ...]] = []
    for start in range(0, items.count, EXACT_BLOCK_ROWS):
        block = vectors[start:start + EXACT_BLOCK_ROWS] @ vectors.T
        rows = np.arange(block.shape[0])
        block[rows, rows + start] = -np.inf
        for row in top_k_rows(block, k):
            adjacency.append(tuple(int(t) for t in row))
    graph = ProximityGraph(
        n=items.count,
        k=k,
        max_degree=k,
        adjacency=tuple(adjacency),
        entry_point=max_norm_entry(items),
        mode=GraphMode.exact,
    )
    logger.info("graph_built", mode="exact", n=graph.n, k=k, edges=graph.edge_count)
    return graph


def beam_search(adjacency: list[list[int]], vectors: np.ndarray, query: np.ndarray,
                entry: int, ef: int) -> list[tuple[float, int]]:
    """Best-first search by inner product; returns up to ef (value, node) pairs, best first.

    Expansion stops once the most promising unexpanded node scores below the
    worst kept result and the result beam is full.
    """
    entry_value = float(vectors[entry] @ query)
    visited = {entry}
    # candidates: max-heap on value (ties: lower index first)
    candidates = [(-entry_value, entry)]
    # results: min-heap on value, worst on top (ties: higher index is worse)
    results = [(entry_value, -entry)]
    while candidates:
        neg_value, node = heapq.heappop(candidates)
        if len(results) >= ef and -neg_value < results[0][0]:
            break
        fresh = [t for t in adjacency[node] if t not in visited]
        if not fresh:
            continue
        visited.update(fresh)
        values = vectors[fresh] @ query
        for value, target in zip(values.tolist(), fresh):
            if len(results) < ef or (value, -target) > results[0]:
                heapq.heappush(candidates, (-value, target))
                heapq.heappush(results, (value, -target))
                if len(results) > ef:
                    heapq.heappop(results)
    return sorted(((v, -t) for v, t in results), key=lambda pair: (-pair[0], pair[1]))


def _insertion_order(items: EmbeddingMatrix, order: InsertionOrder, seed: int) -> np.ndarray:
    if order == InsertionOrder.shuffle:
        return np.random.default_rng(seed).permutation(items.count)
    if order == InsertionOrder.norm:
        return np.argsort(-row_norms(items.vectors), kind="stable")
    return np.arange(items.count)


def build_approx_ip_graph(items: EmbeddingMatrix, k: int, ef_construction: int,
                          order: InsertionOrder = InsertionOrder.norm,
                          seed: int = 0) -> ProximityGraph:
    _check_k(items, k)
    if ef_construction < 1:
        raise InvalidInputError(f"ef_construction must be positive, got {ef_construction}")
    vectors = items.vectors
    norms = row_norms(vectors)
    budget = 2 * k
    adjacency: list[list[int]] = [[] for _ in range(items.count)]
    # edge strengths, aligned with adjacency rows
    strengths: list[list[float]] = [[] for _ in range(items.count)]
    entry: Optional[int] = None

    for node in _insertion_order(items, order, seed).tolist():
        if entry is None:
            entry = node
            continue
        query = vectors[node]
        found = beam_search(adjacency, vectors, query, entry, max(ef_construction, k))
        for value, neighbour in found[:k]:
            adjacency[node].append(neighbour)
            strengths[node].append(value)
            _offer_reverse_edge(adjacency[neighbour], strengths[neighbour], node, value, budget)
        if (norms[node], -node) > (norms[entry], -entry):
            entry = node

    rows = tuple(_ordered_row(vectors, source, row) if row else () for source, row in enumerate(adjacency))
    graph = ProximityGraph(
        n=items.count,
        k=k,
        max_degree=budget,
        adjacency=rows,
        entry_point=max_norm_entry(items),
        mode=GraphMode.approximate,
    )
    logger.info("graph_built", mode="approximate", n=graph.n, k=k, ef=ef_construction,
                order=order.value, edges=graph.edge_count)
    return graph


def _offer_reverse_edge(row: list[int], strengths: list[float], newcomer: int, value: float,
                        budget: int) -> None:
    if len(row) < budget:
        row.append(newcomer)
        strengths.append(value)
        return
    # weakest edge: lowest strength, then highest index
    weakest = min(range(len(row)), key=lambda j: (strengths[j], -row[j]))
    if (value, -newcomer) > (strengths[weakest], -row[weakest]):
        row[weakest] = newcomer
        strengths[weakest] = value


def search_top_k(graph: ProximityGraph, items: EmbeddingMatrix, q,
                 params: SearchParams) -> list[tuple[int, float]]:
    """Approximate MIPS over the graph: up to k_out (item, value) pairs, best first."""
    if graph.n != items.count:
        raise InvalidInputError(f"graph has {graph.n} nodes but there are {items.count} items")
    query = np.asarray(q, dtype=np.float64).reshape(-1)
    if query.size != items.dim:
        raise InvalidInputError(f"query dim {query.size} differs from item dim {items.dim}")
    adjacency = [list(row) for row in graph.adjacency]
    found = beam_search(adjacency, items.vectors, query, graph.entry_point, params.ef)
    return [(node, value) for value, node in found[:params.k_out]]


def greedy_search_top1(graph: ProximityGraph, items: EmbeddingMatrix, q, ef: int) -> tuple[int, float]:
    return search_top_k(graph, items, q, SearchParams(ef=ef, k_out=1))[0]


def select_max_in_degree(items: EmbeddingMatrix, m: int, graph: ProximityGraph) -> SelectionResult:
    _check_m(items, m)
    if graph.n != items.count:
        raise InvalidInputError(f"graph has {graph.n} nodes but there are {items.count} items")
    return ranked_result(Method.max_in_degree, items, graph.in_degrees().astype(np.float64), m)


def favourite_items(users: EmbeddingMatrix, items: EmbeddingMatrix,
                    graph: Optional[ProximityGraph], ef: int, exact_search: bool,
                    threads: int = config.THREADS) -> np.ndarray:
    """Each user's top-1 item, by exact scan or by graph search."""
    check_dims(users, items)
    if exact_search:
        return np.argmax(score_matrix(users, items), axis=1)
    if graph is None:
        raise InvalidInputError("graph search needs a proximity graph")
    if graph.n != items.count:
        raise InvalidInputError(f"graph has {graph.n} nodes but there are {items.count} items")
    adjacency = [list(row) for row in graph.adjacency]

    def search(u: np.ndarray) -> int:
        return beam_search(adjacency, items.vectors, u, graph.entry_point, max(ef, 1))[0][1]

    if threads > 1 and users.count > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            # map keeps user order, so the tally is independent of scheduling
            return np.fromiter(pool.map(search, users.vectors), dtype=np.int64, count=users.count)
    return np.fromiter((search(u) for u in users.vectors), dtype=np.int64, count=users.count)


def select_ipgs(users: EmbeddingMatrix, items: EmbeddingMatrix, m: int,
                graph: Optional[ProximityGraph], ef: int, exact_search: bool = False,
                threads: int = config.THREADS) -> SelectionResult:
    _check_users(users)
    _check_m(items, m)
    favourites = favourite_items(users, items, graph, ef, exact_search, threads=threads)
    frequency = np.bincount(favourites, minlength=items.count).astype(np.float64)
    return ranked_result(Method.ipgs, items, frequency, m)
