"""Deterministic numeric primitives shared by every selector.

Scalar operations sum sequentially by index. Batch scoring goes through a single
float64 matrix product (`score_matrix`) so every caller that compares scores
compares bits produced by the same routine. Ranking ties are always broken by
ascending internal index.
"""
import math
from typing import Sequence

import numpy as np

from schemas.embedding_schema import EmbeddingMatrix
from services.errors import DimensionMismatchError


def inner_product(a: Sequence[float], b: Sequence[float]) -> float:
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"cannot take inner product of dims {a.size} and {b.size}")
    total = 0.0
    for x, y in zip(a.tolist(), b.tolist()):
        total += x * y
    return total


def norm(a: Sequence[float]) -> float:
    return math.sqrt(inner_product(a, a))


def row_norms(vectors: np.ndarray) -> np.ndarray:
    return np.sqrt(np.einsum("ij,ij->i", vectors, vectors))


def check_dims(users: EmbeddingMatrix, items: EmbeddingMatrix) -> None:
    if users.dim != items.dim:
        raise DimensionMismatchError(f"user dim {users.dim} differs from item dim {items.dim}")


def score_matrix(users: EmbeddingMatrix, items: EmbeddingMatrix) -> np.ndarray:
    """W x N matrix of u_w^T x_n."""
    check_dims(users, items)
    return users.vectors @ items.vectors.T


def rank_descending(scores: np.ndarray) -> np.ndarray:
    """Indices ordered by score descending, ties by ascending index."""
    return np.argsort(-np.asarray(scores), kind="stable")


def top_k(scores: np.ndarray, k: int) -> np.ndarray:
    return rank_descending(scores)[:k]


def top_k_rows(scores: np.ndarray, k: int) -> np.ndarray:
    """Per-row top-k column indices of a 2-D score matrix (same tie rule)."""
    return np.argsort(-scores, axis=1, kind="stable")[:, :k]
