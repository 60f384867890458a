"""Regularized alternating least squares and ridge fitting of cold users.

Each epoch solves every item vector against the current user vectors, then
every user vector against the new item vectors. Both half-steps minimise the
same regularized objective exactly, so the objective never increases. Training
RMSE is only guaranteed to follow when reg is 0 and every solve is full rank.
"""
from typing import Optional

import numpy as np
import structlog

from schemas.embedding_schema import EmbeddingMatrix
from schemas.ratings_schema import RatingsTable
from services.errors import InvalidInputError, SingularSystemError

logger = structlog.get_logger(__name__)


def ridge_solve(factors: np.ndarray, targets: np.ndarray, reg: float) -> np.ndarray:
    """argmin_q ||targets - factors q||^2 + reg ||q||^2 via the normal equations."""
    dim = factors.shape[1]
    if reg == 0.0 and np.linalg.matrix_rank(factors) < dim:
        raise SingularSystemError(
            f"normal equations are singular: {factors.shape[0]} ratings for {dim} factors and no regularization"
        )
    gram = factors.T @ factors + reg * np.eye(dim)
    return np.linalg.solve(gram, factors.T @ targets)


def _solve_block(groups: list[tuple[np.ndarray, np.ndarray]], fixed: np.ndarray, reg: float) -> np.ndarray:
    solved = np.zeros((len(groups), fixed.shape[1]))
    for row, (others, values) in enumerate(groups):
        if len(others):
            solved[row] = ridge_solve(fixed[others], values, reg)
    return solved


class AlsTrainer:
    """ALS on observed ratings only.

    After `fit`, `rmse_history[e]` and `objective_history[e]` hold training
    RMSE and regularized objective after epoch e (entry 0 is the init).
    """

    def __init__(self, dim: int = 32, reg: float = 0.1, epochs: int = 20, seed: int = 0):
        if dim < 1:
            raise InvalidInputError(f"dim must be positive, got {dim}")
        if reg < 0.0:
            raise InvalidInputError(f"regularization must be non-negative, got {reg}")
        if epochs < 0:
            raise InvalidInputError(f"epochs must be non-negative, got {epochs}")
        self.dim = dim
        self.reg = reg
        self.epochs = epochs
        self.seed = seed
        self.rmse_history: list[float] = []
        self.objective_history: list[float] = []

    def _residuals(self, ratings: RatingsTable, users: np.ndarray, items: np.ndarray) -> np.ndarray:
        predicted = np.einsum("ij,ij->i", users[ratings.user_index], items[ratings.item_index])
        return ratings.ratings - predicted

    def _record(self, epoch: int, ratings: RatingsTable, users: np.ndarray, items: np.ndarray) -> None:
        residuals = self._residuals(ratings, users, items)
        rmse = float(np.sqrt(np.mean(residuals ** 2)))
        objective = float(np.sum(residuals ** 2) + self.reg * (np.sum(users ** 2) + np.sum(items ** 2)))
        self.rmse_history.append(rmse)
        self.objective_history.append(objective)
        logger.info("als_epoch", epoch=epoch, rmse=rmse, objective=objective)

    def fit(self, ratings: RatingsTable) -> tuple[EmbeddingMatrix, EmbeddingMatrix]:
        if len(ratings) == 0:
            raise InvalidInputError("cannot train on an empty ratings table")
        rng = np.random.default_rng(self.seed)
        scale = 1.0 / np.sqrt(self.dim)
        users = rng.standard_normal((len(ratings.users), self.dim)) * scale
        items = rng.standard_normal((len(ratings.items), self.dim)) * scale
        by_user = ratings.grouped("user")
        by_item = ratings.grouped("item")

        self.rmse_history, self.objective_history = [], []
        self._record(0, ratings, users, items)
        for epoch in range(1, self.epochs + 1):
            items = _solve_block(by_item, users, self.reg)
            users = _solve_block(by_user, items, self.reg)
            self._record(epoch, ratings, users, items)
        return (
            EmbeddingMatrix(vectors=users, ids=ratings.users),
            EmbeddingMatrix(vectors=items, ids=ratings.items),
        )


def train_mf(ratings: RatingsTable, dim: int = 32, reg: float = 0.1, epochs: int = 20,
             seed: int = 0) -> tuple[EmbeddingMatrix, EmbeddingMatrix]:
    return AlsTrainer(dim=dim, reg=reg, epochs=epochs, seed=seed).fit(ratings)


def fit_cold_users(ratings: RatingsTable, items: EmbeddingMatrix, reg: float = 0.1,
                   users: Optional[list[str]] = None) -> EmbeddingMatrix:
    """Ridge solution per cold user against fixed item vectors.

    Users listed in the table (or in `users`) without any rating get a zero
    vector; their number is logged as a warning.
    """
    if reg < 0.0:
        raise InvalidInputError(f"regularization must be non-negative, got {reg}")
    if users is not None:
        ratings = ratings.with_users(users)
    index = items.id_index()
    unknown = [item for item in ratings.items if item not in index]
    if unknown:
        raise InvalidInputError(f"{len(unknown)} rated items have no embedding, e.g. {unknown[0]!r}")
    # table item index -> embedding row
    item_rows = np.asarray([index[item] for item in ratings.items], dtype=np.int64)

    vectors = np.zeros((len(ratings.users), items.dim))
    without_ratings = 0
    for row, (rated, values) in enumerate(ratings.grouped("user")):
        if not len(rated):
            without_ratings += 1
            continue
        vectors[row] = ridge_solve(items.vectors[item_rows[rated]], values, reg)
    if without_ratings:
        logger.warning("cold_users_without_ratings", count=without_ratings)
    logger.info("cold_users_fitted", users=len(ratings.users), reg=reg)
    return EmbeddingMatrix(vectors=vectors, ids=ratings.users)
