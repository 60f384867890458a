from typing import Any, Iterable, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator


class EmbeddingMatrix(BaseModel):
    """N fixed-dimension float64 vectors with stable external ids.

    Row i of `vectors` belongs to `ids[i]`. The array is stored read-only so the
    matrix can be shared freely between threads.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    vectors: np.ndarray
    ids: tuple[str, ...]

    @model_validator(mode="before")
    @classmethod
    def default_ids(cls, data: Any) -> Any:
        if isinstance(data, dict) and data.get("ids") is None:
            count = len(data.get("vectors", ()))
            data = {**data, "ids": tuple(str(i) for i in range(count))}
        return data

    @field_validator("vectors", mode="before")
    @classmethod
    def as_float_matrix(cls, value: Any) -> np.ndarray:
        arr = np.array(value, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"vectors must be a 2-D array, got {arr.ndim} dimension(s)")
        if arr.shape[1] < 1:
            raise ValueError("vectors must have a positive dimension")
        if not np.all(np.isfinite(arr)):
            raise ValueError("vectors must contain only finite values")
        arr.setflags(write=False)
        return arr

    @field_validator("ids", mode="before")
    @classmethod
    def as_string_ids(cls, value: Iterable[Any]) -> tuple[str, ...]:
        return tuple(str(v) for v in value)

    @model_validator(mode="after")
    def check_ids(self) -> "EmbeddingMatrix":
        if len(self.ids) != self.vectors.shape[0]:
            raise ValueError(f"{len(self.ids)} ids for {self.vectors.shape[0]} vectors")
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("ids must be unique")
        return self

    @classmethod
    def from_array(cls, vectors: Any, ids: Optional[Sequence[Any]] = None) -> "EmbeddingMatrix":
        return cls(vectors=vectors, ids=ids)

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    @property
    def count(self) -> int:
        return int(self.vectors.shape[0])

    def id_index(self) -> dict[str, int]:
        return {external: i for i, external in enumerate(self.ids)}

    def take(self, indices: Sequence[int]) -> "EmbeddingMatrix":
        indices = list(indices)
        return EmbeddingMatrix(vectors=self.vectors[indices], ids=[self.ids[i] for i in indices])


class SelectionProblem(BaseModel):
    model_config = ConfigDict(frozen=True)

    items: EmbeddingMatrix
    users: EmbeddingMatrix
    m: int

    @model_validator(mode="after")
    def check_shapes(self) -> "SelectionProblem":
        if self.items.dim != self.users.dim:
            raise ValueError(f"item dim {self.items.dim} differs from user dim {self.users.dim}")
        if not 1 <= self.m <= self.items.count:
            raise ValueError(f"m must be in [1, {self.items.count}], got {self.m}")
        return self
