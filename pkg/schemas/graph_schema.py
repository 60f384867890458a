from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator


class GraphMode(str, Enum):
    exact = "exact"
    approximate = "approximate"


class InsertionOrder(str, Enum):
    input = "input"
    shuffle = "shuffle"
    norm = "norm"


class ProximityGraph(BaseModel):
    """Directed inner-product proximity graph over internal item indices.

    Exact graphs hold exactly k out-edges per node. Approximate graphs hold at
    most k forward edges plus accepted reverse edges, capped at max_degree (2k).
    Each adjacency row is ordered by inner product with its source, best first.
    """

    model_config = ConfigDict(frozen=True)

    n: int
    k: int
    max_degree: int
    adjacency: tuple[tuple[int, ...], ...]
    entry_point: int
    mode: GraphMode

    @model_validator(mode="after")
    def check_edges(self) -> "ProximityGraph":
        if self.n < 1:
            raise ValueError("graph must have at least one node")
        if len(self.adjacency) != self.n:
            raise ValueError(f"{len(self.adjacency)} adjacency rows for {self.n} nodes")
        if not 0 <= self.entry_point < self.n:
            raise ValueError(f"entry point {self.entry_point} outside [0, {self.n})")
        for source, row in enumerate(self.adjacency):
            if len(row) > self.max_degree:
                raise ValueError(f"node {source} has out-degree {len(row)} > {self.max_degree}")
            if self.mode == GraphMode.exact and len(row) != self.k:
                raise ValueError(f"exact node {source} has out-degree {len(row)} != {self.k}")
            if len(set(row)) != len(row):
                raise ValueError(f"node {source} has duplicate out-edges")
            for target in row:
                if target == source:
                    raise ValueError(f"node {source} has a self-loop")
                if not 0 <= target < self.n:
                    raise ValueError(f"edge {source}->{target} points outside the graph")
        return self

    def in_degrees(self) -> np.ndarray:
        targets = [t for row in self.adjacency for t in row]
        return np.bincount(np.asarray(targets, dtype=np.int64), minlength=self.n)

    def out_degrees(self) -> np.ndarray:
        return np.asarray([len(row) for row in self.adjacency], dtype=np.int64)

    @property
    def edge_count(self) -> int:
        return sum(len(row) for row in self.adjacency)


class SearchParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    ef: int = 200
    k_out: int = 1

    @model_validator(mode="after")
    def check_beam(self) -> "SearchParams":
        if not self.ef >= self.k_out >= 1:
            raise ValueError(f"need ef >= k_out >= 1, got ef={self.ef}, k_out={self.k_out}")
        return self
