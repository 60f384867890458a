from enum import Enum

from pydantic import BaseModel, ConfigDict, model_validator


class Method(str, Enum):
    max_norm = "max_norm"
    max_in_degree = "max_in_degree"
    user_expectation = "user_expectation"
    ipgs = "ipgs"
    submodular = "submodular"
    hull = "hull"
    optimal = "optimal"
    # a ranking read from a file; no selector produced it
    external = "external"


# Rank order is insertion order (or ascending index), not a sorted score
UNSORTED_METHODS = frozenset({Method.submodular, Method.hull, Method.optimal, Method.external})


class SelectionResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    method: Method
    indices: tuple[int, ...]
    ranked_ids: tuple[str, ...]
    scores: tuple[float, ...]
    m: int

    @model_validator(mode="after")
    def check_ranking(self) -> "SelectionResult":
        if not (len(self.indices) == len(self.ranked_ids) == len(self.scores) == self.m):
            raise ValueError(
                f"ranking lengths {len(self.indices)}/{len(self.ranked_ids)}/{len(self.scores)} do not match m={self.m}"
            )
        if len(set(self.indices)) != len(self.indices):
            raise ValueError("ranking contains duplicate items")
        if self.method not in UNSORTED_METHODS:
            for before, after in zip(self.scores, self.scores[1:]):
                if after > before:
                    raise ValueError(f"{self.method.value} scores must be non-increasing")
        return self

    def head(self, m: int) -> "SelectionResult":
        return SelectionResult(
            method=self.method,
            indices=self.indices[:m],
            ranked_ids=self.ranked_ids[:m],
            scores=self.scores[:m],
            m=m,
        )


class TopResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    user_index: int
    item_indices: tuple[int, ...]
    values: tuple[float, ...]
