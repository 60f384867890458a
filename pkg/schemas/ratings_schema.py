from typing import Any, Iterable, Iterator, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, field_validator, model_validator


class RatingsTable(BaseModel):
    """(user, item, rating) triples with user/item id maps.

    `user_index[j]` and `item_index[j]` point into `users` and `items`. The
    user map may list users without any rating (e.g. after filtering).
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    users: tuple[str, ...]
    items: tuple[str, ...]
    user_index: np.ndarray
    item_index: np.ndarray
    ratings: np.ndarray

    @field_validator("user_index", "item_index", mode="before")
    @classmethod
    def as_index_array(cls, value: Any) -> np.ndarray:
        arr = np.array(value, dtype=np.int64).reshape(-1)
        arr.setflags(write=False)
        return arr

    @field_validator("ratings", mode="before")
    @classmethod
    def as_rating_array(cls, value: Any) -> np.ndarray:
        arr = np.array(value, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(arr)):
            raise ValueError("ratings must be finite")
        arr.setflags(write=False)
        return arr

    @model_validator(mode="after")
    def check_alignment(self) -> "RatingsTable":
        if not (len(self.user_index) == len(self.item_index) == len(self.ratings)):
            raise ValueError("user, item and rating columns differ in length")
        if len(self.ratings):
            if self.user_index.min() < 0 or self.user_index.max() >= len(self.users):
                raise ValueError("user index out of range")
            if self.item_index.min() < 0 or self.item_index.max() >= len(self.items):
                raise ValueError("item index out of range")
        return self

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> "RatingsTable":
        """Builds a table from `user`, `item` and `rating` columns.

        A repeated (user, item) pair keeps its last rating at the position of
        its first occurrence. Users and items are numbered by first appearance.
        """
        frame = frame.astype({"user": str, "item": str, "rating": np.float64})
        latest = frame.groupby(["user", "item"], sort=False)["rating"].last().reset_index()
        user_index, users = pd.factorize(latest["user"])
        item_index, items = pd.factorize(latest["item"])
        return cls(
            users=tuple(users),
            items=tuple(items),
            user_index=user_index,
            item_index=item_index,
            ratings=latest["rating"].to_numpy(),
        )

    @classmethod
    def from_triples(cls, triples: Iterable[tuple[Any, Any, float]]) -> "RatingsTable":
        return cls.from_frame(pd.DataFrame(list(triples), columns=["user", "item", "rating"]))

    def __len__(self) -> int:
        return len(self.ratings)

    def triples(self) -> Iterator[tuple[str, str, float]]:
        for u, i, r in zip(self.user_index, self.item_index, self.ratings):
            yield self.users[u], self.items[i], float(r)

    def restrict_users(self, user_ids: Sequence[str]) -> "RatingsTable":
        """Keeps the given users (in the given order) and the items they rated."""
        keep = set(user_ids)
        return RatingsTable.from_triples(t for t in self.triples() if t[0] in keep).with_users(user_ids)

    def restrict_items(self, item_ids: Sequence[str]) -> "RatingsTable":
        """Drops ratings on unknown items; every user stays in the user map."""
        keep = set(item_ids)
        return RatingsTable.from_triples(t for t in self.triples() if t[1] in keep).with_users(self.users)

    def with_users(self, user_ids: Sequence[str]) -> "RatingsTable":
        """Re-indexes the table against a given user order (users may have no ratings)."""
        order = {u: i for i, u in enumerate(user_ids)}
        missing = set(self.users) - set(order)
        if missing:
            raise ValueError(f"{len(missing)} rated users missing from the user order")
        remap = np.asarray([order[u] for u in self.users], dtype=np.int64)
        return RatingsTable(
            users=tuple(user_ids),
            items=self.items,
            user_index=remap[self.user_index] if len(self.ratings) else [],
            item_index=self.item_index,
            ratings=self.ratings,
        )

    def grouped(self, by: str) -> list[tuple[np.ndarray, np.ndarray]]:
        """Per user (by="user") or per item (by="item"): (counterpart indices, ratings)."""
        if by == "user":
            keys, others, size = self.user_index, self.item_index, len(self.users)
        elif by == "item":
            keys, others, size = self.item_index, self.user_index, len(self.items)
        else:
            raise ValueError(f"unknown grouping {by!r}")
        positions = pd.Series(keys).groupby(keys, sort=True).indices if len(keys) else {}
        empty = np.empty(0, dtype=np.int64)
        return [
            (others[positions.get(g, empty)], self.ratings[positions.get(g, empty)])
            for g in range(size)
        ]
