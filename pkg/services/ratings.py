"""Rating-triple ingestion and warm/cold splitting."""
import io
from pathlib import Path
from typing import Union

import numpy as np
import pandas as pd
import structlog

from schemas.embedding_schema import EmbeddingMatrix
from schemas.ratings_schema import RatingsTable
from services.errors import InvalidInputError, RatingsFormatError

logger = structlog.get_logger(__name__)

HEADER_TOKENS = {"user", "userid", "user_id", "uid"}

# checked per line in this order; the first failing check names the error
_LINE_CHECKS = {
    "fields": "expected 3 or 4 fields, got {fields}",
    "number": "rating {rating!r} is not a number",
    "finite": "rating {rating!r} is not finite",
    "ids": "user and item ids must be non-empty",
}


def _sniff_delimiter(line: str) -> str:
    return "\t" if "\t" in line else ","


def _read_cells(text: str, sep: str) -> tuple[pd.DataFrame, pd.Series]:
    """Every physical line becomes one row (blank lines included) so row + 1 is the line number."""
    columns = max(3, max(line.count(sep) for line in text.splitlines()) + 1)
    try:
        frame = pd.read_csv(io.StringIO(text), sep=sep, header=None, names=list(range(columns)),
                            dtype=str, keep_default_na=False, skip_blank_lines=False, engine="python")
    except pd.errors.ParserError as exc:
        raise RatingsFormatError(f"unreadable ratings file: {exc}") from None
    width = frame.notna().sum(axis=1)
    cells = frame.fillna("").apply(lambda column: column.str.strip())
    return cells, width


def load_ratings(path: Union[str, Path]) -> RatingsTable:
    """Reads `user,item,rating[,timestamp]` lines (tab or comma separated).

    Line 1 may be a header, recognised by a non-numeric rating field. The
    timestamp column is ignored. Ids stay strings exactly as written.
    """
    path = Path(path)
    if not path.exists():
        raise InvalidInputError(f"ratings file {path} does not exist")
    text = path.read_text(encoding="utf-8")
    if not text.strip():
        raise RatingsFormatError(f"ratings file {path} is empty")
    sep = _sniff_delimiter(next(line for line in text.splitlines() if line.strip()))

    cells, width = _read_cells(text, sep)
    user, item, raw = cells[0], cells[1], cells[2]
    rating = pd.to_numeric(raw, errors="coerce").astype(np.float64)

    keep = ~cells.eq("").all(axis=1)
    if (width.iloc[0] in (3, 4) and np.isnan(rating.iloc[0])
            and (user.iloc[0].lower() in HEADER_TOKENS or raw.iloc[0].isalpha())):
        keep.iloc[0] = False

    failures = pd.DataFrame({
        "fields": ~width.isin((3, 4)),
        "number": rating.isna(),
        "finite": ~np.isfinite(rating),
        "ids": user.eq("") | item.eq(""),
    })[keep]
    offending = failures.any(axis=1)
    if offending.any():
        row = offending.idxmax()
        check = failures.loc[row].idxmax()
        message = _LINE_CHECKS[check].format(fields=int(width[row]), rating=raw[row])
        raise RatingsFormatError(message, line=int(row) + 1)

    frame = pd.DataFrame({"user": user[keep], "item": item[keep], "rating": rating[keep]})
    if frame.empty:
        raise RatingsFormatError(f"ratings file {path} has no rating lines")
    table = RatingsTable.from_frame(frame)
    logger.info("ratings_loaded", path=str(path), ratings=len(table), users=len(table.users),
                items=len(table.items))
    return table


def _split_counts(total: int, ratio: tuple[int, int]) -> int:
    warm_part, cold_part = ratio
    if warm_part < 1 or cold_part < 1:
        raise InvalidInputError(f"split ratio parts must be positive, got {ratio}")
    if total < 2:
        raise InvalidInputError(f"splitting needs at least 2 users, got {total}")
    warm = total * warm_part // (warm_part + cold_part)
    # both parts stay non-empty
    return min(max(warm, 1), total - 1)


def split_users(ratings: RatingsTable, ratio: tuple[int, int] = (4, 1),
                seed: int = 0) -> tuple[RatingsTable, RatingsTable]:
    """Seeded user-level split; all of a user's ratings travel together."""
    order = np.random.default_rng(seed).permutation(len(ratings.users))
    warm_count = _split_counts(len(ratings.users), ratio)
    warm_ids = [ratings.users[i] for i in order[:warm_count]]
    cold_ids = [ratings.users[i] for i in order[warm_count:]]
    logger.debug("users_split", warm=len(warm_ids), cold=len(cold_ids), seed=seed)
    return ratings.restrict_users(warm_ids), ratings.restrict_users(cold_ids)


def split_embedding(users: EmbeddingMatrix, ratio: tuple[int, int] = (4, 1),
                    seed: int = 0) -> tuple[EmbeddingMatrix, EmbeddingMatrix]:
    """Same split rule applied directly to a user embedding matrix."""
    order = np.random.default_rng(seed).permutation(users.count)
    warm_count = _split_counts(users.count, ratio)
    return users.take(order[:warm_count].tolist()), users.take(order[warm_count:].tolist())
