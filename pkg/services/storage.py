"""Embedding and graph files.

Text embeddings: line 1 `N D`, then one line per row holding the external id
and D reals, space separated. Binary embeddings: magic `ITEMSEL\\0`, uint32
version, uint64 N, uint64 D, then per row a uint32-length-prefixed UTF-8 id
followed by D little-endian float64 values.
"""
import struct
from pathlib import Path
from typing import Union

import numpy as np
import structlog

from schemas.embedding_schema import EmbeddingMatrix
from schemas.graph_schema import GraphMode, ProximityGraph
from services.errors import InvalidInputError

logger = structlog.get_logger(__name__)

PathLike = Union[str, Path]

BINARY_MAGIC = b"ITEMSEL\0"
BINARY_VERSION = 1
GRAPH_MAGIC = "ipgraph"
GRAPH_VERSION = 1


def _fail(path: Path, message: str, line: int | None = None) -> InvalidInputError:
    where = f"{path}:{line}" if line is not None else str(path)
    return InvalidInputError(f"{where}: {message}")


def write_embedding_text(matrix: EmbeddingMatrix, path: PathLike) -> None:
    path = Path(path)
    lines = [f"{matrix.count} {matrix.dim}"]
    for external, row in zip(matrix.ids, matrix.vectors.tolist()):
        if not external or any(c.isspace() for c in external):
            raise InvalidInputError(f"id {external!r} cannot be written to a text embedding file")
        lines.append(" ".join([external, *(repr(v) for v in row)]))
    try:
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as exc:
        raise _fail(path, f"cannot write embedding file ({exc.strerror})") from exc


def read_embedding_text(path: PathLike) -> EmbeddingMatrix:
    path = Path(path)
    try:
        lines = [line for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
    except OSError as exc:
        raise _fail(path, f"cannot read embedding file ({exc.strerror})") from exc
    if not lines:
        raise _fail(path, "embedding file is empty")
    try:
        n, d = (int(tok) for tok in lines[0].split())
    except ValueError:
        raise _fail(path, "header must be 'N D'", line=1) from None
    if len(lines) - 1 != n:
        raise _fail(path, f"header announces {n} rows, found {len(lines) - 1}")
    ids, rows = [], []
    for number, line in enumerate(lines[1:], start=2):
        tokens = line.split()
        if len(tokens) != d + 1:
            raise _fail(path, f"expected an id and {d} values, got {len(tokens)} fields", line=number)
        try:
            rows.append([float(tok) for tok in tokens[1:]])
        except ValueError:
            raise _fail(path, "non-numeric vector value", line=number) from None
        ids.append(tokens[0])
    vectors = np.asarray(rows, dtype=np.float64).reshape(n, d)
    return EmbeddingMatrix(vectors=vectors, ids=ids)


def write_embedding_binary(matrix: EmbeddingMatrix, path: PathLike) -> None:
    path = Path(path)
    chunks = [BINARY_MAGIC, struct.pack("<IQQ", BINARY_VERSION, matrix.count, matrix.dim)]
    values = matrix.vectors.astype("<f8")
    for external, row in zip(matrix.ids, values):
        encoded = external.encode("utf-8")
        chunks.append(struct.pack("<I", len(encoded)))
        chunks.append(encoded)
        chunks.append(row.tobytes())
    try:
        path.write_bytes(b"".join(chunks))
    except OSError as exc:
        raise _fail(path, f"cannot write embedding file ({exc.strerror})") from exc


def read_embedding_binary(path: PathLike) -> EmbeddingMatrix:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise _fail(path, f"cannot read embedding file ({exc.strerror})") from exc
    header_size = len(BINARY_MAGIC) + struct.calcsize("<IQQ")
    if len(data) < header_size or not data.startswith(BINARY_MAGIC):
        raise _fail(path, "not a binary embedding file")
    version, n, d = struct.unpack_from("<IQQ", data, len(BINARY_MAGIC))
    if version != BINARY_VERSION:
        raise _fail(path, f"unsupported binary embedding version {version}")
    offset = header_size
    ids, rows = [], []
    try:
        for _ in range(n):
            (length,) = struct.unpack_from("<I", data, offset)
            offset += 4
            ids.append(data[offset:offset + length].decode("utf-8"))
            offset += length
            if offset + 8 * d > len(data):
                raise _fail(path, "truncated vector data")
            rows.append(np.frombuffer(data, dtype="<f8", count=d, offset=offset))
            offset += 8 * d
    except (struct.error, UnicodeDecodeError) as exc:
        raise _fail(path, f"corrupt row data ({exc})") from exc
    if offset != len(data):
        raise _fail(path, f"{len(data) - offset} trailing bytes")
    vectors = np.vstack(rows) if rows else np.zeros((0, d))
    return EmbeddingMatrix(vectors=vectors.astype(np.float64), ids=ids)


def read_embedding(path: PathLike) -> EmbeddingMatrix:
    """Detects the binary format by its magic bytes, text otherwise."""
    path = Path(path)
    if not path.exists():
        raise _fail(path, "embedding file does not exist")
    with path.open("rb") as handle:
        is_binary = handle.read(len(BINARY_MAGIC)) == BINARY_MAGIC
    return read_embedding_binary(path) if is_binary else read_embedding_text(path)


def write_embedding(matrix: EmbeddingMatrix, path: PathLike, binary: bool = False) -> None:
    (write_embedding_binary if binary else write_embedding_text)(matrix, path)
    logger.info("embedding_written", path=str(path), rows=matrix.count, dim=matrix.dim, binary=binary)


def dump_graph(graph: ProximityGraph, path: PathLike) -> None:
    path = Path(path)
    header = (f"{GRAPH_MAGIC} {GRAPH_VERSION} {graph.n} {graph.k} {graph.max_degree} "
              f"{graph.mode.value} {graph.entry_point}")
    lines = [header] + [" ".join(str(t) for t in row) for row in graph.adjacency]
    try:
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as exc:
        raise _fail(path, f"cannot write graph file ({exc.strerror})") from exc


def load_graph(path: PathLike) -> ProximityGraph:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").split("\n")
    except OSError as exc:
        raise _fail(path, f"cannot read graph file ({exc.strerror})") from exc
    fields = lines[0].split()
    if len(fields) != 7 or fields[0] != GRAPH_MAGIC:
        raise _fail(path, "not an ipgraph file", line=1)
    if int(fields[1]) != GRAPH_VERSION:
        raise _fail(path, f"unsupported graph version {fields[1]}", line=1)
    n, k, max_degree = int(fields[2]), int(fields[3]), int(fields[4])
    mode, entry_point = GraphMode(fields[5]), int(fields[6])
    if len(lines) < n + 1:
        raise _fail(path, f"header announces {n} nodes, found {len(lines) - 1} rows")
    try:
        adjacency = tuple(tuple(int(t) for t in lines[1 + i].split()) for i in range(n))
    except ValueError:
        raise _fail(path, "non-integer neighbour index") from None
    return ProximityGraph(n=n, k=k, max_degree=max_degree, adjacency=adjacency,
                          entry_point=entry_point, mode=mode)
