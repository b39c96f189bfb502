"""In-memory dense vector index: exact cosine top-K and binary persistence.

The scan is exact brute force (no approximation): corpora in the target size
range are a few thousand rows, and metric reproduction requires exact ranks.
Ties are broken by ascending chunk_id so rankings are total and reproducible.

File format (all little-endian): magic ``MRIX1`` | dim uint32 | rows uint64 |
normalized uint8 | encoder_name (uint16 len + utf8) | strategy_tag (uint16
len + utf8) | per-id uint16 len + utf8 | row-major float32 matrix | sha256 of
everything before it.
"""

from __future__ import annotations

import hashlib
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import CorruptIndex, DimMismatch, DuplicateId, IoFailure, ZeroVector

_MAGIC = b"MRIX1"
_NORM_FLOOR = 1e-12


@dataclass
class VectorIndex:
    """Row-per-chunk float32 matrix plus aligned chunk ids."""

    ids: tuple[str, ...]
    matrix: np.ndarray
    normalized: bool
    encoder_name: str = ""
    strategy_tag: str = ""
    _ids_arr: np.ndarray = field(init=False, repr=False, compare=False)
    _row_norms: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.matrix.ndim != 2:
            raise ValueError("matrix must be 2-D")
        if len(self.ids) != self.matrix.shape[0]:
            raise ValueError("ids and matrix row count differ")
        self._ids_arr = np.asarray(self.ids)
        self._row_norms = np.linalg.norm(self.matrix.astype(np.float64), axis=1)

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])

    def __len__(self) -> int:
        return int(self.matrix.shape[0])


def build_index(
    entries: Iterable[tuple[str, Sequence[float]]],
    normalize: bool,
    encoder_name: str = "",
    strategy_tag: str = "",
) -> VectorIndex:
    """Assemble an index from ``(chunk_id, vector)`` pairs, in input order."""
    entries = list(entries)
    if not entries:
        raise ValueError("cannot build an index from zero entries")
    ids = tuple(cid for cid, _ in entries)
    seen: set[str] = set()
    for cid in ids:
        if cid in seen:
            raise DuplicateId(cid)
        seen.add(cid)

    dim = len(np.asarray(entries[0][1]).ravel())
    rows = np.empty((len(entries), dim), dtype=np.float64)
    for i, (cid, vec) in enumerate(entries):
        arr = np.asarray(vec, dtype=np.float64).ravel()
        if arr.shape[0] != dim:
            raise DimMismatch(dim, arr.shape[0])
        rows[i] = arr
    if normalize:
        norms = np.linalg.norm(rows, axis=1)
        if np.any(norms < _NORM_FLOOR):
            bad = ids[int(np.argmin(norms))]
            raise ZeroVector(f"cannot normalize zero row for chunk {bad!r}")
        rows /= norms[:, None]
    return VectorIndex(
        ids=ids,
        matrix=rows.astype(np.float32),
        normalized=normalize,
        encoder_name=encoder_name,
        strategy_tag=strategy_tag,
    )


def rank_scores(ids_arr: np.ndarray, scores: np.ndarray, k: int) -> list[tuple[str, float]]:
    """Order by descending score, ties by ascending id; keep the first k."""
    order = np.lexsort((ids_arr, -scores))
    top = order[: min(k, len(order))]
    return [(str(ids_arr[i]), float(scores[i])) for i in top]


def cosine_scores(index: VectorIndex, query: Sequence[float]) -> np.ndarray:
    """Cosine similarity of ``query`` against every row, clamped to [-1, 1]."""
    q = np.asarray(query, dtype=np.float64).ravel()
    if q.shape[0] != index.dim:
        raise DimMismatch(index.dim, q.shape[0])
    qnorm = float(np.linalg.norm(q))
    if qnorm < _NORM_FLOOR:
        raise ZeroVector("query vector is zero")
    sims = index.matrix.astype(np.float64) @ q
    sims /= index._row_norms * qnorm
    return np.clip(sims, -1.0, 1.0)


def topk(index: VectorIndex, query: Sequence[float], k: int) -> list[tuple[str, float]]:
    """Exact top-k by cosine similarity; returns min(k, N) results."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return rank_scores(index._ids_arr, cosine_scores(index, query), k)


def full_ranking(index: VectorIndex, query: Sequence[float]) -> list[tuple[str, float]]:
    """The complete ranking over all rows; equals ``topk`` with k = N."""
    return topk(index, query, len(index))


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ValueError(f"string too long to persist ({len(raw)} bytes)")
    return struct.pack("<H", len(raw)) + raw


class _Reader:
    def __init__(self, blob: bytes, path):
        self.blob = blob
        self.offset = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.offset + n > len(self.blob):
            raise CorruptIndex(self.path, "file is truncated")
        out = self.blob[self.offset : self.offset + n]
        self.offset += n
        return out

    def take_str(self) -> str:
        (n,) = struct.unpack("<H", self.take(2))
        return self.take(n).decode("utf-8")


def save_index(index: VectorIndex, path) -> None:
    """Persist an index; the write is atomic (temp file + rename)."""
    path = Path(path)
    parts = [
        _MAGIC,
        struct.pack("<IQB", index.dim, len(index), int(index.normalized)),
        _pack_str(index.encoder_name),
        _pack_str(index.strategy_tag),
    ]
    parts.extend(_pack_str(cid) for cid in index.ids)
    parts.append(np.ascontiguousarray(index.matrix, dtype="<f4").tobytes())
    body = b"".join(parts)
    checksum = hashlib.sha256(body).digest()
    tmp = path.with_suffix(path.suffix + ".tmp")
    try:
        tmp.write_bytes(body + checksum)
        os.replace(tmp, path)
    except OSError as exc:
        raise IoFailure(f"cannot write index {path}: {exc}") from exc


def load_index(path) -> VectorIndex:
    """Load a persisted index, verifying magic and whole-file checksum."""
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read index {path}: {exc}") from exc
    if len(blob) < len(_MAGIC) + 32:
        raise CorruptIndex(path, "file is truncated")
    body, checksum = blob[:-32], blob[-32:]
    if hashlib.sha256(body).digest() != checksum:
        raise CorruptIndex(path, "checksum mismatch")
    reader = _Reader(body, path)
    if reader.take(len(_MAGIC)) != _MAGIC:
        raise CorruptIndex(path, "bad magic")
    try:
        dim, rows, normalized = struct.unpack("<IQB", reader.take(13))
        encoder_name = reader.take_str()
        strategy_tag = reader.take_str()
        ids = tuple(reader.take_str() for _ in range(rows))
        matrix = np.frombuffer(reader.take(rows * dim * 4), dtype="<f4").reshape(rows, dim)
    except (struct.error, UnicodeDecodeError, ValueError) as exc:
        raise CorruptIndex(path, f"unreadable structure: {exc}") from exc
    if reader.offset != len(body):
        raise CorruptIndex(path, "trailing bytes after matrix")
    return VectorIndex(
        ids=ids,
        matrix=matrix.copy(),
        normalized=bool(normalized),
        encoder_name=encoder_name,
        strategy_tag=strategy_tag,
    )
