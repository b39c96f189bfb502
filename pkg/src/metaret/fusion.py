"""Metadata serialization and the vector math behind index fusion.

All vector functions are pure, accept any real 1-D array-like, do their
arithmetic in float64, and return float64 arrays.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np

from .errors import DegenerateFusion, DimMismatch, ZeroVector

if TYPE_CHECKING:
    from .corpus import MetadataRecord

# Fixed serialization order (schema order) with shortened, human-readable
# header keys. Determinism of the header string matters: it feeds both the
# metadata encoder and the metadata-as-text concatenation.
FIELD_ORDER: tuple[tuple[str, str], ...] = (
    ("company_name", "company"),
    ("form_type", "form"),
    ("section", "section"),
    ("fiscal_year_end", "year_end"),
    ("period_of_report", "period"),
    ("filed_date", "filed"),
    ("exchange_listings", "exchanges"),
    ("sic_code", "sic"),
)

HEADER_SEPARATOR = "\n"
MAT_VARIANTS = ("prefix", "suffix")

_NORM_FLOOR = 1e-12


def serialize_metadata(record: "MetadataRecord") -> str:
    """Render a metadata record as a compact ``key: value; ...`` header.

    Fields appear in schema order; absent fields are omitted entirely; list
    values are joined with ``", "``. An empty record serializes to ``""``.
    """
    values = record.to_dict()
    parts = []
    for field, short in FIELD_ORDER:
        if field not in values:
            continue
        value = values[field]
        if isinstance(value, (list, tuple)):
            value = ", ".join(value)
        parts.append(f"{short}: {value}")
    return "; ".join(parts)


def build_mat_text(record: "MetadataRecord", chunk_text: str, variant: str) -> str:
    """Concatenate the serialized metadata header with the chunk text.

    ``variant`` is ``"prefix"`` (header first) or ``"suffix"`` (header last).
    An empty header degenerates to the chunk text alone, with no separator.
    """
    if variant not in MAT_VARIANTS:
        raise ValueError(f"variant must be one of {MAT_VARIANTS}, got {variant!r}")
    if not chunk_text:
        raise ValueError("chunk_text must be non-empty")
    header = serialize_metadata(record)
    if not header:
        return chunk_text
    if variant == "prefix":
        return header + HEADER_SEPARATOR + chunk_text
    return chunk_text + HEADER_SEPARATOR + header


def _as_vector(v) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {arr.shape}")
    return arr


def l2_normalize(v) -> np.ndarray:
    """Scale ``v`` to unit Euclidean norm. Raises ZeroVector below 1e-12."""
    arr = _as_vector(v)
    norm = float(np.linalg.norm(arr))
    if norm < _NORM_FLOOR:
        raise ZeroVector("cannot normalize a (near-)zero vector")
    return arr / norm


def cosine(a, b) -> float:
    """Cosine similarity, clamped to [-1, 1] against float rounding."""
    va, vb = _as_vector(a), _as_vector(b)
    if va.shape[0] != vb.shape[0]:
        raise DimMismatch(va.shape[0], vb.shape[0])
    na, nb = float(np.linalg.norm(va)), float(np.linalg.norm(vb))
    if na < _NORM_FLOOR or nb < _NORM_FLOOR:
        raise ZeroVector("cosine undefined for zero vectors")
    return float(np.clip(np.dot(va, vb) / (na * nb), -1.0, 1.0))


def check_alpha(alpha: float) -> float:
    """Validate a fusion weight; returns it as a plain float."""
    a = float(alpha)
    if not 0.0 <= a <= 1.0:
        raise ValueError(f"fusion weight must be in [0, 1], got {alpha!r}")
    return a


def fuse_unified(e_text, e_meta, alpha: float) -> np.ndarray:
    """Renormalized convex combination of text and metadata embeddings.

    Both inputs are L2-normalized, combined as
    ``alpha * text_hat + (1 - alpha) * meta_hat``, and the result is
    renormalized, so a single index keeps dimension d. ``alpha`` weights the
    text side: 1.0 collapses to the normalized text vector, 0.0 to the
    normalized metadata vector (returned exactly in those two cases).
    """
    a = check_alpha(alpha)
    vt, vm = _as_vector(e_text), _as_vector(e_meta)
    if vt.shape[0] != vm.shape[0]:
        raise DimMismatch(vt.shape[0], vm.shape[0])
    text_hat = l2_normalize(vt)
    if a == 1.0:
        return text_hat
    meta_hat = l2_normalize(vm)
    if a == 0.0:
        return meta_hat
    combo = a * text_hat + (1.0 - a) * meta_hat
    norm = float(np.linalg.norm(combo))
    if norm < _NORM_FLOOR:
        raise DegenerateFusion(
            "convex combination vanished (antipodal inputs); "
            "this cannot happen with real encoder outputs"
        )
    return combo / norm


def fuse_unified_rows(text_rows: np.ndarray, meta_rows: np.ndarray, alpha: float) -> np.ndarray:
    """Row-wise ``fuse_unified`` over two aligned (n, d) matrices."""
    a = check_alpha(alpha)
    text_rows = np.asarray(text_rows, dtype=np.float64)
    meta_rows = np.asarray(meta_rows, dtype=np.float64)
    if text_rows.shape != meta_rows.shape:
        raise DimMismatch(text_rows.shape[-1], meta_rows.shape[-1])

    def _norm_rows(m: np.ndarray) -> np.ndarray:
        norms = np.linalg.norm(m, axis=1)
        if np.any(norms < _NORM_FLOOR):
            raise ZeroVector("zero row cannot be normalized")
        return m / norms[:, None]

    text_hat = _norm_rows(text_rows)
    if a == 1.0:
        return text_hat
    meta_hat = _norm_rows(meta_rows)
    if a == 0.0:
        return meta_hat
    combo = a * text_hat + (1.0 - a) * meta_hat
    norms = np.linalg.norm(combo, axis=1)
    if np.any(norms < _NORM_FLOOR):
        raise DegenerateFusion("convex combination vanished for at least one row")
    return combo / norms[:, None]
