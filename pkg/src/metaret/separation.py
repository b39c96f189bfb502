"""Embedding-space separation statistics over chunk pairs.

Pairs of chunks are stratified by document identity: positive pairs share a
doc_key (same company-and-year filing), negative pairs do not. For each
embedding variant the same pair sample is scored with cosine similarity and
summarized by seven statistics:

    mean_margin = mu_pos - mu_neg
    cohens_d    = mean_margin / sqrt((var_pos + var_neg) / 2)
    fisher_f    = mean_margin^2 / (var_pos + var_neg)     (= d^2 / 2)
    auc         = P(pos > neg) + 0.5 * P(tie)             (Mann-Whitney)
    ks_distance = sup |CDF_pos - CDF_neg|
    tail_pos/neg = Pr[cos >= tail_threshold] per stratum

Pairing is exhaustive up to ``_EXHAUSTIVE_LIMIT`` pairs; larger corpora are
sampled per stratum with a seeded generator, so results are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from .corpus import Chunk
from .errors import DimMismatch, EmptyStratum

_EXHAUSTIVE_LIMIT = 25_000_000
_NORM_FLOOR = 1e-12


@dataclass
class SeparationReport:
    mean_margin: float
    cohens_d: float
    fisher_f: float
    auc: float
    ks_distance: float
    tail_pos: float
    tail_neg: float
    n_pos_pairs: int
    n_neg_pairs: int
    tail_threshold: float

    def to_dict(self) -> dict:
        return {
            "mean_margin": self.mean_margin,
            "cohens_d": self.cohens_d,
            "fisher_f": self.fisher_f,
            "auc": self.auc,
            "ks_distance": self.ks_distance,
            "tail_pos": self.tail_pos,
            "tail_neg": self.tail_neg,
            "n_pos_pairs": self.n_pos_pairs,
            "n_neg_pairs": self.n_neg_pairs,
            "tail_threshold": self.tail_threshold,
        }


@dataclass
class PropositionReport:
    """Deltas enriched-vs-plain for cohesion, confusion, and score variance."""

    intra_gain: float
    inter_drop: float
    variance_gain: float
    queries_used: int

    def to_dict(self) -> dict:
        return {
            "intra_gain": self.intra_gain,
            "inter_drop": self.inter_drop,
            "variance_gain": None if np.isnan(self.variance_gain) else self.variance_gain,
            "queries_used": self.queries_used,
        }


def _doc_labels(chunks: Sequence[Chunk]) -> np.ndarray:
    keys: dict = {}
    labels = np.empty(len(chunks), dtype=np.int64)
    for i, chunk in enumerate(chunks):
        labels[i] = keys.setdefault(chunk.doc_key, len(keys))
    return labels


def _normalize_rows(matrix: np.ndarray) -> np.ndarray:
    m = np.asarray(matrix, dtype=np.float64)
    norms = np.linalg.norm(m, axis=1)
    if np.any(norms < _NORM_FLOOR):
        raise ValueError("embedding matrix contains a zero row")
    return m / norms[:, None]


def auc_from_samples(pos: np.ndarray, neg: np.ndarray) -> float:
    """Mann-Whitney AUC with the standard half-credit tie handling."""
    ranks = rankdata(np.concatenate([pos, neg]))
    r_pos = float(ranks[: len(pos)].sum())
    u = r_pos - len(pos) * (len(pos) + 1) / 2.0
    return u / (len(pos) * len(neg))


def ks_from_samples(pos: np.ndarray, neg: np.ndarray) -> float:
    """Two-sample Kolmogorov-Smirnov distance between empirical CDFs."""
    pos_sorted = np.sort(pos)
    neg_sorted = np.sort(neg)
    grid = np.concatenate([pos_sorted, neg_sorted])
    cdf_pos = np.searchsorted(pos_sorted, grid, side="right") / len(pos)
    cdf_neg = np.searchsorted(neg_sorted, grid, side="right") / len(neg)
    return float(np.max(np.abs(cdf_pos - cdf_neg)))


def separation_stats(
    pos: np.ndarray, neg: np.ndarray, tail_threshold: float = 0.8
) -> SeparationReport:
    """The seven separation statistics for one pair of similarity samples."""
    pos = np.asarray(pos, dtype=np.float64)
    neg = np.asarray(neg, dtype=np.float64)
    if len(pos) < 2 or len(neg) < 2:
        raise EmptyStratum(
            f"need at least 2 pairs per stratum, got pos={len(pos)}, neg={len(neg)}"
        )
    margin = float(pos.mean() - neg.mean())
    var_pos = float(pos.var(ddof=1))
    var_neg = float(neg.var(ddof=1))
    pooled = (var_pos + var_neg) / 2.0
    cohens_d = margin / np.sqrt(pooled) if pooled > 0 else 0.0 if margin == 0 else np.inf
    fisher_f = margin**2 / (var_pos + var_neg) if (var_pos + var_neg) > 0 else (
        0.0 if margin == 0 else np.inf
    )
    return SeparationReport(
        mean_margin=margin,
        cohens_d=float(cohens_d),
        fisher_f=float(fisher_f),
        auc=auc_from_samples(pos, neg),
        ks_distance=ks_from_samples(pos, neg),
        tail_pos=float(np.mean(pos >= tail_threshold)),
        tail_neg=float(np.mean(neg >= tail_threshold)),
        n_pos_pairs=int(len(pos)),
        n_neg_pairs=int(len(neg)),
        tail_threshold=tail_threshold,
    )


def _exhaustive_pair_values(hat: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    sims = hat @ hat.T
    iu = np.triu_indices(len(labels), k=1)
    same = labels[iu[0]] == labels[iu[1]]
    values = sims[iu]
    return values[same], values[~same]


def _sample_pairs(
    labels: np.ndarray, n_pos: int, n_neg: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Index pairs (i, j), i != j, for each stratum; seeded and balanced."""
    n = len(labels)
    groups: dict[int, np.ndarray] = {
        lab: np.flatnonzero(labels == lab) for lab in np.unique(labels)
    }
    sizes = {lab: len(idx) for lab, idx in groups.items()}
    weights = np.array([sizes[lab] * (sizes[lab] - 1) / 2 for lab in groups], dtype=np.float64)
    labs = list(groups)

    pos_pairs = np.empty((n_pos, 2), dtype=np.int64)
    probs = weights / weights.sum()
    chosen = rng.choice(len(labs), size=n_pos, p=probs)
    for row, gi in enumerate(chosen):
        idx = groups[labs[gi]]
        i, j = rng.choice(len(idx), size=2, replace=False)
        pos_pairs[row] = (idx[i], idx[j])

    neg_pairs = np.empty((n_neg, 2), dtype=np.int64)
    filled = 0
    while filled < n_neg:
        cand = rng.integers(0, n, size=(2 * (n_neg - filled), 2))
        keep = cand[labels[cand[:, 0]] != labels[cand[:, 1]]]
        take = min(len(keep), n_neg - filled)
        neg_pairs[filled : filled + take] = keep[:take]
        filled += take
    return pos_pairs, neg_pairs


def pair_separation(
    chunks: Sequence[Chunk],
    variants: Mapping[str, np.ndarray],
    pair_budget: int | None = None,
    seed: int = 0,
    tail_threshold: float = 0.8,
) -> dict[str, SeparationReport]:
    """Separation statistics for each embedding variant over one pair sample.

    ``variants`` maps a variant name to its (n_chunks, dim) embedding matrix,
    row-aligned with ``chunks``. All variants are scored on the same pairs so
    their reports are directly comparable. With ``pair_budget=None`` pairing
    is exhaustive up to 25M pairs, then falls back to a budget of 25M.
    """
    if not variants:
        raise ValueError("at least one embedding variant is required")
    labels = _doc_labels(chunks)
    n = len(chunks)
    for name, matrix in variants.items():
        if np.asarray(matrix).shape[0] != n:
            raise DimMismatch(n, np.asarray(matrix).shape[0])

    _, counts = np.unique(labels, return_counts=True)
    total_pos = int((counts * (counts - 1) // 2).sum())
    total_pairs = n * (n - 1) // 2
    total_neg = total_pairs - total_pos
    if total_pos == 0 or total_neg == 0:
        raise EmptyStratum("need both same-document and cross-document pairs")

    budget = pair_budget if pair_budget is not None else _EXHAUSTIVE_LIMIT
    exhaustive = total_pairs <= budget

    reports: dict[str, SeparationReport] = {}
    if exhaustive:
        for name, matrix in variants.items():
            pos, neg = _exhaustive_pair_values(_normalize_rows(matrix), labels)
            reports[name] = separation_stats(pos, neg, tail_threshold)
        return reports

    rng = np.random.default_rng(seed)
    n_pos = min(total_pos, budget // 2)
    n_neg = min(total_neg, budget - n_pos)
    pos_pairs, neg_pairs = _sample_pairs(labels, n_pos, n_neg, rng)
    for name, matrix in variants.items():
        hat = _normalize_rows(matrix)
        pos = np.einsum("ij,ij->i", hat[pos_pairs[:, 0]], hat[pos_pairs[:, 1]])
        neg = np.einsum("ij,ij->i", hat[neg_pairs[:, 0]], hat[neg_pairs[:, 1]])
        reports[name] = separation_stats(pos, neg, tail_threshold)
    return reports


def proposition_check(
    chunks: Sequence[Chunk],
    plain: np.ndarray,
    enriched: np.ndarray,
    query_vecs: Sequence[np.ndarray] | None = None,
) -> PropositionReport:
    """Empirical test of the three embedding-geometry effects.

    intra_gain: mean same-document cosine, enriched minus plain (cohesion).
    inter_drop: mean cross-document cosine, plain minus enriched (confusion).
    variance_gain: variance of query-to-chunk cosines, enriched minus plain,
    over the given query vectors (NaN when none are supplied).
    """
    labels = _doc_labels(chunks)
    plain_hat = _normalize_rows(plain)
    enriched_hat = _normalize_rows(enriched)
    if plain_hat.shape[0] != len(chunks) or enriched_hat.shape[0] != len(chunks):
        raise DimMismatch(len(chunks), plain_hat.shape[0])

    pos_plain, neg_plain = _exhaustive_pair_values(plain_hat, labels)
    pos_enr, neg_enr = _exhaustive_pair_values(enriched_hat, labels)
    if len(pos_plain) == 0 or len(neg_plain) == 0:
        raise EmptyStratum("need both same-document and cross-document pairs")

    if query_vecs is None or len(query_vecs) == 0:
        variance_gain = float("nan")
        queries_used = 0
    else:
        q = _normalize_rows(np.stack([np.asarray(v, dtype=np.float64) for v in query_vecs]))
        variance_gain = float((q @ enriched_hat.T).var() - (q @ plain_hat.T).var())
        queries_used = len(query_vecs)

    return PropositionReport(
        intra_gain=float(pos_enr.mean() - pos_plain.mean()),
        inter_drop=float(neg_plain.mean() - neg_enr.mean()),
        variance_gain=variance_gain,
        queries_used=queries_used,
    )
