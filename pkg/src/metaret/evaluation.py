"""Retrieval metrics, fusion-weight sweeps, and field ablations.

Per query the full ranking is computed once; the four metrics derive from
the rank of the first supporting chunk and the first chunk of the target
document:

* Context@K — % of queries with a supporting chunk at rank <= K
* Title@K   — % of queries with a target-document chunk at rank <= K
* Average Matched Rank — mean first-support rank over queries that matched
  within ``failure_cap`` (failed queries are excluded)
* Retrieval Failure Rate — % of queries with no supporting chunk within
  ``failure_cap``; equals 100 - Context@failure_cap by construction
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .corpus import ALL_FIELDS, Corpus
from .encoder import encode_batch
from .errors import IoFailure, NoQueries
from .fusion import fuse_unified_rows, serialize_metadata
from .index import build_index
from .retrieval import (
    IndexBundle,
    RuleBasedReformulator,
    _masked_records,
    build_bundle,
    late_fusion,
    mat_prefix,
    mat_suffix,
    reformulate_query,
    retrieve_embedded,
    unified,
)

DEFAULT_ALPHAS = tuple(round(a * 0.1, 1) for a in range(11))

# The four canonical ablation conditions: everything masked (plain-equivalent
# baseline), nothing masked, no section titles, no company-and-year fields.
CANONICAL_ABLATIONS: tuple[tuple[str, frozenset[str]], ...] = (
    ("baseline", ALL_FIELDS),
    ("full", frozenset()),
    ("wo_section", frozenset({"section"})),
    ("wo_company_year", frozenset({"company_name", "period_of_report"})),
)


@dataclass
class QueryOutcome:
    """One query's full ranking and the two first-hit ranks (1-based)."""

    query_id: str
    category: str
    ranked_ids: tuple[str, ...]
    first_support_rank: int | None
    first_target_doc_rank: int | None


@dataclass
class MetricsSummary:
    context_at_k: dict[int, float]
    title_at_k: dict[int, float]
    avg_matched_rank: float
    failure_rate: float
    n_queries: int
    failure_cap: int

    def to_dict(self) -> dict:
        rank = self.avg_matched_rank
        return {
            "context_at_k": {str(k): v for k, v in self.context_at_k.items()},
            "title_at_k": {str(k): v for k, v in self.title_at_k.items()},
            "avg_matched_rank": None if math.isnan(rank) else rank,
            "failure_rate": self.failure_rate,
            "n_queries": self.n_queries,
            "failure_cap": self.failure_cap,
        }


def _outcome(corpus: Corpus, query, ranking: Sequence[tuple[str, float]]) -> QueryOutcome:
    supporting = set(query.supporting_chunk_ids)
    first_support = first_doc = None
    for rank, (chunk_id, _score) in enumerate(ranking, start=1):
        if first_doc is None and corpus.chunk(chunk_id).doc_key == query.target:
            first_doc = rank
        if chunk_id in supporting:
            first_support = rank
            break
    return QueryOutcome(
        query_id=query.query_id,
        category=query.category,
        ranked_ids=tuple(cid for cid, _ in ranking),
        first_support_rank=first_support,
        first_target_doc_rank=first_doc,
    )


def run_queries(corpus: Corpus, bundle: IndexBundle) -> list[QueryOutcome]:
    """Full ranking per query; queries are embedded once, in one batch."""
    if not corpus.queries:
        raise NoQueries("corpus has no query cases")
    texts = [q.text for q in corpus.queries]
    if bundle.strategy.variant == "reformulated":
        reformulator = bundle.reformulator or RuleBasedReformulator.from_examples(
            bundle.field_examples
        )
        texts = [
            reformulate_query(t, bundle.schema, bundle.field_examples, reformulator)
            for t in texts
        ]
    query_vecs = encode_batch(bundle.encoder, texts)
    n = len(corpus.chunks)
    outcomes = []
    for query, vec in zip(corpus.queries, query_vecs):
        ranking = retrieve_embedded(bundle, vec, n)
        outcomes.append(_outcome(corpus, query, ranking))
    return outcomes


def summarize(
    outcomes: Sequence[QueryOutcome], k_max: int = 10, failure_cap: int = 50
) -> MetricsSummary:
    """Aggregate outcomes into the four metrics at cutoffs 1..k_max."""
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    if failure_cap < k_max:
        raise ValueError("failure_cap must be >= k_max")
    if not outcomes:
        raise NoQueries("no outcomes to summarize")
    n = len(outcomes)
    support_ranks = [o.first_support_rank for o in outcomes]
    doc_ranks = [o.first_target_doc_rank for o in outcomes]

    def pct_at(ranks: Sequence[int | None], k: int) -> float:
        hits = sum(1 for r in ranks if r is not None and r <= k)
        return 100.0 * hits / n

    context = {k: pct_at(support_ranks, k) for k in range(1, k_max + 1)}
    title = {k: pct_at(doc_ranks, k) for k in range(1, k_max + 1)}
    matched = [r for r in support_ranks if r is not None and r <= failure_cap]
    avg_rank = float(np.mean(matched)) if matched else float("nan")
    failure_rate = 100.0 - pct_at(support_ranks, failure_cap)
    return MetricsSummary(
        context_at_k=context,
        title_at_k=title,
        avg_matched_rank=avg_rank,
        failure_rate=failure_rate,
        n_queries=n,
        failure_cap=failure_cap,
    )


def summarize_by_category(
    outcomes: Sequence[QueryOutcome], k_max: int = 10, failure_cap: int = 50
) -> dict[str, MetricsSummary]:
    by_cat: dict[str, list[QueryOutcome]] = {}
    for o in outcomes:
        by_cat.setdefault(o.category, []).append(o)
    return {
        cat: summarize(group, k_max, failure_cap) for cat, group in sorted(by_cat.items())
    }


def evaluate_strategy(
    corpus: Corpus, bundle: IndexBundle, k_max: int = 10, failure_cap: int = 50
) -> dict[str, MetricsSummary]:
    """One MetricsSummary per query category present in the corpus."""
    return summarize_by_category(run_queries(corpus, bundle), k_max, failure_cap)


def _assemble_bundle(strategy, encoder, ids, text_rows, meta_rows) -> IndexBundle:
    """Build a fusion bundle from already-encoded matrices (no re-encoding)."""
    tag = strategy.tag()
    name = encoder.name
    if strategy.variant == "unified":
        fused = fuse_unified_rows(text_rows, meta_rows, strategy.alpha)
        return IndexBundle(
            strategy=strategy,
            encoder=encoder,
            fused_index=build_index(
                zip(ids, fused), normalize=True, encoder_name=name, strategy_tag=tag
            ),
        )
    return IndexBundle(
        strategy=strategy,
        encoder=encoder,
        text_index=build_index(
            zip(ids, text_rows), normalize=True, encoder_name=name, strategy_tag=tag
        ),
        meta_index=build_index(
            zip(ids, meta_rows), normalize=True, encoder_name=name, strategy_tag=tag
        ),
    )


def alpha_sweep(
    corpus: Corpus,
    encoder,
    family: str = "late_fusion",
    alphas: Sequence[float] = DEFAULT_ALPHAS,
    k_max: int = 10,
    failure_cap: int = 50,
    metadata_mask: frozenset[str] = frozenset(),
    max_in_flight: int = 4,
) -> dict[float, dict[str, MetricsSummary]]:
    """Evaluate one fusion family across fusion weights.

    Chunk texts, metadata headers, and query texts are embedded once; each
    alpha re-fuses the cached vectors, so the sweep never re-encodes.
    """
    if family not in ("unified", "late_fusion"):
        raise ValueError("alpha_sweep supports the unified and late_fusion families")
    if not corpus.queries:
        raise NoQueries("corpus has no query cases")
    ids = corpus.chunk_ids()
    records = _masked_records(corpus, frozenset(metadata_mask))
    text_rows = np.stack(encode_batch(encoder, [c.text for c in corpus.chunks], max_in_flight))
    meta_rows = np.stack(
        encode_batch(encoder, [serialize_metadata(r) for r in records], max_in_flight)
    )
    query_vecs = encode_batch(encoder, [q.text for q in corpus.queries])

    results: dict[float, dict[str, MetricsSummary]] = {}
    n = len(corpus.chunks)
    for alpha in alphas:
        strategy = (
            unified(alpha, metadata_mask)
            if family == "unified"
            else late_fusion(alpha, metadata_mask)
        )
        bundle = _assemble_bundle(strategy, encoder, ids, text_rows, meta_rows)
        outcomes = [
            _outcome(corpus, q, retrieve_embedded(bundle, v, n))
            for q, v in zip(corpus.queries, query_vecs)
        ]
        results[float(alpha)] = summarize_by_category(outcomes, k_max, failure_cap)
    return results


def ablation_run(
    corpus: Corpus,
    encoder,
    conditions: Sequence[tuple[str, frozenset[str]]] = CANONICAL_ABLATIONS,
    k_max: int = 10,
    failure_cap: int = 50,
    variant: str = "mat_prefix",
    max_in_flight: int = 4,
) -> dict[str, dict[str, MetricsSummary]]:
    """Evaluate the metadata-as-text strategy under field masks."""
    if not conditions:
        raise ValueError("at least one ablation condition is required")
    make = {"mat_prefix": mat_prefix, "mat_suffix": mat_suffix}[variant]
    results: dict[str, dict[str, MetricsSummary]] = {}
    for name, mask in conditions:
        bundle = build_bundle(corpus, make(mask), encoder, max_in_flight)
        results[name] = evaluate_strategy(corpus, bundle, k_max, failure_cap)
    return results


# ---------------------------------------------------------------------------
# report emission


def metrics_rows(
    results: Mapping[str, Mapping[str, MetricsSummary]], key_name: str = "strategy"
) -> list[dict]:
    """Flatten nested summaries to one row per (key, category, metric, K).

    Scalar metrics (avg_matched_rank, failure_rate) get a single row with an
    empty K column.
    """
    rows: list[dict] = []
    for key, per_category in results.items():
        for category, summary in per_category.items():
            base = {key_name: str(key), "category": category}
            for k, value in summary.context_at_k.items():
                rows.append({**base, "metric": "context_at_k", "K": k, "value": value})
            for k, value in summary.title_at_k.items():
                rows.append({**base, "metric": "title_at_k", "K": k, "value": value})
            rows.append(
                {**base, "metric": "avg_matched_rank", "K": "", "value": summary.avg_matched_rank}
            )
            rows.append({**base, "metric": "failure_rate", "K": "", "value": summary.failure_rate})
    return rows


def _atomic_write(path: Path, payload: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    try:
        tmp.write_text(payload, encoding="utf-8")
        os.replace(tmp, path)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def write_metrics_csv(path, rows: Sequence[Mapping], key_name: str = "strategy") -> None:
    """Deterministic CSV: fixed columns, fixed float formatting."""
    path = Path(path)
    writer_rows = [[key_name, "category", "metric", "K", "value"]]
    for row in rows:
        value = row["value"]
        if isinstance(value, float):
            value = "" if math.isnan(value) else f"{value:.6f}"
        writer_rows.append(
            [str(row[key_name]), row["category"], row["metric"], str(row["K"]), str(value)]
        )
    buffer = io.StringIO()
    csv.writer(buffer, lineterminator="\n").writerows(writer_rows)
    _atomic_write(path, buffer.getvalue())


def summaries_to_json(
    results: Mapping[str, Mapping[str, MetricsSummary]], **extra
) -> dict:
    return {
        **extra,
        "results": {
            str(key): {cat: summary.to_dict() for cat, summary in per_cat.items()}
            for key, per_cat in results.items()
        },
    }


def write_json(path, payload: Mapping) -> None:
    _atomic_write(Path(path), json.dumps(payload, indent=2, sort_keys=True) + "\n")
