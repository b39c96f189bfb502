"""The six retrieval strategies, end to end.

A ``StrategyConfig`` names one of: plain, mat_prefix, mat_suffix, unified,
late_fusion, reformulated(base). ``build_bundle`` embeds a corpus into the
index layout the strategy needs; ``retrieve`` embeds the query with the text
encoder (always the text encoder, even against the metadata index) and ranks.

Fusion weight conventions follow the scoring formulas exactly: the unified
index weights the *text* vector by alpha, while late fusion weights the
*metadata* cosine by alpha — so unified(alpha=1) and late_fusion(alpha=0)
both degenerate to the plain content-only ranking.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .corpus import ALL_FIELDS, Corpus
from .encoder import encode_batch
from .errors import RemoteFailure, UnknownField
from .fusion import build_mat_text, check_alpha, fuse_unified_rows, serialize_metadata
from .index import VectorIndex, build_index, cosine_scores, rank_scores, topk

logger = logging.getLogger(__name__)

VARIANTS = ("plain", "mat_prefix", "mat_suffix", "unified", "late_fusion", "reformulated")
_YEAR_PATTERN = re.compile(r"\b(19|20)\d{2}\b")


@dataclass(frozen=True)
class StrategyConfig:
    """Which strategy to run, its fusion weight, and any ablation mask."""

    variant: str
    alpha: float | None = None
    metadata_mask: frozenset[str] = frozenset()
    base: "StrategyConfig | None" = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        needs_alpha = self.variant in ("unified", "late_fusion")
        if needs_alpha:
            if self.alpha is None:
                raise ValueError(f"{self.variant} requires alpha")
            check_alpha(self.alpha)
        elif self.alpha is not None:
            raise ValueError(f"{self.variant} does not take alpha")
        object.__setattr__(self, "metadata_mask", frozenset(self.metadata_mask))
        for name in self.metadata_mask:
            if name not in ALL_FIELDS:
                raise UnknownField(name)
        if self.variant == "reformulated":
            if self.base is None:
                object.__setattr__(self, "base", late_fusion(0.5, self.metadata_mask))
            if self.base.variant == "reformulated":
                raise ValueError("reformulated cannot wrap reformulated")
        elif self.base is not None:
            raise ValueError("base is only valid for the reformulated variant")

    def tag(self) -> str:
        if self.variant in ("unified", "late_fusion"):
            return f"{self.variant}(alpha={self.alpha:g})"
        if self.variant == "reformulated":
            return f"reformulated[{self.base.tag()}]"
        return self.variant

    @classmethod
    def from_dict(cls, data: Mapping) -> "StrategyConfig":
        base = data.get("base")
        return cls(
            variant=data["variant"],
            alpha=data.get("alpha"),
            metadata_mask=frozenset(data.get("metadata_mask", ())),
            base=cls.from_dict(base) if base else None,
        )


def plain(mask: Sequence[str] = ()) -> StrategyConfig:
    return StrategyConfig("plain", metadata_mask=frozenset(mask))


def mat_prefix(mask: Sequence[str] = ()) -> StrategyConfig:
    return StrategyConfig("mat_prefix", metadata_mask=frozenset(mask))


def mat_suffix(mask: Sequence[str] = ()) -> StrategyConfig:
    return StrategyConfig("mat_suffix", metadata_mask=frozenset(mask))


def unified(alpha: float, mask: Sequence[str] = ()) -> StrategyConfig:
    return StrategyConfig("unified", alpha=alpha, metadata_mask=frozenset(mask))


def late_fusion(alpha: float, mask: Sequence[str] = ()) -> StrategyConfig:
    return StrategyConfig("late_fusion", alpha=alpha, metadata_mask=frozenset(mask))


def reformulated(base: StrategyConfig | None = None) -> StrategyConfig:
    return StrategyConfig("reformulated", base=base)


@dataclass
class IndexBundle:
    """The indices a strategy searches, plus the encoder used to build them.

    plain / mat_* carry exactly one ``text_index``; unified carries
    ``fused_index`` only; late_fusion carries ``text_index`` and
    ``meta_index`` with identical id ordering.
    """

    strategy: StrategyConfig
    encoder: object
    text_index: VectorIndex | None = None
    meta_index: VectorIndex | None = None
    fused_index: VectorIndex | None = None
    reformulator: "Reformulator | None" = None
    schema: tuple[str, ...] = ()
    field_examples: dict[str, list[str]] = field(default_factory=dict)

    def __post_init__(self):
        variant = self.strategy.variant
        if variant == "reformulated":
            variant = self.strategy.base.variant
        have = {
            "text": self.text_index is not None,
            "meta": self.meta_index is not None,
            "fused": self.fused_index is not None,
        }
        expected = {
            "plain": {"text": True, "meta": False, "fused": False},
            "mat_prefix": {"text": True, "meta": False, "fused": False},
            "mat_suffix": {"text": True, "meta": False, "fused": False},
            "unified": {"text": False, "meta": False, "fused": True},
            "late_fusion": {"text": True, "meta": True, "fused": False},
        }[variant]
        if have != expected:
            raise ValueError(f"bundle indices {have} do not match strategy {variant!r}")
        if variant == "late_fusion" and self.text_index.ids != self.meta_index.ids:
            raise ValueError("late fusion indices must share one id ordering")

    @property
    def single_index(self) -> VectorIndex:
        return self.fused_index if self.fused_index is not None else self.text_index


def _masked_records(corpus: Corpus, mask: frozenset[str]):
    from .corpus import ablate_metadata

    return [ablate_metadata(c.metadata, mask) for c in corpus.chunks]


def collect_field_examples(corpus: Corpus, per_field: int = 8) -> dict[str, list[str]]:
    """Distinct sample values per metadata field, for reformulation prompts."""
    samples: dict[str, list[str]] = {}
    for chunk in corpus.chunks:
        for name, value in chunk.metadata.to_dict().items():
            values = value if isinstance(value, list) else [value]
            bucket = samples.setdefault(name, [])
            for v in values:
                if v not in bucket and len(bucket) < per_field:
                    bucket.append(v)
    return samples


def build_bundle(
    corpus: Corpus,
    strategy: StrategyConfig,
    encoder,
    max_in_flight: int = 4,
    reformulator: "Reformulator | None" = None,
) -> IndexBundle:
    """Embed the corpus and assemble the indices the strategy requires.

    The metadata mask is applied before any serialization, so ablations
    affect both metadata-as-text and the metadata encoder identically.
    """
    effective = strategy.base if strategy.variant == "reformulated" else strategy
    mask = effective.metadata_mask
    ids = corpus.chunk_ids()
    tag = strategy.tag()
    name = encoder.name

    def _index_over(texts: Sequence[str]) -> VectorIndex:
        vectors = encode_batch(encoder, texts, max_in_flight)
        return build_index(zip(ids, vectors), normalize=True, encoder_name=name, strategy_tag=tag)

    text_index = meta_index = fused_index = None
    if effective.variant == "plain":
        text_index = _index_over([c.text for c in corpus.chunks])
    elif effective.variant in ("mat_prefix", "mat_suffix"):
        position = "prefix" if effective.variant == "mat_prefix" else "suffix"
        records = _masked_records(corpus, mask)
        texts = [build_mat_text(r, c.text, position) for r, c in zip(records, corpus.chunks)]
        text_index = _index_over(texts)
    elif effective.variant in ("unified", "late_fusion"):
        records = _masked_records(corpus, mask)
        headers = [serialize_metadata(r) for r in records]
        text_vecs = encode_batch(encoder, [c.text for c in corpus.chunks], max_in_flight)
        meta_vecs = encode_batch(encoder, headers, max_in_flight)
        if effective.variant == "unified":
            fused = fuse_unified_rows(np.stack(text_vecs), np.stack(meta_vecs), effective.alpha)
            fused_index = build_index(
                zip(ids, fused), normalize=True, encoder_name=name, strategy_tag=tag
            )
        else:
            text_index = build_index(
                zip(ids, text_vecs), normalize=True, encoder_name=name, strategy_tag=tag
            )
            meta_index = build_index(
                zip(ids, meta_vecs), normalize=True, encoder_name=name, strategy_tag=tag
            )
    else:  # pragma: no cover - exhausted by StrategyConfig validation
        raise ValueError(f"unhandled variant {effective.variant!r}")

    schema = sorted({f for c in corpus.chunks for f in c.metadata.present_fields()})
    return IndexBundle(
        strategy=strategy,
        encoder=encoder,
        text_index=text_index,
        meta_index=meta_index,
        fused_index=fused_index,
        reformulator=reformulator,
        schema=tuple(schema),
        field_examples=collect_field_examples(corpus),
    )


def retrieve_embedded(bundle: IndexBundle, query_vec, k: int) -> list[tuple[str, float]]:
    """Rank against an already-embedded query vector."""
    strategy = bundle.strategy
    if strategy.variant == "reformulated":
        strategy = strategy.base
    if strategy.variant == "late_fusion":
        alpha = strategy.alpha
        text_scores = cosine_scores(bundle.text_index, query_vec)
        meta_scores = cosine_scores(bundle.meta_index, query_vec)
        scores = (1.0 - alpha) * text_scores + alpha * meta_scores
        return rank_scores(bundle.text_index._ids_arr, scores, k)
    return topk(bundle.single_index, query_vec, k)


def retrieve(bundle: IndexBundle, query_text: str, k: int) -> list[tuple[str, float]]:
    """Embed the query with the text encoder and rank top-k chunks.

    For the reformulated strategy the query string is rewritten first; the
    rest of the pipeline is unchanged.
    """
    if bundle.strategy.variant == "reformulated":
        query_text = reformulate_query(
            query_text,
            bundle.schema,
            bundle.field_examples,
            bundle.reformulator or RuleBasedReformulator.from_examples(bundle.field_examples),
        )
    query_vec = bundle.encoder.encode(query_text)
    return retrieve_embedded(bundle, query_vec, k)


class Reformulator:
    """Interface: rewrite a query given the metadata schema and sample values."""

    def rewrite(
        self, query: str, schema: Sequence[str], examples: Mapping[str, Sequence[str]]
    ) -> str:
        raise NotImplementedError


class RuleBasedReformulator(Reformulator):
    """Offline fallback: detect company aliases and 4-digit years.

    Detected constraints are appended as a ``company: X; year: Y`` marker
    line; a query with no detectable constraints is returned unchanged.
    """

    def __init__(self, aliases: Mapping[str, str]):
        # alias (lowercased) -> canonical company name
        self.aliases = {a.lower(): canonical for a, canonical in aliases.items()}

    @classmethod
    def from_examples(cls, examples: Mapping[str, Sequence[str]]) -> "RuleBasedReformulator":
        return cls({v: v for v in examples.get("company_name", ())})

    @classmethod
    def from_corpus(cls, corpus: Corpus) -> "RuleBasedReformulator":
        names = {
            c.metadata.company_name for c in corpus.chunks if c.metadata.company_name is not None
        }
        return cls({n: n for n in names})

    def _find_company(self, query: str) -> str | None:
        lowered = query.lower()
        best = None
        for alias, canonical in self.aliases.items():
            if re.search(rf"\b{re.escape(alias)}\b", lowered):
                if best is None or len(alias) > best[0]:
                    best = (len(alias), canonical)
        return best[1] if best else None

    def rewrite(self, query, schema=(), examples=None) -> str:
        constraints = []
        company = self._find_company(query)
        if company:
            constraints.append(f"company: {company}")
        year = _YEAR_PATTERN.search(query)
        if year:
            constraints.append(f"year: {year.group(0)}")
        if not constraints:
            return query
        return query + "\n" + "; ".join(constraints)


class RemoteReformulator(Reformulator):
    """LLM-backed rewriter: one POST per query, schema and examples attached."""

    def __init__(self, endpoint: str, model: str = "", session=None, timeout: float = 60.0):
        self.endpoint = endpoint
        self.model = model
        if session is None:
            import requests

            session = requests.Session()
        self._session = session
        self.timeout = timeout

    def rewrite(self, query, schema=(), examples=None) -> str:
        payload = {
            "query": query,
            "schema": list(schema),
            "examples": {k: list(v) for k, v in (examples or {}).items()},
        }
        if self.model:
            payload["model"] = self.model
        try:
            response = self._session.post(self.endpoint, json=payload, timeout=self.timeout)
        except OSError as exc:
            raise RemoteFailure(0, repr(exc)) from exc
        if response.status_code != 200:
            raise RemoteFailure(response.status_code, response.text)
        try:
            rewritten = response.json()["rewritten"]
        except (KeyError, TypeError, ValueError) as exc:
            raise RemoteFailure(200, f"unparseable reformulation response: {exc}") from exc
        if not isinstance(rewritten, str) or not rewritten:
            raise RemoteFailure(200, "reformulator returned an empty rewrite")
        return rewritten


def reformulate_query(
    query_text: str,
    schema: Sequence[str],
    examples_per_field: Mapping[str, Sequence[str]],
    reformulator: Reformulator,
) -> str:
    """Rewrite a query to surface metadata constraints.

    A RemoteFailure from the given reformulator falls back to the rule-based
    path (built from the sample company names) with a warning; retrieval
    downstream is unchanged either way.
    """
    try:
        return reformulator.rewrite(query_text, schema, examples_per_field)
    except RemoteFailure as exc:
        logger.warning("reformulator failed (%s); falling back to rule-based rewrite", exc)
        fallback = RuleBasedReformulator.from_examples(examples_per_field)
        return fallback.rewrite(query_text, schema, examples_per_field)


def load_alias_table(path) -> dict[str, str]:
    """Read an ``alias<TAB>canonical`` table (one pair per line, # comments)."""
    aliases: dict[str, str] = {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        alias, sep, canonical = line.partition("\t")
        if not sep or not alias.strip() or not canonical.strip():
            raise ValueError(f"bad alias line: {raw!r}")
        aliases[alias.strip()] = canonical.strip()
    return aliases
