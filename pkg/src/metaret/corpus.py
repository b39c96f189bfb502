"""Loading, validation, and chunking of metadata-annotated corpora.

Corpus files are UTF-8 JSONL with a mandatory header line
``{"kind": "header", "schema_version": "1"}`` followed by ``chunk`` and
``query`` records in any order. Loading preserves file order and validates
referential integrity (every cited chunk exists and belongs to the query's
target document).
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field, fields as dc_fields
from datetime import datetime
from pathlib import Path
from typing import Iterable, Mapping

from .errors import (
    DanglingReference,
    InvalidParams,
    IoFailure,
    MalformedRecord,
    MissingHeader,
    UnknownField,
)

SCHEMA_VERSION = "1"

# The flat metadata schema: every record's field set must be a subset.
SCHEMA_FIELDS: tuple[str, ...] = (
    "company_name",
    "form_type",
    "section",
    "fiscal_year_end",
    "period_of_report",
    "filed_date",
    "exchange_listings",
    "sic_code",
)
ALL_FIELDS: frozenset[str] = frozenset(SCHEMA_FIELDS)

_DATE_PATTERNS = {
    "fiscal_year_end": "%m-%d",
    "period_of_report": "%Y-%m-%d",
    "filed_date": "%Y-%m-%d",
}

CATEGORIES = ("general", "in_depth")

_YEAR_RE = re.compile(r"^\d{4}$")


def _check_date(name: str, value: str) -> None:
    try:
        datetime.strptime(value, _DATE_PATTERNS[name])
    except ValueError as exc:
        raise MalformedRecord(None, f"field {name!r}={value!r}: {exc}") from exc


@dataclass(frozen=True)
class MetadataRecord:
    """Flat key-value metadata attached to a chunk. Every field is optional;
    present string fields must be non-empty after trimming."""

    company_name: str | None = None
    form_type: str | None = None
    section: str | None = None
    fiscal_year_end: str | None = None
    period_of_report: str | None = None
    filed_date: str | None = None
    exchange_listings: tuple[str, ...] | None = None
    sic_code: str | None = None

    def __post_init__(self):
        for f in dc_fields(self):
            value = getattr(self, f.name)
            if value is None:
                continue
            if f.name == "exchange_listings":
                if not isinstance(value, (list, tuple)) or not value:
                    raise MalformedRecord(None, "exchange_listings must be a non-empty list")
                listings = tuple(str(v) for v in value)
                for v in listings:
                    if not v.strip():
                        raise MalformedRecord(None, "empty exchange listing")
                object.__setattr__(self, "exchange_listings", listings)
                continue
            if not isinstance(value, str) or not value.strip():
                raise MalformedRecord(None, f"field {f.name!r} must be a non-empty string")
            if f.name in _DATE_PATTERNS:
                _check_date(f.name, value)

    @classmethod
    def from_dict(cls, data: Mapping) -> "MetadataRecord":
        for key in data:
            if key not in ALL_FIELDS:
                raise UnknownField(key)
        return cls(**{k: (tuple(v) if k == "exchange_listings" else v) for k, v in data.items()})

    def to_dict(self) -> dict:
        out = {}
        for f in dc_fields(self):
            value = getattr(self, f.name)
            if value is None:
                continue
            out[f.name] = list(value) if f.name == "exchange_listings" else value
        return out

    def present_fields(self) -> frozenset[str]:
        return frozenset(self.to_dict())


@dataclass(frozen=True)
class DocumentKey:
    """Document identity used for title-level metrics: company + year + form."""

    company: str
    year: str
    form: str

    def __post_init__(self):
        if not (self.company and self.year and self.form):
            raise MalformedRecord(None, "doc_key components must be non-empty")
        if not _YEAR_RE.match(self.year):
            raise MalformedRecord(None, f"doc_key year must be 4 digits, got {self.year!r}")

    @classmethod
    def from_dict(cls, data: Mapping) -> "DocumentKey":
        try:
            return cls(company=data["company"], year=data["year"], form=data["form"])
        except KeyError as exc:
            raise MalformedRecord(None, f"doc_key missing key {exc}") from exc

    def to_dict(self) -> dict:
        return {"company": self.company, "year": self.year, "form": self.form}


@dataclass(frozen=True)
class Chunk:
    """One retrieval unit: a text span plus its metadata and document key."""

    chunk_id: str
    doc_key: DocumentKey
    ordinal: int
    text: str
    metadata: MetadataRecord

    def __post_init__(self):
        if not self.chunk_id:
            raise MalformedRecord(None, "chunk_id must be non-empty")
        if not self.text:
            raise MalformedRecord(None, f"chunk {self.chunk_id!r}: text must be non-empty")
        if self.ordinal < 0:
            raise MalformedRecord(None, f"chunk {self.chunk_id!r}: ordinal must be >= 0")
        md = self.metadata
        if md.company_name is not None and md.company_name != self.doc_key.company:
            raise MalformedRecord(
                None,
                f"chunk {self.chunk_id!r}: metadata company {md.company_name!r} "
                f"!= doc_key company {self.doc_key.company!r}",
            )
        if md.period_of_report is not None and md.period_of_report[:4] != self.doc_key.year:
            raise MalformedRecord(
                None,
                f"chunk {self.chunk_id!r}: period_of_report year "
                f"{md.period_of_report[:4]!r} != doc_key year {self.doc_key.year!r}",
            )


@dataclass(frozen=True)
class QueryCase:
    """A test query with its target document and ground-truth chunk ids."""

    query_id: str
    text: str
    category: str
    target: DocumentKey
    supporting_chunk_ids: tuple[str, ...]

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise MalformedRecord(
                None, f"query {self.query_id!r}: category must be one of {CATEGORIES}"
            )
        if not self.text:
            raise MalformedRecord(None, f"query {self.query_id!r}: text must be non-empty")
        if not self.supporting_chunk_ids:
            raise MalformedRecord(
                None, f"query {self.query_id!r}: supporting_chunk_ids must be non-empty"
            )
        object.__setattr__(self, "supporting_chunk_ids", tuple(self.supporting_chunk_ids))


@dataclass
class Corpus:
    """Immutable-after-load corpus of chunks and query cases."""

    chunks: list[Chunk]
    queries: list[QueryCase]
    schema_version: str = SCHEMA_VERSION
    _by_id: dict[str, Chunk] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self._by_id = {c.chunk_id: c for c in self.chunks}

    def chunk(self, chunk_id: str) -> Chunk:
        return self._by_id[chunk_id]

    def __contains__(self, chunk_id: str) -> bool:
        return chunk_id in self._by_id

    def chunk_ids(self) -> list[str]:
        return [c.chunk_id for c in self.chunks]

    def doc_keys(self) -> list[DocumentKey]:
        seen: dict[DocumentKey, None] = {}
        for c in self.chunks:
            seen.setdefault(c.doc_key, None)
        return list(seen)

    def validate(self) -> None:
        validate_corpus(self)


def validate_corpus(corpus: Corpus) -> None:
    """Check corpus-level invariants: unique ids and referential integrity."""
    seen: set[str] = set()
    for chunk in corpus.chunks:
        if chunk.chunk_id in seen:
            raise MalformedRecord(None, f"duplicate chunk_id {chunk.chunk_id!r}")
        seen.add(chunk.chunk_id)
    for query in corpus.queries:
        for cid in query.supporting_chunk_ids:
            if cid not in corpus:
                raise DanglingReference(query.query_id, cid)
            chunk = corpus.chunk(cid)
            if chunk.doc_key != query.target:
                raise MalformedRecord(
                    None,
                    f"query {query.query_id!r}: supporting chunk {cid!r} belongs to "
                    f"{chunk.doc_key.to_dict()}, not the target {query.target.to_dict()}",
                )


def _parse_chunk(payload: Mapping, line_no: int) -> Chunk:
    try:
        metadata = MetadataRecord.from_dict(payload.get("metadata", {}))
        doc_key = DocumentKey.from_dict(payload["doc_key"])
        return Chunk(
            chunk_id=payload["chunk_id"],
            doc_key=doc_key,
            ordinal=int(payload["ordinal"]),
            text=payload["text"],
            metadata=metadata,
        )
    except MalformedRecord as exc:
        raise MalformedRecord(line_no, exc.reason) from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedRecord(line_no, f"bad chunk record: {exc}") from exc


def _parse_query(payload: Mapping, line_no: int) -> QueryCase:
    try:
        return QueryCase(
            query_id=payload["query_id"],
            text=payload["text"],
            category=payload["category"],
            target=DocumentKey.from_dict(payload["target"]),
            supporting_chunk_ids=tuple(payload["supporting_chunk_ids"]),
        )
    except MalformedRecord as exc:
        raise MalformedRecord(line_no, exc.reason) from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedRecord(line_no, f"bad query record: {exc}") from exc


def load_corpus(path) -> Corpus:
    """Load and validate a JSONL corpus file. Order-preserving."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc

    if not lines:
        raise MissingHeader(path)
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError:
        raise MissingHeader(path) from None
    if not isinstance(header, dict) or header.get("kind") != "header":
        raise MissingHeader(path)
    schema_version = str(header.get("schema_version", ""))
    if schema_version != SCHEMA_VERSION:
        raise MalformedRecord(1, f"unsupported schema_version {schema_version!r}")

    chunks: list[Chunk] = []
    chunk_lines: dict[str, int] = {}
    queries: list[QueryCase] = []
    query_lines: list[int] = []
    for line_no, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        try:
            payload = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(line_no, f"invalid JSON: {exc}") from exc
        if not isinstance(payload, dict):
            raise MalformedRecord(line_no, "record must be a JSON object")
        kind = payload.get("kind")
        if kind == "chunk":
            chunk = _parse_chunk(payload, line_no)
            if chunk.chunk_id in chunk_lines:
                raise MalformedRecord(line_no, f"duplicate chunk_id {chunk.chunk_id!r}")
            chunk_lines[chunk.chunk_id] = line_no
            chunks.append(chunk)
        elif kind == "query":
            queries.append(_parse_query(payload, line_no))
            query_lines.append(line_no)
        elif kind == "header":
            raise MalformedRecord(line_no, "duplicate header line")
        else:
            raise MalformedRecord(line_no, f"unknown record kind {kind!r}")

    corpus = Corpus(chunks=chunks, queries=queries, schema_version=schema_version)
    for query, line_no in zip(corpus.queries, query_lines):
        for cid in query.supporting_chunk_ids:
            if cid not in corpus:
                raise DanglingReference(query.query_id, cid)
            if corpus.chunk(cid).doc_key != query.target:
                raise MalformedRecord(
                    line_no,
                    f"query {query.query_id!r}: supporting chunk {cid!r} is not in "
                    "the target document",
                )
    return corpus


def save_corpus(corpus: Corpus, path) -> None:
    """Write a corpus back to JSONL; ``load_corpus`` of the result is identity."""
    path = Path(path)
    records: list[dict] = [{"kind": "header", "schema_version": corpus.schema_version}]
    for c in corpus.chunks:
        records.append(
            {
                "kind": "chunk",
                "chunk_id": c.chunk_id,
                "doc_key": c.doc_key.to_dict(),
                "ordinal": c.ordinal,
                "text": c.text,
                "metadata": c.metadata.to_dict(),
            }
        )
    for q in corpus.queries:
        records.append(
            {
                "kind": "query",
                "query_id": q.query_id,
                "text": q.text,
                "category": q.category,
                "target": q.target.to_dict(),
                "supporting_chunk_ids": list(q.supporting_chunk_ids),
            }
        )
    payload = "\n".join(json.dumps(r, ensure_ascii=False) for r in records) + "\n"
    tmp = path.with_suffix(path.suffix + ".tmp")
    try:
        tmp.write_text(payload, encoding="utf-8")
        os.replace(tmp, path)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def chunk_text(text: str, chunk_size: int, overlap: int) -> list[tuple[int, str]]:
    """Split whitespace-tokenized text into overlapping windows.

    Consecutive windows advance by ``chunk_size - overlap`` tokens; the last
    window may be shorter. Returns ``(ordinal, window_text)`` pairs. For a
    text of T tokens this yields ceil(max(T - overlap, 1) / stride) windows.
    """
    if overlap < 0 or chunk_size <= overlap:
        raise InvalidParams(
            f"need chunk_size > overlap >= 0, got chunk_size={chunk_size}, overlap={overlap}"
        )
    tokens = text.split()
    if not tokens:
        return []
    stride = chunk_size - overlap
    out: list[tuple[int, str]] = []
    start = 0
    ordinal = 0
    while True:
        window = tokens[start : start + chunk_size]
        out.append((ordinal, " ".join(window)))
        if start + chunk_size >= len(tokens):
            break
        start += stride
        ordinal += 1
    return out


def ablate_metadata(record: MetadataRecord, mask: Iterable[str]) -> MetadataRecord:
    """Return a copy of ``record`` with the masked fields removed.

    Unmasked fields are carried over unchanged; masking an absent field is a
    no-op, so the operation is idempotent for a fixed mask.
    """
    mask = frozenset(mask)
    for name in mask:
        if name not in ALL_FIELDS:
            raise UnknownField(name)
    kept = {k: v for k, v in record.to_dict().items() if k not in mask}
    return MetadataRecord.from_dict(kept)
