"""Deterministic synthetic corpora so the whole suite runs offline.

Two companies x two years = four documents. Chunk texts are duplicated
across documents (a document's identity is carried only by its metadata), so
content-only retrieval cannot tell the documents apart while metadata-aware
strategies can. Token choices are arranged so that, under a bag-of-tokens
encoder:

* ``disambiguation_corpus`` — each query's best lexical matches are exact
  duplicate chunks living in the *wrong* documents; the target document
  holds a weaker paraphrase (the supporting chunk). Metadata is constant
  within each document. Content-only ranking misses the target document
  entirely; fused strategies recover it.
* ``ablation_corpus`` — every chunk text is identical; company/year fields
  disambiguate documents and the per-chunk section field disambiguates
  chunks, so masking company+year hurts document-level metrics far more
  than masking section does.
"""

from __future__ import annotations

import numpy as np

from .corpus import Chunk, Corpus, DocumentKey, MetadataRecord, QueryCase

_COMPANIES = ("Acme Dynamics", "Globex Materials")
_YEARS = ("2021", "2022")
_FORM = "10-K"

# Month-day parts differ per company so same-year documents do not share
# date tokens beyond the year itself.
_PERIOD_MMDD = {"Acme Dynamics": "09-24", "Globex Materials": "06-30"}
_FILED_MMDD = {"Acme Dynamics": "11-19", "Globex Materials": "08-27"}

_BOILER = (
    "management discusses performance drivers and presents audited "
    "statements covering ongoing operations worldwide"
)
_STRONG_TAIL = "results exceeded expectations"
_WEAK_TAIL = "momentum stayed broadly steady"

_TOPICS = (
    ("cloud", "subscription", "backlog"),
    ("semiconductor", "inventory", "shipments"),
    ("advertising", "impressions", "engagement"),
    ("licensing", "royalties", "renewals"),
    ("datacenter", "capacity", "utilization"),
    ("payments", "settlement", "volumes"),
    ("logistics", "freight", "tonnage"),
    ("cybersecurity", "incidents", "remediation"),
    ("hiring", "attrition", "headcount"),
    ("energy", "consumption", "efficiency"),
    ("litigation", "settlements", "accruals"),
    ("currency", "hedging", "exposure"),
)

_SECTIONS = (
    ("Item 1 Business Overview", ("business", "overview")),
    ("Item 2 Risk Factors", ("risk", "factors")),
    ("Item 3 Market Analysis", ("market", "analysis")),
    ("Item 4 Financial Highlights", ("financial", "highlights")),
    ("Item 5 Legal Proceedings", ("legal", "proceedings")),
    ("Item 6 Executive Compensation", ("executive", "compensation")),
)

_ABLATION_TEXT = (
    "routine consolidated statements describe standard operational "
    "disclosures prepared for archival reference"
)


def _docs() -> list[tuple[str, DocumentKey]]:
    out = []
    for company in _COMPANIES:
        for year in _YEARS:
            slug = f"{company.split()[0].lower()}-{year}"
            out.append((slug, DocumentKey(company=company, year=year, form=_FORM)))
    return out


def _doc_metadata(key: DocumentKey, with_filed: bool, section: str | None = None):
    fields = {
        "company_name": key.company,
        "form_type": _FORM,
        "period_of_report": f"{key.year}-{_PERIOD_MMDD[key.company]}",
    }
    if with_filed:
        fields["filed_date"] = f"{key.year}-{_FILED_MMDD[key.company]}"
    if section is not None:
        fields["section"] = section
    return MetadataRecord.from_dict(fields)


def disambiguation_corpus() -> Corpus:
    """Duplicated chunk texts, document-constant metadata, 84 chunks.

    Every topic is owned by one document (round robin). The owner holds one
    weak paraphrase (the supporting chunk); every other document holds two
    identical strong copies. Queries name the owner's company and year plus
    all three topic keywords, so content-only ranking puts six wrong-document
    copies ahead of the supporting chunk.
    """
    docs = _docs()
    chunks: list[Chunk] = []
    queries: list[QueryCase] = []
    for topic_idx, keywords in enumerate(_TOPICS):
        owner_slug, owner_key = docs[topic_idx % len(docs)]
        strong = f"{_BOILER} {' '.join(keywords)} {_STRONG_TAIL}"
        weak = f"{_BOILER} {keywords[0]} {keywords[1]} {_WEAK_TAIL}"
        for slug, key in docs:
            metadata = _doc_metadata(key, with_filed=True)
            if slug == owner_slug:
                chunks.append(
                    Chunk(
                        chunk_id=f"c-{slug}-w{topic_idx:02d}",
                        doc_key=key,
                        ordinal=topic_idx,
                        text=weak,
                        metadata=metadata,
                    )
                )
            else:
                for copy in range(2):
                    chunks.append(
                        Chunk(
                            chunk_id=f"c-{slug}-s{topic_idx:02d}-{copy}",
                            doc_key=key,
                            ordinal=topic_idx * 2 + copy,
                            text=strong,
                            metadata=metadata,
                        )
                    )
        category = "general" if topic_idx % 2 == 0 else "in_depth"
        queries.append(
            QueryCase(
                query_id=f"q{topic_idx:02d}",
                text=f"{owner_key.company} {owner_key.year} {' '.join(keywords)} annual review",
                category=category,
                target=owner_key,
                supporting_chunk_ids=(f"c-{owner_slug}-w{topic_idx:02d}",),
            )
        )
    corpus = Corpus(chunks=chunks, queries=queries)
    corpus.validate()
    return corpus


def ablation_corpus(copies_per_section: int = 4) -> Corpus:
    """Identical chunk texts everywhere; section varies per chunk.

    Company and year disambiguate documents, the section field disambiguates
    chunks within a document. Queries name company, year, and the section's
    two keywords.
    """
    docs = _docs()
    chunks: list[Chunk] = []
    queries: list[QueryCase] = []
    for slug, key in docs:
        for sec_idx, (section, _) in enumerate(_SECTIONS):
            metadata = _doc_metadata(key, with_filed=False, section=section)
            for copy in range(copies_per_section):
                chunks.append(
                    Chunk(
                        chunk_id=f"c-{slug}-{sec_idx:02d}-{copy}",
                        doc_key=key,
                        ordinal=sec_idx * copies_per_section + copy,
                        text=_ABLATION_TEXT,
                        metadata=metadata,
                    )
                )
    qid = 0
    for slug, key in docs:
        for sec_idx, (_, (kw_a, kw_b)) in enumerate(_SECTIONS):
            supporting = tuple(
                f"c-{slug}-{sec_idx:02d}-{copy}" for copy in range(copies_per_section)
            )
            queries.append(
                QueryCase(
                    query_id=f"q{qid:02d}",
                    text=f"{key.company} {key.year} {kw_a} {kw_b} filing details",
                    category="general" if qid % 2 == 0 else "in_depth",
                    target=key,
                    supporting_chunk_ids=supporting,
                )
            )
            qid += 1
    corpus = Corpus(chunks=chunks, queries=queries)
    corpus.validate()
    return corpus


def random_corpus(
    n_chunks: int = 500,
    n_docs: int = 12,
    n_queries: int = 40,
    vocab_size: int = 220,
    tokens_per_chunk: int = 30,
    seed: int = 0,
) -> Corpus:
    """Seeded random corpus for property tests and benchmarks."""
    rng = np.random.default_rng(seed)
    vocab = [f"w{i:03d}" for i in range(vocab_size)]
    years = [str(2016 + i % 8) for i in range(n_docs)]
    sections = [name for name, _ in _SECTIONS]
    docs = []
    for d in range(n_docs):
        key = DocumentKey(company=f"corp{d:02d}", year=years[d], form=_FORM)
        docs.append(key)

    chunks = []
    for i in range(n_chunks):
        key = docs[i % n_docs]
        words = [vocab[j] for j in rng.integers(0, vocab_size, size=tokens_per_chunk)]
        metadata = MetadataRecord.from_dict(
            {
                "company_name": key.company,
                "form_type": key.form,
                "section": sections[int(rng.integers(0, len(sections)))],
                "period_of_report": f"{key.year}-12-31",
            }
        )
        chunks.append(
            Chunk(
                chunk_id=f"r{i:05d}",
                doc_key=key,
                ordinal=i // n_docs,
                text=" ".join(words),
                metadata=metadata,
            )
        )

    queries = []
    for qi in range(n_queries):
        chunk = chunks[int(rng.integers(0, n_chunks))]
        words = chunk.text.split()
        picks = [words[j] for j in rng.integers(0, len(words), size=6)]
        queries.append(
            QueryCase(
                query_id=f"rq{qi:03d}",
                text=f"{chunk.doc_key.company} {chunk.doc_key.year} " + " ".join(picks),
                category="general" if qi % 2 == 0 else "in_depth",
                target=chunk.doc_key,
                supporting_chunk_ids=(chunk.chunk_id,),
            )
        )
    corpus = Corpus(chunks=chunks, queries=queries)
    corpus.validate()
    return corpus
