"""Run one query through all six retrieval strategies and compare rankings.

The fixture corpus duplicates chunk texts across documents, so the plain
content-only index cannot tell which company/year a query means; strategies
that embed metadata can.

Run from the repo root:  python3 demos/02_retrieval_strategies.py
"""

from pathlib import Path

from metaret import (
    DeterministicEncoder,
    build_bundle,
    late_fusion,
    load_corpus,
    mat_prefix,
    mat_suffix,
    plain,
    reformulated,
    retrieve,
    unified,
)

DATA = Path(__file__).resolve().parents[1] / "data"


def main():
    corpus = load_corpus(DATA / "synthetic.jsonl")
    encoder = DeterministicEncoder(dim=1024)
    query = corpus.queries[0]
    print(f"query: {query.text!r}")
    print(f"target document: {query.target.company} {query.target.year}")
    print(f"supporting chunk: {query.supporting_chunk_ids[0]}\n")

    strategies = [
        plain(),
        mat_prefix(),
        mat_suffix(),
        unified(0.5),
        late_fusion(0.5),
        reformulated(),
    ]
    for strategy in strategies:
        bundle = build_bundle(corpus, strategy, encoder)
        top = retrieve(bundle, query.text, 3)
        rows = ", ".join(f"{cid} ({score:.3f})" for cid, score in top)
        hit = "HIT " if top[0][0] in query.supporting_chunk_ids else "miss"
        print(f"{strategy.tag():38s} top-1 {hit}  top-3: {rows}")


if __name__ == "__main__":
    main()
