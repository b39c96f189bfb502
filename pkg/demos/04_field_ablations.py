"""Mask metadata fields one group at a time and compare retrieval quality.

Company/year fields carry the document-level signal (Title@K), the section
field carries the within-document signal (Context@K).

Run from the repo root:  python3 demos/04_field_ablations.py
"""

from pathlib import Path

from metaret import CANONICAL_ABLATIONS, DeterministicEncoder, ablation_run, load_corpus

DATA = Path(__file__).resolve().parents[1] / "data"


def main():
    corpus = load_corpus(DATA / "synthetic_ablation.jsonl")
    encoder = DeterministicEncoder(dim=1024)
    results = ablation_run(corpus, encoder, CANONICAL_ABLATIONS, k_max=5)

    print(f"{'condition':18s} {'Context@5':>10s} {'Title@5':>10s}")
    for condition, per_category in results.items():
        n = sum(s.n_queries for s in per_category.values())
        ctx = sum(s.context_at_k[5] * s.n_queries for s in per_category.values()) / n
        title = sum(s.title_at_k[5] * s.n_queries for s in per_category.values()) / n
        print(f"{condition:18s} {ctx:10.2f} {title:10.2f}")


if __name__ == "__main__":
    main()
