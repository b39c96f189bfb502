"""Measure how metadata fusion reshapes the embedding space.

Same-document chunk pairs should grow more similar (cohesion), cross-document
pairs less similar (confusion), and query-to-chunk score variance should
widen. The separation table quantifies the gap between the two strata.

Run from the repo root:  python3 demos/05_embedding_geometry.py
"""

from pathlib import Path

import numpy as np

from metaret import (
    DeterministicEncoder,
    encode_batch,
    fuse_unified_rows,
    load_corpus,
    pair_separation,
    proposition_check,
    serialize_metadata,
)

DATA = Path(__file__).resolve().parents[1] / "data"


def main():
    corpus = load_corpus(DATA / "synthetic.jsonl")
    encoder = DeterministicEncoder(dim=1024)

    text = np.stack(encode_batch(encoder, [c.text for c in corpus.chunks]))
    meta = np.stack(encode_batch(encoder, [serialize_metadata(c.metadata) for c in corpus.chunks]))
    fused = fuse_unified_rows(text, meta, 0.5)
    query_vecs = encode_batch(encoder, [q.text for q in corpus.queries])

    report = proposition_check(corpus.chunks, text, fused, query_vecs)
    print("unified(alpha=0.5) vs plain:")
    print(f"  intra-document cohesion gain   {report.intra_gain:+.4f}")
    print(f"  inter-document confusion drop  {report.inter_drop:+.4f}")
    print(f"  query-score variance gain      {report.variance_gain:+.6f}")

    reports = pair_separation(corpus.chunks, {"plain": text, "unified(0.5)": fused})
    print(f"\n{'variant':14s} {'margin':>8s} {'d':>7s} {'F':>7s} {'AUC':>6s} {'KS':>6s}")
    for name, r in reports.items():
        print(
            f"{name:14s} {r.mean_margin:+8.3f} {r.cohens_d:7.3f} {r.fisher_f:7.3f} "
            f"{r.auc:6.3f} {r.ks_distance:6.3f}"
        )


if __name__ == "__main__":
    main()
