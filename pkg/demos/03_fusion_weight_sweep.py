"""Sweep the fusion weight for late-fusion retrieval and print the curve.

Neither pure content (alpha=0) nor pure metadata (alpha=1) retrieves the
supporting chunks of the fixture corpus; moderate weights do.

Run from the repo root:  python3 demos/03_fusion_weight_sweep.py
"""

from pathlib import Path

from metaret import DeterministicEncoder, alpha_sweep, load_corpus

DATA = Path(__file__).resolve().parents[1] / "data"


def main():
    corpus = load_corpus(DATA / "synthetic.jsonl")
    encoder = DeterministicEncoder(dim=1024)
    alphas = [round(0.1 * i, 1) for i in range(11)]
    sweep = alpha_sweep(corpus, encoder, family="late_fusion", alphas=alphas, k_max=5)

    print("alpha  Context@5  Title@5   (pooled over categories)")
    for alpha, per_category in sweep.items():
        n = sum(s.n_queries for s in per_category.values())
        ctx = sum(s.context_at_k[5] * s.n_queries for s in per_category.values()) / n
        title = sum(s.title_at_k[5] * s.n_queries for s in per_category.values()) / n
        bar = "#" * int(ctx / 5)
        print(f" {alpha:.1f}   {ctx:7.2f}   {title:7.2f}   {bar}")


if __name__ == "__main__":
    main()
