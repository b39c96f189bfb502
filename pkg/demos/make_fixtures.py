"""Regenerate the bundled fixture corpora under data/.

Both corpora are fully deterministic, so regeneration is a no-op unless the
generators change.

Run from the repo root:  python3 demos/make_fixtures.py
"""

from pathlib import Path

from metaret import save_corpus
from metaret.synthetic import ablation_corpus, disambiguation_corpus

DATA = Path(__file__).resolve().parents[1] / "data"


def main():
    DATA.mkdir(exist_ok=True)
    for name, corpus in (
        ("synthetic.jsonl", disambiguation_corpus()),
        ("synthetic_ablation.jsonl", ablation_corpus()),
    ):
        path = DATA / name
        save_corpus(corpus, path)
        print(f"wrote {path} ({len(corpus.chunks)} chunks, {len(corpus.queries)} queries)")


if __name__ == "__main__":
    main()
