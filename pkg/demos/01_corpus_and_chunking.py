"""Walk through corpus loading, token-window chunking, and field masking.

Run from the repo root:  python3 demos/01_corpus_and_chunking.py
"""

from pathlib import Path

from metaret import ablate_metadata, chunk_text, load_corpus, serialize_metadata

DATA = Path(__file__).resolve().parents[1] / "data"


def main():
    corpus = load_corpus(DATA / "synthetic.jsonl")
    print(f"loaded {len(corpus.chunks)} chunks / {len(corpus.queries)} queries")
    print(f"documents: {[f'{d.company} {d.year}' for d in corpus.doc_keys()]}")

    chunk = corpus.chunks[0]
    print("\nfirst chunk:")
    print(f"  id       {chunk.chunk_id}")
    print(f"  doc      {chunk.doc_key.company} {chunk.doc_key.year} {chunk.doc_key.form}")
    print(f"  header   {serialize_metadata(chunk.metadata)}")
    print(f"  text     {chunk.text[:70]}...")

    masked = ablate_metadata(chunk.metadata, {"company_name", "period_of_report"})
    print(f"\nheader without company/year: {serialize_metadata(masked)!r}")

    # token-window chunking: 350-token windows advancing by 300 tokens
    long_text = " ".join(f"tok{i}" for i in range(700))
    windows = chunk_text(long_text, chunk_size=350, overlap=50)
    print(f"\n700 tokens -> {len(windows)} windows of sizes "
          f"{[len(w.split()) for _, w in windows]}")


if __name__ == "__main__":
    main()
