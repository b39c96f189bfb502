"""Show the embedding cache and the binary index format in action.

The cache is content-addressed by (encoder name, exact input string), so a
repeat embedding run touches the encoder zero times. Indexes round-trip
through a checksummed binary file.

Run from the repo root:  python3 demos/06_cache_and_persistence.py
"""

import tempfile
from pathlib import Path

from metaret import (
    CachedEncoder,
    DeterministicEncoder,
    EmbeddingCache,
    build_index,
    encode_batch,
    load_corpus,
    load_index,
    save_index,
    topk,
)

DATA = Path(__file__).resolve().parents[1] / "data"


def main():
    corpus = load_corpus(DATA / "synthetic.jsonl")
    texts = [c.text for c in corpus.chunks]

    with tempfile.TemporaryDirectory() as tmp:
        inner = DeterministicEncoder(dim=256)
        cache = EmbeddingCache(Path(tmp) / "embeddings.bin")
        encoder = CachedEncoder(inner, cache)

        vectors = encode_batch(encoder, texts)
        print(f"cold run: {inner.call_count} encoder calls, cache holds {len(cache)} vectors")

        before = inner.call_count
        encode_batch(encoder, texts)
        print(f"warm run: {inner.call_count - before} encoder calls")

        index = build_index(
            zip(corpus.chunk_ids(), vectors),
            normalize=True,
            encoder_name=encoder.name,
            strategy_tag="plain",
        )
        path = Path(tmp) / "plain.mrix"
        save_index(index, path)
        loaded = load_index(path)
        print(f"index file: {path.stat().st_size} bytes, {len(loaded)} rows, dim {loaded.dim}")

        query = encoder.encode("cloud subscription backlog")
        same = topk(index, query, 3) == topk(loaded, query, 3)
        print(f"top-3 before/after reload identical: {same}")


if __name__ == "__main__":
    main()
