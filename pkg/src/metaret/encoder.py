"""Frozen text encoders behind one interface, plus a persistent vector cache.

Three encoder flavors:

* ``DeterministicEncoder`` — a normalized bag-of-hashed-tokens projection.
  Fully offline, bit-reproducible across runs and platforms, and strings
  sharing tokens score higher cosine than disjoint strings, which makes
  synthetic retrieval tests meaningful.
* ``RemoteEncoder`` — HTTP client for an embedding API (OpenAI-style wire
  format), with bounded exponential-backoff retries.
* ``CachedEncoder`` — wraps any encoder with an ``EmbeddingCache`` so
  re-embedding an unchanged corpus performs zero remote calls.

All encoders emit float32 unit vectors (normalization happens in float64).
"""

from __future__ import annotations

import hashlib
import logging
import os
import re
import struct
import threading
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import CacheCorrupt, EmptyInput, IoFailure, RemoteFailure

logger = logging.getLogger(__name__)

API_KEY_ENV = "METARET_API_KEY"

_TOKEN_RE = re.compile(r"[0-9a-z]+")


@dataclass(frozen=True)
class EncoderDescriptor:
    name: str
    dim: int
    kind: str  # "remote" | "deterministic_test"


class DeterministicEncoder:
    """Offline test encoder: normalized bag of hashed lowercase tokens.

    Token indexes come from BLAKE2b digests, so the mapping is stable across
    processes and platforms. Dimension is configurable.
    """

    kind = "deterministic_test"

    def __init__(self, dim: int = 256, name: str | None = None):
        if dim <= 0:
            raise ValueError("dim must be positive")
        self.dim = dim
        self.name = name or f"test-bag-{dim}"
        self.call_count = 0  # texts encoded (cache misses only, when wrapped)
        self._token_index: dict[str, int] = {}

    @property
    def descriptor(self) -> EncoderDescriptor:
        return EncoderDescriptor(self.name, self.dim, self.kind)

    def _index(self, token: str) -> int:
        idx = self._token_index.get(token)
        if idx is None:
            digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
            idx = int.from_bytes(digest, "little") % self.dim
            self._token_index[token] = idx
        return idx

    def encode(self, text: str) -> np.ndarray:
        tokens = _TOKEN_RE.findall(text.lower())
        if not tokens:
            raise EmptyInput(f"no tokens to encode in {text!r}")
        self.call_count += 1
        counts = np.zeros(self.dim, dtype=np.float64)
        for token in tokens:
            counts[self._index(token)] += 1.0
        counts /= np.linalg.norm(counts)
        return counts.astype(np.float32)

    def encode_many(self, texts: Sequence[str]) -> list[np.ndarray]:
        return [self.encode(t) for t in texts]


class RemoteEncoder:
    """Client for a remote embedding endpoint.

    Sends ``{"model": name, "input": [texts]}`` and expects an OpenAI-style
    ``{"data": [{"embedding": [...], "index": i}, ...]}`` response. Retries
    connection errors, 429, and 5xx with exponential backoff up to
    ``max_attempts``, then raises RemoteFailure.
    """

    kind = "remote"

    def __init__(
        self,
        name: str,
        dim: int,
        endpoint: str,
        api_key: str | None = None,
        session=None,
        max_attempts: int = 5,
        backoff: float = 0.5,
        timeout: float = 60.0,
        batch_size: int = 128,
        sleep=time.sleep,
    ):
        if dim <= 0:
            raise ValueError("dim must be positive")
        self.name = name
        self.dim = dim
        self.endpoint = endpoint
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        if session is None:
            import requests

            session = requests.Session()
        self._session = session
        self.max_attempts = max_attempts
        self.backoff = backoff
        self.timeout = timeout
        self.batch_size = batch_size
        self._sleep = sleep
        self.call_count = 0  # texts encoded
        self.request_count = 0  # HTTP requests issued

    @property
    def descriptor(self) -> EncoderDescriptor:
        return EncoderDescriptor(self.name, self.dim, self.kind)

    def _post(self, texts: Sequence[str]):
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last_status, last_body = 0, "no attempt made"
        for attempt in range(self.max_attempts):
            if attempt:
                self._sleep(self.backoff * 2 ** (attempt - 1))
            self.request_count += 1
            try:
                response = self._session.post(
                    self.endpoint,
                    json={"model": self.name, "input": list(texts)},
                    headers=headers,
                    timeout=self.timeout,
                )
            except OSError as exc:  # covers requests.ConnectionError
                last_status, last_body = 0, repr(exc)
                logger.warning("embedding request failed (%s), attempt %d", exc, attempt + 1)
                continue
            status = response.status_code
            if status == 200:
                return response
            last_status, last_body = status, response.text
            if status == 429 or status >= 500:
                logger.warning("embedding request got %d, attempt %d", status, attempt + 1)
                continue
            break  # other 4xx: not retryable
        raise RemoteFailure(last_status, last_body)

    def encode_many(self, texts: Sequence[str]) -> list[np.ndarray]:
        for t in texts:
            if not t or not t.strip():
                raise EmptyInput("cannot embed an empty string")
        out: list[np.ndarray] = []
        for start in range(0, len(texts), self.batch_size):
            group = texts[start : start + self.batch_size]
            response = self._post(group)
            try:
                data = response.json()["data"]
                data = sorted(data, key=lambda item: item.get("index", 0))
                vectors = [np.asarray(item["embedding"], dtype=np.float64) for item in data]
            except (KeyError, TypeError, ValueError) as exc:
                raise RemoteFailure(200, f"unparseable embedding response: {exc}") from exc
            if len(vectors) != len(group):
                raise RemoteFailure(200, f"expected {len(group)} embeddings, got {len(vectors)}")
            for vec in vectors:
                if vec.shape != (self.dim,):
                    raise RemoteFailure(200, f"embedding has dim {vec.shape}, expected {self.dim}")
                if not np.all(np.isfinite(vec)):
                    raise RemoteFailure(200, "embedding contains non-finite values")
                norm = np.linalg.norm(vec)
                if norm == 0:
                    raise RemoteFailure(200, "embedding is a zero vector")
                out.append((vec / norm).astype(np.float32))
            self.call_count += len(group)
        return out

    def encode(self, text: str) -> np.ndarray:
        return self.encode_many([text])[0]


def cache_key(encoder_name: str, text: str) -> bytes:
    """32-byte content address for (encoder, exact input string)."""
    h = hashlib.sha256()
    h.update(encoder_name.encode("utf-8"))
    h.update(b"\x00")
    h.update(text.encode("utf-8"))
    return h.digest()


class EmbeddingCache:
    """Append-only on-disk store of float32 vectors keyed by 32-byte hashes.

    Record layout: key (32) | dim (uint32 LE) | dim x float32 LE | crc32 of
    the preceding bytes (uint32 LE). The whole file is scanned at open; any
    checksum mismatch or truncation raises CacheCorrupt. Reads are lock-free
    against the in-memory map; writes are serialized.
    """

    _KEY_LEN = 32

    def __init__(self, path):
        self.path = Path(path)
        self._entries: dict[bytes, np.ndarray] = {}
        self._lock = threading.Lock()
        if self.path.exists():
            self._load()

    def _load(self) -> None:
        blob = self.path.read_bytes()
        offset = 0
        total = len(blob)
        while offset < total:
            head_end = offset + self._KEY_LEN + 4
            if head_end > total:
                raise CacheCorrupt(self.path, "truncated record header")
            key = blob[offset : offset + self._KEY_LEN]
            (dim,) = struct.unpack("<I", blob[offset + self._KEY_LEN : head_end])
            body_end = head_end + 4 * dim
            if body_end + 4 > total:
                raise CacheCorrupt(self.path, "truncated record body")
            payload = blob[offset:body_end]
            (crc,) = struct.unpack("<I", blob[body_end : body_end + 4])
            if zlib.crc32(payload) & 0xFFFFFFFF != crc:
                raise CacheCorrupt(self.path)
            vector = np.frombuffer(blob[head_end:body_end], dtype="<f4").copy()
            self._entries[key] = vector
            offset = body_end + 4

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key: bytes) -> bool:
        return key in self._entries

    def get(self, key: bytes) -> np.ndarray | None:
        vector = self._entries.get(key)
        return None if vector is None else vector.copy()

    def put(self, key: bytes, vector) -> None:
        if len(key) != self._KEY_LEN:
            raise ValueError(f"cache keys are {self._KEY_LEN} bytes, got {len(key)}")
        arr = np.ascontiguousarray(np.asarray(vector, dtype="<f4"))
        if arr.ndim != 1:
            raise ValueError("cached vectors must be 1-D")
        if not np.all(np.isfinite(arr)):
            raise ValueError("cached vectors must be finite")
        payload = key + struct.pack("<I", arr.shape[0]) + arr.tobytes()
        record = payload + struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF)
        with self._lock:
            try:
                with open(self.path, "ab") as fh:
                    fh.write(record)
                    fh.flush()
            except OSError as exc:
                raise IoFailure(f"cannot append to cache {self.path}: {exc}") from exc
            self._entries[key] = arr


class CachedEncoder:
    """Read-through cache wrapper; misses are delegated and stored."""

    def __init__(self, encoder, cache: EmbeddingCache):
        self.encoder = encoder
        self.cache = cache

    @property
    def name(self) -> str:
        return self.encoder.name

    @property
    def dim(self) -> int:
        return self.encoder.dim

    @property
    def kind(self) -> str:
        return self.encoder.kind

    @property
    def descriptor(self) -> EncoderDescriptor:
        return self.encoder.descriptor

    @property
    def call_count(self) -> int:
        return self.encoder.call_count

    def encode(self, text: str) -> np.ndarray:
        key = cache_key(self.name, text)
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        vector = self.encoder.encode(text)
        self.cache.put(key, vector)
        return vector

    def encode_many(self, texts: Sequence[str]) -> list[np.ndarray]:
        keys = [cache_key(self.name, t) for t in texts]
        out: list[np.ndarray | None] = [self.cache.get(k) for k in keys]
        misses: dict[bytes, list[int]] = {}
        for i, vector in enumerate(out):
            if vector is None:
                misses.setdefault(keys[i], []).append(i)
        if misses:
            # duplicate texts within one batch are encoded once
            ordered = list(misses)
            fresh = self.encoder.encode_many([texts[misses[k][0]] for k in ordered])
            for key, vector in zip(ordered, fresh):
                self.cache.put(key, vector)
                for i in misses[key]:
                    out[i] = vector
        return out  # type: ignore[return-value]


def encode_batch(encoder, texts: Sequence[str], max_in_flight: int = 4) -> list[np.ndarray]:
    """Embed ``texts`` preserving order, with bounded request concurrency.

    At most ``max_in_flight`` underlying requests are outstanding at once.
    The batch is atomic: the first failure (in input order) aborts the whole
    call and no partial result is returned.
    """
    if max_in_flight < 1:
        raise ValueError("max_in_flight must be >= 1")
    for t in texts:
        if not t or not t.strip():
            raise EmptyInput("cannot embed an empty string")
    if not texts:
        return []

    group_size = getattr(encoder, "batch_size", 64)
    groups = [texts[i : i + group_size] for i in range(0, len(texts), group_size)]
    if max_in_flight == 1 or len(groups) == 1:
        out: list[np.ndarray] = []
        for group in groups:
            out.extend(encoder.encode_many(group))
        return out

    with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
        futures = [pool.submit(encoder.encode_many, group) for group in groups]
        results: list[np.ndarray] = []
        error: Exception | None = None
        for future in futures:
            if error is not None:
                future.cancel()
                continue
            try:
                results.extend(future.result())
            except Exception as exc:  # first error in input order wins
                error = exc
        if error is not None:
            raise error
        return results
