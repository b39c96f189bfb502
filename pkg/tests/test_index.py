import math

import numpy as np
import pytest

from metaret.errors import CorruptIndex, DimMismatch, DuplicateId, ZeroVector
from metaret.index import build_index, full_ranking, load_index, save_index, topk


def brute_force_topk(ids, rows, query, k):
    """Independent oracle: python-loop cosines, sort by (-score, id)."""
    scored = []
    qnorm = math.sqrt(sum(x * x for x in query))
    for cid, row in zip(ids, rows):
        dot = sum(float(a) * float(b) for a, b in zip(row, query))
        rnorm = math.sqrt(sum(float(x) * float(x) for x in row))
        scored.append((cid, dot / (rnorm * qnorm)))
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored[:k]


def random_index(rng, n, dim, normalize=False):
    ids = [f"id{i:04d}" for i in range(n)]
    rows = rng.normal(size=(n, dim))
    return ids, rows, build_index(zip(ids, rows), normalize=normalize)


class TestBuildIndex:
    def test_duplicate_id(self):
        with pytest.raises(DuplicateId):
            build_index([("a", [1.0, 0.0]), ("a", [0.0, 1.0])], normalize=False)

    def test_dim_mismatch(self):
        with pytest.raises(DimMismatch):
            build_index([("a", [1.0, 0.0]), ("b", [0.0, 1.0, 2.0])], normalize=False)

    def test_zero_row_with_normalize(self):
        with pytest.raises(ZeroVector):
            build_index([("a", [0.0, 0.0])], normalize=True)

    def test_rows_stored_in_input_order(self):
        idx = build_index([("b", [0.0, 1.0]), ("a", [1.0, 0.0])], normalize=False)
        assert idx.ids == ("b", "a")
        np.testing.assert_allclose(idx.matrix, [[0.0, 1.0], [1.0, 0.0]])

    def test_normalized_rows_unit_norm(self):
        rng = np.random.default_rng(0)
        _, _, idx = random_index(rng, 20, 8, normalize=True)
        norms = np.linalg.norm(idx.matrix.astype(np.float64), axis=1)
        np.testing.assert_allclose(norms, 1.0, atol=1e-6)

    def test_single_entry_always_top1(self):
        idx = build_index([("only", [0.2, 0.5, -0.1])], normalize=True)
        assert topk(idx, [1.0, 1.0, 1.0], 5)[0][0] == "only"


class TestTopk:
    def test_self_retrieval_scores_one(self):
        rng = np.random.default_rng(1)
        ids, rows, idx = random_index(rng, 30, 6, normalize=True)
        top_id, score = topk(idx, idx.matrix[7], 1)[0]
        assert top_id == "id0007"
        assert abs(score - 1.0) < 1e-6

    def test_k_equals_n_is_permutation(self):
        rng = np.random.default_rng(2)
        ids, _, idx = random_index(rng, 25, 5)
        ranking = topk(idx, rng.normal(size=5), 25)
        assert sorted(cid for cid, _ in ranking) == sorted(ids)

    def test_k_larger_than_n(self):
        rng = np.random.default_rng(3)
        _, _, idx = random_index(rng, 4, 3)
        assert len(topk(idx, rng.normal(size=3), 10)) == 4

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(4)
        ids, _, idx = random_index(rng, 200, 16)
        query = rng.normal(size=16)
        got = topk(idx, query, 10)
        expected = brute_force_topk(ids, idx.matrix, query, 10)
        assert [cid for cid, _ in got] == [cid for cid, _ in expected]
        for (_, s_got), (_, s_exp) in zip(got, expected):
            assert abs(s_got - s_exp) < 1e-6

    def test_tie_break_ascending_id(self):
        row = [1.0, 0.0]
        idx = build_index([("zzz", row), ("aaa", row), ("mmm", row)], normalize=True)
        assert [cid for cid, _ in topk(idx, [1.0, 0.0], 3)] == ["aaa", "mmm", "zzz"]

    def test_dim_mismatch(self):
        idx = build_index([("a", [1.0, 0.0])], normalize=False)
        with pytest.raises(DimMismatch):
            topk(idx, [1.0, 0.0, 0.0], 1)

    def test_bad_k(self):
        idx = build_index([("a", [1.0, 0.0])], normalize=False)
        with pytest.raises(ValueError):
            topk(idx, [1.0, 0.0], 0)


class TestFullRanking:
    def test_equals_topk_n(self):
        rng = np.random.default_rng(5)
        _, _, idx = random_index(rng, 40, 8)
        q = rng.normal(size=8)
        assert full_ranking(idx, q) == topk(idx, q, 40)

    def test_each_id_once(self):
        rng = np.random.default_rng(6)
        ids, _, idx = random_index(rng, 3, 4)
        ranking = full_ranking(idx, rng.normal(size=4))
        assert sorted(cid for cid, _ in ranking) == sorted(ids)

    def test_planted_duplicate_ranks_first(self):
        rng = np.random.default_rng(7)
        ids, rows, _ = random_index(rng, 50, 12)
        planted = rows[31].copy()
        idx = build_index(zip(ids, rows), normalize=True)
        assert full_ranking(idx, planted)[0][0] == "id0031"


class TestPersistence:
    def test_round_trip_bit_identical(self, tmp_path):
        rng = np.random.default_rng(8)
        _, _, idx = random_index(rng, 25, 7, normalize=True)
        idx.encoder_name = "test-bag-256"
        idx.strategy_tag = "unified(alpha=0.5)"
        path = tmp_path / "x.mrix"
        save_index(idx, path)
        loaded = load_index(path)
        assert loaded.ids == idx.ids
        assert loaded.matrix.tobytes() == idx.matrix.tobytes()
        assert loaded.normalized == idx.normalized
        assert loaded.encoder_name == idx.encoder_name
        assert loaded.strategy_tag == idx.strategy_tag

    def test_truncated_file(self, tmp_path):
        rng = np.random.default_rng(9)
        _, _, idx = random_index(rng, 10, 4)
        path = tmp_path / "x.mrix"
        save_index(idx, path)
        blob = path.read_bytes()
        path.write_bytes(blob[: len(blob) // 2])
        with pytest.raises(CorruptIndex):
            load_index(path)

    def test_bit_flip_detected(self, tmp_path):
        rng = np.random.default_rng(10)
        _, _, idx = random_index(rng, 10, 4)
        path = tmp_path / "x.mrix"
        save_index(idx, path)
        blob = bytearray(path.read_bytes())
        blob[len(blob) // 2] ^= 0x01
        path.write_bytes(bytes(blob))
        with pytest.raises(CorruptIndex):
            load_index(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "x.mrix"
        path.write_bytes(b"NOTRIX" + b"\x00" * 64)
        with pytest.raises(CorruptIndex):
            load_index(path)

    def test_topk_equivalent_after_reload(self, tmp_path):
        rng = np.random.default_rng(11)
        _, _, idx = random_index(rng, 60, 9, normalize=True)
        path = tmp_path / "x.mrix"
        save_index(idx, path)
        loaded = load_index(path)
        for _ in range(100):
            q = rng.normal(size=9)
            assert topk(loaded, q, 10) == topk(idx, q, 10)
