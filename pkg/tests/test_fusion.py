import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metaret.corpus import MetadataRecord
from metaret.errors import DegenerateFusion, DimMismatch, ZeroVector
from metaret.fusion import (
    build_mat_text,
    cosine,
    fuse_unified,
    fuse_unified_rows,
    l2_normalize,
    serialize_metadata,
)

RECORD = MetadataRecord.from_dict(
    {
        "company_name": "Alphabet Inc.",
        "form_type": "10-K",
        "section": "Item 1 - BUSINESS",
        "period_of_report": "2023-12-31",
    }
)


class TestSerializeMetadata:
    def test_four_field_header(self):
        assert (
            serialize_metadata(RECORD)
            == "company: Alphabet Inc.; form: 10-K; section: Item 1 - BUSINESS; period: 2023-12-31"
        )

    def test_empty_record(self):
        assert serialize_metadata(MetadataRecord()) == ""

    def test_deterministic(self):
        assert serialize_metadata(RECORD) == serialize_metadata(RECORD)

    def test_full_schema_order(self):
        record = MetadataRecord.from_dict(
            {
                "company_name": "A Corp",
                "form_type": "10-K",
                "section": "Item 7",
                "fiscal_year_end": "12-31",
                "period_of_report": "2022-12-31",
                "filed_date": "2023-01-15",
                "exchange_listings": ["NYSE", "NASDAQ"],
                "sic_code": "SOFTWARE",
            }
        )
        assert serialize_metadata(record) == (
            "company: A Corp; form: 10-K; section: Item 7; year_end: 12-31; "
            "period: 2022-12-31; filed: 2023-01-15; exchanges: NYSE, NASDAQ; sic: SOFTWARE"
        )

    # values drawn without ';' or ',' (the header's own separators)
    _value = st.text(
        alphabet=st.characters(whitelist_categories=("Lu", "Ll", "Nd"), whitelist_characters=" -"),
        min_size=1,
        max_size=10,
    ).filter(lambda s: s.strip())

    _record = st.fixed_dictionaries(
        {},
        optional={
            "company_name": _value,
            "form_type": _value,
            "section": _value,
            "sic_code": _value,
        },
    )

    @given(a=_record, b=_record)
    @settings(max_examples=150, deadline=None)
    def test_injective_over_random_records(self, a, b):
        rec_a, rec_b = MetadataRecord.from_dict(a), MetadataRecord.from_dict(b)
        if rec_a.to_dict() != rec_b.to_dict():
            assert serialize_metadata(rec_a) != serialize_metadata(rec_b)
        else:
            assert serialize_metadata(rec_a) == serialize_metadata(rec_b)


class TestBuildMatText:
    def test_prefix(self):
        text = build_mat_text(RECORD, "Revenue grew this year.", "prefix")
        assert text == serialize_metadata(RECORD) + "\nRevenue grew this year."

    def test_suffix(self):
        text = build_mat_text(RECORD, "Revenue grew this year.", "suffix")
        assert text == "Revenue grew this year.\n" + serialize_metadata(RECORD)

    def test_empty_header_is_identity(self):
        assert build_mat_text(MetadataRecord(), "Chunk body.", "prefix") == "Chunk body."
        assert build_mat_text(MetadataRecord(), "Chunk body.", "suffix") == "Chunk body."

    def test_bad_variant(self):
        with pytest.raises(ValueError):
            build_mat_text(RECORD, "x", "infix")


class TestL2Normalize:
    def test_three_four_five(self):
        np.testing.assert_allclose(l2_normalize([3.0, 4.0]), [0.6, 0.8], rtol=0, atol=1e-15)

    def test_idempotent_on_unit(self):
        v = l2_normalize(np.array([1.0, 2.0, 2.0]))
        np.testing.assert_allclose(l2_normalize(v), v, atol=1e-15)
        assert abs(np.linalg.norm(v) - 1.0) < 1e-9

    def test_zero_vector(self):
        with pytest.raises(ZeroVector):
            l2_normalize(np.zeros(4))


class TestCosine:
    def test_self_similarity(self):
        v = np.array([0.3, -1.2, 0.5])
        assert cosine(v, v) == 1.0

    def test_orthogonal(self):
        assert cosine([1.0, 0.0], [0.0, 1.0]) == 0.0

    def test_antipodal(self):
        assert cosine([1.0, 0.0], [-1.0, 0.0]) == -1.0

    def test_dim_mismatch(self):
        with pytest.raises(DimMismatch):
            cosine([1.0, 0.0], [1.0, 0.0, 0.0])

    def test_zero_vector(self):
        with pytest.raises(ZeroVector):
            cosine([0.0, 0.0], [1.0, 0.0])

    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=50, deadline=None)
    def test_symmetry(self, seed):
        rng = np.random.default_rng(seed)
        a, b = rng.normal(size=8), rng.normal(size=8)
        assert abs(cosine(a, b) - cosine(b, a)) < 1e-12


def straight_line_fusion_oracle(e_text, e_meta, alpha):
    """Independent evaluation of the fusion formula in extended precision."""
    t = np.asarray(e_text, dtype=np.longdouble)
    m = np.asarray(e_meta, dtype=np.longdouble)
    t = t / np.sqrt((t * t).sum())
    m = m / np.sqrt((m * m).sum())
    combo = alpha * t + (1 - alpha) * m
    combo = combo / np.sqrt((combo * combo).sum())
    return np.asarray(combo, dtype=np.float64)


class TestFuseUnified:
    def test_alpha_one_is_text_exactly(self):
        rng = np.random.default_rng(0)
        t, m = rng.normal(size=16), rng.normal(size=16)
        np.testing.assert_array_equal(fuse_unified(t, m, 1.0), l2_normalize(t))

    def test_alpha_zero_is_meta_exactly(self):
        rng = np.random.default_rng(1)
        t, m = rng.normal(size=16), rng.normal(size=16)
        np.testing.assert_array_equal(fuse_unified(t, m, 0.0), l2_normalize(m))

    def test_identical_inputs_fixed_point(self):
        v = l2_normalize(np.arange(1.0, 9.0))
        for alpha in (0.25, 0.5, 0.9):
            np.testing.assert_allclose(fuse_unified(v, v, alpha), v, atol=1e-12)

    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=60, deadline=None)
    def test_matches_extended_precision_oracle(self, seed):
        rng = np.random.default_rng(seed)
        t, m = rng.normal(size=12), rng.normal(size=12)
        got = fuse_unified(t, m, 0.5)
        np.testing.assert_allclose(got, straight_line_fusion_oracle(t, m, 0.5), atol=1e-12)
        assert abs(np.linalg.norm(got) - 1.0) < 1e-9

    def test_degenerate_antipodal(self):
        v = l2_normalize(np.array([1.0, 1.0, 0.0]))
        with pytest.raises(DegenerateFusion):
            fuse_unified(v, -v, 0.5)

    def test_zero_input(self):
        with pytest.raises(ZeroVector):
            fuse_unified(np.zeros(3), np.ones(3), 0.5)

    def test_bad_alpha(self):
        with pytest.raises(ValueError):
            fuse_unified(np.ones(3), np.ones(3), 1.5)

    def test_rows_helper_matches_per_vector(self):
        rng = np.random.default_rng(2)
        text = rng.normal(size=(20, 8))
        meta = rng.normal(size=(20, 8))
        for alpha in (0.0, 0.3, 0.5, 1.0):
            rows = fuse_unified_rows(text, meta, alpha)
            for i in range(20):
                np.testing.assert_allclose(
                    rows[i], fuse_unified(text[i], meta[i], alpha), atol=1e-12
                )


def test_query_scaling_leaves_ranking_unchanged():
    """Scaling a query by any positive constant preserves the argsort of
    cosine scores against a fixed fused index."""
    rng = np.random.default_rng(3)
    rows = np.stack(
        [straight_line_fusion_oracle(rng.normal(size=16), rng.normal(size=16), 0.4) for _ in range(50)]
    )
    q = rng.normal(size=16)
    for scale in (1e-3, 0.5, 7.0, 1234.5):
        base = rows @ q
        scaled = rows @ (scale * q)
        assert np.array_equal(np.argsort(-base, kind="stable"), np.argsort(-scaled, kind="stable"))
