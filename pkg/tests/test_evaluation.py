import csv
import json
import math

import pytest

from metaret.encoder import DeterministicEncoder
from metaret.errors import NoQueries
from metaret.evaluation import (
    CANONICAL_ABLATIONS,
    ablation_run,
    alpha_sweep,
    evaluate_strategy,
    metrics_rows,
    run_queries,
    summaries_to_json,
    summarize,
    summarize_by_category,
    write_json,
    write_metrics_csv,
)
from metaret.index import build_index
from metaret.retrieval import IndexBundle, build_bundle, late_fusion, mat_prefix, plain, unified
from metaret.synthetic import random_corpus
from metaret.corpus import ALL_FIELDS


def combined(per_category, metric, k=None):
    """Aggregate per-category percentages back to an all-queries figure."""
    total = sum(s.n_queries for s in per_category.values())
    if k is None:
        return sum(getattr(s, metric) * s.n_queries for s in per_category.values()) / total
    return sum(getattr(s, metric)[k] * s.n_queries for s in per_category.values()) / total


class TestOutcomes:
    def test_supporting_chunk_rank_one(self, synthetic, wide_encoder):
        bundle = build_bundle(synthetic, unified(0.5), wide_encoder)
        outcomes = run_queries(synthetic, bundle)
        by_id = {o.query_id: o for o in outcomes}
        assert all(o.first_support_rank == 1 for o in by_id.values())
        summary = summarize(outcomes, k_max=10, failure_cap=50)
        assert all(summary.context_at_k[k] == 100.0 for k in range(1, 11))
        assert summary.avg_matched_rank == 1.0

    def test_first_doc_rank_never_exceeds_support_rank(self, small_random, encoder):
        bundle = build_bundle(small_random, plain(), encoder)
        for o in run_queries(small_random, bundle):
            if o.first_support_rank is not None:
                assert o.first_target_doc_rank is not None
                assert o.first_target_doc_rank <= o.first_support_rank

    def test_excluded_supporting_chunks_fail_everything(self, synthetic, encoder):
        supported = {cid for q in synthetic.queries for cid in q.supporting_chunk_ids}
        entries = [
            (c.chunk_id, encoder.encode(c.text))
            for c in synthetic.chunks
            if c.chunk_id not in supported
        ]
        bundle = IndexBundle(
            strategy=plain(),
            encoder=encoder,
            text_index=build_index(entries, normalize=True),
        )
        summary = summarize(run_queries(synthetic, bundle), k_max=10, failure_cap=50)
        assert summary.failure_rate == 100.0
        assert all(v == 0.0 for v in summary.context_at_k.values())
        assert math.isnan(summary.avg_matched_rank)

    def test_no_queries_raises(self, encoder):
        corpus = random_corpus(n_chunks=20, n_docs=2, n_queries=0, seed=1)
        bundle = build_bundle(corpus, plain(), encoder)
        with pytest.raises(NoQueries):
            run_queries(corpus, bundle)


class TestMetricInvariants:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    @pytest.mark.parametrize("make", [plain, lambda: unified(0.5), lambda: late_fusion(0.3)])
    def test_invariants_on_random_corpora(self, seed, make, encoder):
        corpus = random_corpus(n_chunks=90, n_docs=7, n_queries=18, seed=seed)
        bundle = build_bundle(corpus, make(), encoder)
        k_max = 10
        for summary in evaluate_strategy(corpus, bundle, k_max=k_max, failure_cap=k_max).values():
            for k in range(1, k_max + 1):
                assert summary.context_at_k[k] <= summary.title_at_k[k]
                if k > 1:
                    assert summary.context_at_k[k] >= summary.context_at_k[k - 1]
                    assert summary.title_at_k[k] >= summary.title_at_k[k - 1]
                assert 0.0 <= summary.context_at_k[k] <= 100.0
            # failure complements Context at the cap, exactly
            assert summary.failure_rate == 100.0 - summary.context_at_k[k_max]

    def test_categories_reported_separately(self, small_random, encoder):
        bundle = build_bundle(small_random, plain(), encoder)
        per_cat = evaluate_strategy(small_random, bundle)
        assert set(per_cat) == {"general", "in_depth"}
        assert sum(s.n_queries for s in per_cat.values()) == len(small_random.queries)

    def test_failure_cap_must_cover_k_max(self, small_random, encoder):
        bundle = build_bundle(small_random, plain(), encoder)
        with pytest.raises(ValueError):
            evaluate_strategy(small_random, bundle, k_max=10, failure_cap=5)


class TestAlphaSweep:
    def test_endpoint_matches_plain(self, encoder):
        corpus = random_corpus(n_chunks=60, n_docs=5, n_queries=12, seed=9)
        sweep = alpha_sweep(corpus, encoder, family="late_fusion", alphas=[0.0, 1.0], k_max=5)
        plain_metrics = evaluate_strategy(
            corpus, build_bundle(corpus, plain(), encoder), k_max=5
        )
        assert sweep[0.0] == plain_metrics

    def test_row_cardinality(self, encoder):
        corpus = random_corpus(n_chunks=40, n_docs=4, n_queries=8, seed=10)
        alphas = [round(0.1 * i, 1) for i in range(11)]
        sweep = alpha_sweep(corpus, encoder, family="unified", alphas=alphas, k_max=5)
        assert len(sweep) == 11
        assert sorted(sweep) == alphas

    def test_interior_optimum_on_synthetic(self, synthetic, wide_encoder):
        alphas = [round(0.1 * i, 1) for i in range(11)]
        sweep = alpha_sweep(synthetic, wide_encoder, family="late_fusion", alphas=alphas, k_max=5)
        context5 = {a: combined(per_cat, "context_at_k", 5) for a, per_cat in sweep.items()}
        interior_best = max(v for a, v in context5.items() if a not in (0.0, 1.0))
        assert interior_best > context5[0.0]
        assert interior_best > context5[1.0]

    def test_no_reencoding_during_sweep(self, synthetic):
        enc = DeterministicEncoder(dim=256)
        alpha_sweep(synthetic, enc, family="unified", alphas=[0.0, 0.25, 0.5, 0.75, 1.0], k_max=5)
        # one call per chunk text, per metadata header, per query: never more
        assert enc.call_count == 2 * len(synthetic.chunks) + len(synthetic.queries)


class TestAblation:
    def test_mask_everything_equals_plain(self, encoder):
        corpus = random_corpus(n_chunks=50, n_docs=5, n_queries=10, seed=12)
        results = ablation_run(corpus, encoder, [("baseline", ALL_FIELDS)], k_max=5)
        plain_metrics = evaluate_strategy(corpus, build_bundle(corpus, plain(), encoder), k_max=5)
        assert results["baseline"] == plain_metrics

    def test_empty_mask_equals_standard_mat_prefix(self, encoder):
        corpus = random_corpus(n_chunks=50, n_docs=5, n_queries=10, seed=13)
        results = ablation_run(corpus, encoder, [("full", frozenset())], k_max=5)
        mat_metrics = evaluate_strategy(
            corpus, build_bundle(corpus, mat_prefix(), encoder), k_max=5
        )
        assert results["full"] == mat_metrics

    def test_company_year_dominates_section(self, synthetic_ablation, wide_encoder):
        results = ablation_run(synthetic_ablation, wide_encoder, CANONICAL_ABLATIONS, k_max=5)
        title5 = {name: combined(per_cat, "title_at_k", 5) for name, per_cat in results.items()}
        drop_section = title5["full"] - title5["wo_section"]
        drop_company_year = title5["full"] - title5["wo_company_year"]
        assert drop_company_year > drop_section


class TestReports:
    def test_csv_row_count_formula(self, small_random, encoder, tmp_path):
        k_max = 10
        results = {}
        for strategy in (plain(), unified(0.5)):
            bundle = build_bundle(small_random, strategy, encoder)
            results[strategy.tag()] = evaluate_strategy(small_random, bundle, k_max=k_max)
        rows = metrics_rows(results)
        n_categories = 2
        assert len(rows) == 2 * n_categories * (2 * k_max + 2)
        path = tmp_path / "metrics.csv"
        write_metrics_csv(path, rows)
        with open(path, newline="") as fh:
            parsed = list(csv.reader(fh))
        assert parsed[0] == ["strategy", "category", "metric", "K", "value"]
        assert len(parsed) == len(rows) + 1

    def test_csv_deterministic(self, small_random, encoder, tmp_path):
        def emit(path):
            bundle = build_bundle(small_random, unified(0.5), encoder)
            results = {"unified(alpha=0.5)": evaluate_strategy(small_random, bundle)}
            write_metrics_csv(path, metrics_rows(results))
            return path.read_bytes()

        assert emit(tmp_path / "a.csv") == emit(tmp_path / "b.csv")

    def test_json_mirrors_summary(self, small_random, encoder, tmp_path):
        bundle = build_bundle(small_random, plain(), encoder)
        results = {"plain": evaluate_strategy(small_random, bundle)}
        payload = summaries_to_json(results, seed=7)
        path = tmp_path / "metrics.json"
        write_json(path, payload)
        loaded = json.loads(path.read_text())
        assert loaded["seed"] == 7
        summary = results["plain"]["general"]
        assert loaded["results"]["plain"]["general"]["failure_rate"] == summary.failure_rate
        assert loaded["results"]["plain"]["general"]["context_at_k"]["5"] == summary.context_at_k[5]

    def test_nan_avg_rank_serializes_as_null(self, tmp_path):
        from metaret.evaluation import MetricsSummary

        summary = MetricsSummary(
            context_at_k={1: 0.0},
            title_at_k={1: 0.0},
            avg_matched_rank=float("nan"),
            failure_rate=100.0,
            n_queries=3,
            failure_cap=10,
        )
        payload = summaries_to_json({"s": {"general": summary}})
        path = tmp_path / "x.json"
        write_json(path, payload)
        assert json.loads(path.read_text())["results"]["s"]["general"]["avg_matched_rank"] is None


def test_summarize_by_category_partitions(small_random, encoder):
    bundle = build_bundle(small_random, plain(), encoder)
    outcomes = run_queries(small_random, bundle)
    per_cat = summarize_by_category(outcomes)
    assert sum(s.n_queries for s in per_cat.values()) == len(outcomes)
    pooled = summarize(outcomes)
    assert pooled.n_queries == len(outcomes)
