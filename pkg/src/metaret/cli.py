"""Command-line front end: ingest -> embed -> index -> query/eval/sweep/
ablate/analyze-space -> report.

Structured settings (strategies, masks, alpha grids) live in a JSON config
file; paths and toggles are flags, with flags taking precedence. Exit codes:
0 success, 1 validation error, 2 remote failure, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import charts
from .corpus import Corpus, load_corpus
from .encoder import CachedEncoder, DeterministicEncoder, EmbeddingCache, RemoteEncoder, encode_batch
from .errors import InvalidParams, MetaretError, RemoteFailure, ValidationError
from .evaluation import (
    CANONICAL_ABLATIONS,
    DEFAULT_ALPHAS,
    _atomic_write,
    ablation_run,
    alpha_sweep,
    evaluate_strategy,
    metrics_rows,
    summaries_to_json,
    write_json,
    write_metrics_csv,
)
from .fusion import build_mat_text, fuse_unified_rows, serialize_metadata
from .index import save_index
from .retrieval import StrategyConfig, build_bundle, retrieve
from .separation import pair_separation

KNOWN_REMOTE_DIMS = {
    "text-embedding-3-small": 1536,
    "text-embedding-3-large": 3072,
    "bge-m3": 1024,
}

EXIT_OK, EXIT_VALIDATION, EXIT_REMOTE, EXIT_INTERNAL = 0, 1, 2, 3


@dataclass
class RunConfig:
    corpus: str | None = None
    encoder: str = "test"
    dim: int | None = None
    endpoint: str | None = None
    cache: str | None = None
    out: str = "out"
    seed: int = 0
    k_max: int = 10
    failure_cap: int = 50
    max_in_flight: int = 4
    strategies: list[dict] = field(default_factory=lambda: [{"variant": "plain"}])
    alphas: list[float] = field(default_factory=lambda: list(DEFAULT_ALPHAS))
    sweep_family: str = "late_fusion"
    ablations: list | None = None
    variants: list[str] = field(default_factory=lambda: ["plain", "unified@0.5", "mat_prefix"])
    pair_budget: int | None = None
    tail_threshold: float = 0.8

    @classmethod
    def load(cls, args: argparse.Namespace) -> "RunConfig":
        data: dict = {}
        if args.config:
            try:
                data = json.loads(Path(args.config).read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as exc:
                raise InvalidParams(f"cannot read config {args.config}: {exc}") from exc
        cfg = cls(**{k: v for k, v in data.items() if k in cls.__dataclass_fields__})
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidParams(f"unknown config keys: {sorted(unknown)}")
        for name in ("corpus", "out", "seed", "cache", "encoder"):
            value = getattr(args, name, None)
            if value is not None:
                setattr(cfg, name, value)
        return cfg

    def make_encoder(self):
        if self.encoder == "test":
            encoder = DeterministicEncoder(dim=self.dim or 256)
        elif self.encoder.startswith("remote:"):
            name = self.encoder.split(":", 1)[1]
            dim = self.dim or KNOWN_REMOTE_DIMS.get(name)
            if dim is None:
                raise InvalidParams(f"unknown remote model {name!r}: set dim in the config")
            if not self.endpoint:
                raise InvalidParams("remote encoder requires an endpoint in the config")
            encoder = RemoteEncoder(name=name, dim=dim, endpoint=self.endpoint)
        else:
            raise InvalidParams(f"encoder must be 'test' or 'remote:<name>', got {self.encoder!r}")
        if self.cache:
            encoder = CachedEncoder(encoder, EmbeddingCache(self.cache))
        return encoder

    def load_corpus(self) -> Corpus:
        if not self.corpus:
            raise InvalidParams("a corpus path is required (--corpus or config)")
        return load_corpus(self.corpus)

    def strategy_configs(self) -> list[StrategyConfig]:
        return [StrategyConfig.from_dict(d) for d in self.strategies]

    def out_dir(self) -> Path:
        path = Path(self.out)
        path.mkdir(parents=True, exist_ok=True)
        return path

    def run_stamp(self) -> dict:
        return {
            "seed": self.seed,
            "encoder": self.encoder,
            "corpus": self.corpus,
            "k_max": self.k_max,
            "failure_cap": self.failure_cap,
        }


def parse_strategy(spec: str) -> StrategyConfig:
    """Parse ``plain``, ``mat_prefix``, ``unified@0.5``, ``late_fusion@0.3``,
    or ``reformulated`` (default base) from a flag value."""
    variant, _, alpha = spec.partition("@")
    data: dict = {"variant": variant}
    if alpha:
        data["alpha"] = float(alpha)
    return StrategyConfig.from_dict(data)


def cmd_ingest(cfg: RunConfig, args) -> int:
    corpus = cfg.load_corpus()
    companies = Counter(c.doc_key.company for c in corpus.chunks)
    years = Counter(c.doc_key.year for c in corpus.chunks)
    categories = Counter(q.category for q in corpus.queries)
    print(f"corpus ok: {len(corpus.chunks)} chunks, {len(corpus.queries)} queries")
    for company, n in sorted(companies.items()):
        print(f"  company {company}: {n} chunks")
    for year, n in sorted(years.items()):
        print(f"  year {year}: {n} chunks")
    for category, n in sorted(categories.items()):
        print(f"  category {category}: {n} queries")
    return EXIT_OK


def cmd_embed(cfg: RunConfig, args) -> int:
    corpus = cfg.load_corpus()
    encoder = cfg.make_encoder()
    texts = [c.text for c in corpus.chunks]
    headers = [serialize_metadata(c.metadata) for c in corpus.chunks]
    headers = [h for h in headers if h]
    queries = [q.text for q in corpus.queries]
    total = 0
    for group in (texts, headers, queries):
        if group:
            total += len(encode_batch(encoder, group, cfg.max_in_flight))
    print(f"embedded {total} strings ({encoder.call_count} encoder calls)")
    return EXIT_OK


def cmd_index(cfg: RunConfig, args) -> int:
    corpus = cfg.load_corpus()
    encoder = cfg.make_encoder()
    out = cfg.out_dir()
    strategies = (
        [parse_strategy(args.strategy)] if args.strategy else cfg.strategy_configs()
    )
    for strategy in strategies:
        bundle = build_bundle(corpus, strategy, encoder, cfg.max_in_flight)
        for kind, idx in (
            ("text", bundle.text_index),
            ("meta", bundle.meta_index),
            ("fused", bundle.fused_index),
        ):
            if idx is None:
                continue
            path = out / f"{strategy.tag().replace('/', '_')}.{kind}.mrix"
            save_index(idx, path)
            print(f"wrote {path} ({len(idx)} rows, dim {idx.dim})")
    return EXIT_OK


def cmd_query(cfg: RunConfig, args) -> int:
    corpus = cfg.load_corpus()
    encoder = cfg.make_encoder()
    strategy = parse_strategy(args.strategy)
    bundle = build_bundle(corpus, strategy, encoder, cfg.max_in_flight)
    results = retrieve(bundle, args.query, args.k)
    for rank, (chunk_id, score) in enumerate(results, start=1):
        doc = corpus.chunk(chunk_id).doc_key
        print(f"{rank:3d}  {score:8.4f}  {chunk_id}  [{doc.company} {doc.year}]")
    return EXIT_OK


def cmd_eval(cfg: RunConfig, args) -> int:
    corpus = cfg.load_corpus()
    encoder = cfg.make_encoder()
    out = cfg.out_dir()
    results = {}
    for strategy in cfg.strategy_configs():
        bundle = build_bundle(corpus, strategy, encoder, cfg.max_in_flight)
        results[strategy.tag()] = evaluate_strategy(corpus, bundle, cfg.k_max, cfg.failure_cap)
    rows = metrics_rows(results, key_name="strategy")
    write_metrics_csv(out / "metrics.csv", rows, key_name="strategy")
    write_json(out / "metrics.json", summaries_to_json(results, **cfg.run_stamp()))
    print(f"wrote {out / 'metrics.csv'} ({len(rows)} rows) and {out / 'metrics.json'}")
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, args) -> int:
    corpus = cfg.load_corpus()
    encoder = cfg.make_encoder()
    out = cfg.out_dir()
    results = alpha_sweep(
        corpus,
        encoder,
        family=cfg.sweep_family,
        alphas=cfg.alphas,
        k_max=cfg.k_max,
        failure_cap=cfg.failure_cap,
        max_in_flight=cfg.max_in_flight,
    )
    keyed = {f"{alpha:g}": summary for alpha, summary in results.items()}
    rows = metrics_rows(keyed, key_name="alpha")
    write_metrics_csv(out / "sweep.csv", rows, key_name="alpha")
    write_json(
        out / "sweep.json",
        summaries_to_json(keyed, family=cfg.sweep_family, **cfg.run_stamp()),
    )
    for metric in ("context_at_k", "title_at_k"):
        charts.render_sweep_chart(out / "sweep.csv", out / f"sweep_{metric}.svg", metric=metric)
    for metric in ("avg_matched_rank", "failure_rate"):
        charts.render_sweep_chart(
            out / "sweep.csv", out / f"sweep_{metric}.svg", metric=metric, k=""
        )
    print(f"wrote {out / 'sweep.csv'} ({len(rows)} rows), JSON, and 4 charts")
    return EXIT_OK


def cmd_ablate(cfg: RunConfig, args) -> int:
    corpus = cfg.load_corpus()
    encoder = cfg.make_encoder()
    out = cfg.out_dir()
    if cfg.ablations:
        conditions = [(name, frozenset(mask)) for name, mask in cfg.ablations]
    else:
        conditions = list(CANONICAL_ABLATIONS)
    results = ablation_run(
        corpus, encoder, conditions, cfg.k_max, cfg.failure_cap, max_in_flight=cfg.max_in_flight
    )
    rows = metrics_rows(results, key_name="condition")
    write_metrics_csv(out / "ablate.csv", rows, key_name="condition")
    write_json(out / "ablate.json", summaries_to_json(results, **cfg.run_stamp()))
    charts.render_ablation_chart(out / "ablate.csv", out / "ablate_context.svg", "context_at_k")
    charts.render_ablation_chart(out / "ablate.csv", out / "ablate_title.svg", "title_at_k")
    print(f"wrote {out / 'ablate.csv'} ({len(rows)} rows), JSON, and 2 charts")
    return EXIT_OK


def cmd_analyze_space(cfg: RunConfig, args) -> int:
    corpus = cfg.load_corpus()
    encoder = cfg.make_encoder()
    out = cfg.out_dir()
    texts = [c.text for c in corpus.chunks]
    text_rows = np.stack(encode_batch(encoder, texts, cfg.max_in_flight))
    meta_rows = None
    variants: dict[str, np.ndarray] = {}
    for spec in cfg.variants:
        name, _, alpha = spec.partition("@")
        if name == "plain":
            variants[spec] = text_rows
        elif name == "unified":
            if meta_rows is None:
                headers = [serialize_metadata(c.metadata) for c in corpus.chunks]
                meta_rows = np.stack(encode_batch(encoder, headers, cfg.max_in_flight))
            variants[spec] = fuse_unified_rows(text_rows, meta_rows, float(alpha or 0.5))
        elif name in ("mat_prefix", "mat_suffix"):
            position = "prefix" if name == "mat_prefix" else "suffix"
            mat = [build_mat_text(c.metadata, c.text, position) for c in corpus.chunks]
            variants[spec] = np.stack(encode_batch(encoder, mat, cfg.max_in_flight))
        else:
            raise InvalidParams(f"analyze-space cannot embed variant {spec!r}")
    reports = pair_separation(
        corpus.chunks,
        variants,
        pair_budget=cfg.pair_budget,
        seed=cfg.seed,
        tail_threshold=cfg.tail_threshold,
    )
    csv_rows = ["variant,statistic,value"]
    for variant, report in reports.items():
        for stat, value in report.to_dict().items():
            rendered = f"{value:.6f}" if isinstance(value, float) else str(value)
            csv_rows.append(f"{variant},{stat},{rendered}")
    _atomic_write(out / "separation.csv", "\n".join(csv_rows) + "\n")
    write_json(
        out / "separation.json",
        {**cfg.run_stamp(), "reports": {v: r.to_dict() for v, r in reports.items()}},
    )
    charts.render_separation_chart(out / "separation.csv", out / "separation.svg")
    print(f"wrote {out / 'separation.csv'}, JSON, and chart for {len(reports)} variants")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="metaret", description="metadata-aware dense retrieval toolkit"
    )
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--corpus", help="corpus JSONL path")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--seed", type=int, help="run seed (recorded in outputs)")
    parser.add_argument("--encoder", help="test | remote:<model-name>")
    parser.add_argument("--cache", help="embedding cache path")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("ingest", help="validate a corpus and print counts")
    sub.add_parser("embed", help="warm the embedding cache for a corpus")
    p_index = sub.add_parser("index", help="build and persist strategy indexes")
    p_index.add_argument("--strategy", help="e.g. plain, mat_prefix, unified@0.5")
    p_query = sub.add_parser("query", help="run one query against a strategy")
    p_query.add_argument("--strategy", default="plain")
    p_query.add_argument("--query", required=True)
    p_query.add_argument("-k", type=int, default=5)
    sub.add_parser("eval", help="evaluate configured strategies")
    sub.add_parser("sweep", help="fusion-weight sweep")
    sub.add_parser("ablate", help="metadata field ablations")
    sub.add_parser("analyze-space", help="embedding-space separation statistics")
    return parser


_COMMANDS = {
    "ingest": cmd_ingest,
    "embed": cmd_embed,
    "index": cmd_index,
    "query": cmd_query,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "ablate": cmd_ablate,
    "analyze-space": cmd_analyze_space,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.load(args)
        return _COMMANDS[args.command](cfg, args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except RemoteFailure as exc:
        print(f"remote failure: {exc}", file=sys.stderr)
        return EXIT_REMOTE
    except MetaretError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
