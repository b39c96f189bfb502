"""Metadata-aware dense retrieval: strategies, metrics, and geometry analysis.

The library covers the full pipeline over metadata-annotated chunked
corpora: loading/validation, frozen-encoder embedding with a persistent
cache, exact cosine indexing, six retrieval strategies (plain content,
metadata prefix/suffix, unified weighted-sum fusion, late fusion, query
reformulation), four retrieval metrics, fusion-weight sweeps, field
ablations, and embedding-space separation statistics.
"""

from .corpus import (
    ALL_FIELDS,
    Chunk,
    Corpus,
    DocumentKey,
    MetadataRecord,
    QueryCase,
    ablate_metadata,
    chunk_text,
    load_corpus,
    save_corpus,
)
from .encoder import (
    CachedEncoder,
    DeterministicEncoder,
    EmbeddingCache,
    EncoderDescriptor,
    RemoteEncoder,
    cache_key,
    encode_batch,
)
from .evaluation import (
    CANONICAL_ABLATIONS,
    DEFAULT_ALPHAS,
    MetricsSummary,
    QueryOutcome,
    ablation_run,
    alpha_sweep,
    evaluate_strategy,
    metrics_rows,
    run_queries,
    summarize,
    summarize_by_category,
    write_json,
    write_metrics_csv,
)
from .fusion import (
    build_mat_text,
    cosine,
    fuse_unified,
    fuse_unified_rows,
    l2_normalize,
    serialize_metadata,
)
from .index import (
    VectorIndex,
    build_index,
    full_ranking,
    load_index,
    save_index,
    topk,
)
from .retrieval import (
    IndexBundle,
    RemoteReformulator,
    RuleBasedReformulator,
    StrategyConfig,
    build_bundle,
    late_fusion,
    load_alias_table,
    mat_prefix,
    mat_suffix,
    plain,
    reformulate_query,
    reformulated,
    retrieve,
    retrieve_embedded,
    unified,
)
from .separation import (
    PropositionReport,
    SeparationReport,
    pair_separation,
    proposition_check,
)
from . import errors, synthetic

__version__ = "0.1.0"
