"""Cross-modal text/image retrieval over precomputed embedding stores."""

from .engine import (
    MockEncoder,
    Query,
    RankedResult,
    RemoteEncoder,
    SearchEngine,
    mock_encoder,
    remote_encoder,
)
from .errors import (
    ChecksumMismatchError,
    DataError,
    DimMismatchError,
    EncoderError,
    EncoderHTTPError,
    EncoderResponseError,
    EncoderTimeoutError,
    NpyFormatError,
)
from .evalbench import (
    LatencyReport,
    RecallReport,
    SplitSpec,
    generate_synthetic_corpus,
    latency_bench,
    recall_at_k,
    split_dataset,
)
from .scoring import (
    FusionConfig,
    QueryEmbedding,
    ScoreBreakdown,
    cosine,
    fuse,
    global_scores,
    local_alignment_score,
    rank_top_k,
    score_query_against_corpus,
)
from .store import (
    CatalogEntry,
    CorpusStore,
    EmbeddingMatrix,
    LocalEmbeddingSet,
    StoreManifest,
    load_corpus,
    load_global_matrix,
    load_local_tensor,
    load_manifest,
    normalize_rows,
    write_array_file,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
