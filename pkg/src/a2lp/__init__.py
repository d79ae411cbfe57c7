"""Transductive few-shot inference by label propagation over a kNN graph,
with optional gradient-based adaptation of the labeled support anchors."""

from .adaptation import (
    A2lpConfig,
    AdamState,
    AnchorProbabilities,
    Diagnostics,
    adam_step,
    anchor_cross_entropy,
    anchor_gradient,
    anchor_softmax,
    pipeline_loss,
    run_a2lp,
)
from .baselines import (
    ImprintedClassifier,
    PrototypeSet,
    imprint_and_finetune,
    plain_lp_classify,
    prototypical_classify,
)
from .embeddings import (
    EmbeddingSet,
    PreprocessMode,
    l2_normalize,
    load_embeddings,
    plc_preprocess,
    preprocess,
    save_embeddings,
)
from .episodes import Episode, episode_matrix, localize, validate_episode
from .errors import (
    A2lpError,
    ConvergenceError,
    FormatError,
    GraphError,
    ValidationError,
)
from .evaluation import (
    BenchmarkReport,
    SyntheticTaskSpec,
    generate_synthetic,
    render_report,
    run_benchmark,
    sample_episode,
    score,
)
from .gradcheck import gradient_check
from .graph import (
    GraphConfig,
    PropagationGraph,
    build_affinity,
    build_graph,
    cosine_similarity,
    normalize_graph,
)
from .propagation import (
    LabelMatrix,
    SimilarityMatrix,
    build_label_matrix,
    predict,
    propagate,
    propagate_iterative,
)

__version__ = "0.1.0"

__all__ = [
    "A2lpConfig",
    "A2lpError",
    "AdamState",
    "AnchorProbabilities",
    "BenchmarkReport",
    "ConvergenceError",
    "Diagnostics",
    "EmbeddingSet",
    "Episode",
    "FormatError",
    "GraphConfig",
    "GraphError",
    "ImprintedClassifier",
    "LabelMatrix",
    "PreprocessMode",
    "PropagationGraph",
    "PrototypeSet",
    "SimilarityMatrix",
    "SyntheticTaskSpec",
    "ValidationError",
    "adam_step",
    "anchor_cross_entropy",
    "anchor_gradient",
    "anchor_softmax",
    "build_affinity",
    "build_graph",
    "build_label_matrix",
    "cosine_similarity",
    "episode_matrix",
    "generate_synthetic",
    "gradient_check",
    "imprint_and_finetune",
    "l2_normalize",
    "load_embeddings",
    "localize",
    "normalize_graph",
    "pipeline_loss",
    "plain_lp_classify",
    "plc_preprocess",
    "predict",
    "preprocess",
    "propagate",
    "propagate_iterative",
    "prototypical_classify",
    "render_report",
    "run_a2lp",
    "run_benchmark",
    "sample_episode",
    "save_embeddings",
    "score",
    "validate_episode",
]
