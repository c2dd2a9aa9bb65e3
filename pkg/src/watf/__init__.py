"""Weighted adaptive threshold filtering of local descriptors for few-shot classification.

Public surface: the episode data model, the two-stage filtering pipeline,
the top-k cosine image-to-class classifier, the episodic evaluation harness
with diagnostics, a seeded synthetic benchmark generator, and the episode
pack file format.
"""

from .classify import ClassScore, class_score, classify, episode_loss, support_class_pools
from .descriptors import (
    DescriptorSet,
    Episode,
    EpisodeValidationError,
    Prototype,
    cosine,
    cosine_matrix,
    ensure_valid_episode,
    validate_episode,
)
from .diagnostics import (
    CompactnessMetrics,
    StatsSummary,
    WeightHistogram,
    collect_statistics,
    compactness_metrics,
    foreground_background_weight_means,
    weight_histogram,
)
from .filtering import (
    FilteredEpisode,
    FilterResult,
    WeightMatrix,
    adaptive_threshold,
    aggregate_weights,
    compute_prototypes,
    compute_weight_matrix,
    filter_descriptors,
    pooled_stats,
    watf_pipeline,
)
from .harness import (
    EpisodeOutcome,
    EvaluationError,
    EvaluationReport,
    RunConfig,
    evaluate,
    k_sweep,
    run_episode,
)
from .packs import PackError, content_hash, episode_content_hash, read_pack, write_pack
from .synth import (
    GenerationError,
    SeededGenerator,
    SynthEpisode,
    SynthSpec,
    generate_benchmark,
    generate_episode,
)

__version__ = "0.1.0"

__all__ = [
    "ClassScore",
    "CompactnessMetrics",
    "DescriptorSet",
    "Episode",
    "EpisodeOutcome",
    "EpisodeValidationError",
    "EvaluationError",
    "EvaluationReport",
    "FilteredEpisode",
    "FilterResult",
    "GenerationError",
    "PackError",
    "Prototype",
    "RunConfig",
    "SeededGenerator",
    "StatsSummary",
    "SynthEpisode",
    "SynthSpec",
    "WeightHistogram",
    "WeightMatrix",
    "adaptive_threshold",
    "aggregate_weights",
    "class_score",
    "classify",
    "collect_statistics",
    "compactness_metrics",
    "compute_prototypes",
    "compute_weight_matrix",
    "content_hash",
    "cosine",
    "cosine_matrix",
    "ensure_valid_episode",
    "episode_content_hash",
    "episode_loss",
    "evaluate",
    "filter_descriptors",
    "foreground_background_weight_means",
    "generate_benchmark",
    "generate_episode",
    "k_sweep",
    "pooled_stats",
    "read_pack",
    "run_episode",
    "support_class_pools",
    "validate_episode",
    "watf_pipeline",
    "weight_histogram",
    "write_pack",
]
