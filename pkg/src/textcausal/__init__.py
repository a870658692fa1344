"""Cross-fitted doubly robust treatment-effect estimation with tabular or
text covariates, plus a synthetic benchmark with known ground truth."""

from .crossfit import CrossfitConfig, CrossfitResult, inject_nuisances, run_crossfit
from .data import (
    ColumnSchema,
    Dataset,
    FoldAssignment,
    Modality,
    Unit,
    load_dataset,
    partition_folds,
    write_dataset,
)
from .drcore import (
    BlpCoefficients,
    Estimate,
    ScoreRows,
    cate_predict,
    clip_propensity,
    dr_bias_terms,
    dr_label,
    estimate_ate,
    estimate_atet,
    estimate_gate,
    fit_blp,
)
from .evaluation import (
    LiftCurve,
    MetricsReport,
    area_ratio,
    cate_quantile_curve,
    compute_metrics,
    distribution_summary,
    gate_rank_table,
    lift_curve,
    pearson,
    spearman,
)
from .features import EmbeddingProviderConfig, FeaturizerConfig, embed_remote, featurize
from .synthetic import SyntheticConfig, corrupt_nuisances, generate, oracle_estimands

__all__ = [
    "BlpCoefficients",
    "ColumnSchema",
    "CrossfitConfig",
    "CrossfitResult",
    "Dataset",
    "EmbeddingProviderConfig",
    "Estimate",
    "FeaturizerConfig",
    "FoldAssignment",
    "LiftCurve",
    "MetricsReport",
    "Modality",
    "ScoreRows",
    "SyntheticConfig",
    "Unit",
    "area_ratio",
    "cate_predict",
    "cate_quantile_curve",
    "clip_propensity",
    "compute_metrics",
    "corrupt_nuisances",
    "distribution_summary",
    "dr_bias_terms",
    "dr_label",
    "embed_remote",
    "estimate_ate",
    "estimate_atet",
    "estimate_gate",
    "featurize",
    "fit_blp",
    "gate_rank_table",
    "generate",
    "inject_nuisances",
    "lift_curve",
    "load_dataset",
    "oracle_estimands",
    "partition_folds",
    "pearson",
    "run_crossfit",
    "spearman",
    "write_dataset",
]

__version__ = "0.1.0"
