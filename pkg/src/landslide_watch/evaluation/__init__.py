"""Evaluation toolkit: confusion metrics, agreement, manifests, sweeps."""

from .kappa import AnnotationMatrix, fleiss_kappa, load_annotation_csv
from .manifests import (
    LABELS,
    SOURCES,
    SPLITS,
    LabeledManifest,
    ManifestEntry,
    ManifestStats,
    balanced_manifest,
    dump_manifest_csv,
    load_manifest_csv,
    manifest_stats,
    save_manifest_csv,
)
from .metrics import (
    ConfusionMatrix,
    Metrics,
    metrics_from_confusion,
    round_half_up,
)
from .synthetic import ARCHITECTURES, GRID_SIZE, synthetic_runs
from .sweeps import (
    LEARNING_RATE_GRID,
    OPTIMIZERS,
    SWEEP_HEADER,
    WEIGHT_DECAY_GRID,
    ArchitectureSummary,
    FactorEffect,
    RunRecord,
    WinCounts,
    architecture_summary,
    dump_sweep_csv,
    factor_effect_table,
    format_rate,
    leaderboard,
    load_sweep_csv,
    paired_win_count,
    read_sweep,
    validate_grid,
)

__all__ = [
    "ARCHITECTURES",
    "GRID_SIZE",
    "synthetic_runs",
    "AnnotationMatrix",
    "fleiss_kappa",
    "load_annotation_csv",
    "LABELS",
    "SOURCES",
    "SPLITS",
    "LabeledManifest",
    "ManifestEntry",
    "ManifestStats",
    "balanced_manifest",
    "dump_manifest_csv",
    "load_manifest_csv",
    "manifest_stats",
    "save_manifest_csv",
    "ConfusionMatrix",
    "Metrics",
    "metrics_from_confusion",
    "round_half_up",
    "LEARNING_RATE_GRID",
    "OPTIMIZERS",
    "SWEEP_HEADER",
    "WEIGHT_DECAY_GRID",
    "ArchitectureSummary",
    "FactorEffect",
    "RunRecord",
    "WinCounts",
    "architecture_summary",
    "dump_sweep_csv",
    "factor_effect_table",
    "format_rate",
    "leaderboard",
    "load_sweep_csv",
    "paired_win_count",
    "read_sweep",
    "validate_grid",
]
