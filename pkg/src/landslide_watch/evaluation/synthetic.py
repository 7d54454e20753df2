"""Deterministic synthetic sweep grids.

The full factorial is 2 optimizers x 7 architectures x 2 balancing settings
x 5 learning rates x 4 weight decays = 560 runs. Metrics are a pure hash of
the configuration plus a tag, so grids are reproducible anywhere without an
RNG state, and changing the tag reshuffles every value.
"""

from __future__ import annotations

import hashlib

from .sweeps import LEARNING_RATE_GRID, OPTIMIZERS, WEIGHT_DECAY_GRID, RunRecord

ARCHITECTURES = (
    "VGG16",
    "ResNet18",
    "ResNet50",
    "ResNet101",
    "DenseNet",
    "InceptionNet",
    "EfficientNet",
)

GRID_SIZE = (
    len(OPTIMIZERS) * len(ARCHITECTURES) * 2 * len(LEARNING_RATE_GRID) * len(WEIGHT_DECAY_GRID)
)


def _unit(tag: str) -> float:
    digest = hashlib.md5(tag.encode("utf-8")).hexdigest()
    return int(digest, 16) % 10**6 / 10**6


def synthetic_runs(tag: str = "v1") -> list[RunRecord]:
    runs = []
    for optimizer in OPTIMIZERS:
        for architecture in ARCHITECTURES:
            for balancing in (False, True):
                for lr in LEARNING_RATE_GRID:
                    for wd in WEIGHT_DECAY_GRID:
                        key = f"{tag}:{optimizer}:{architecture}:{int(balancing)}:{lr:e}:{wd:e}"
                        runs.append(
                            RunRecord(
                                optimizer=optimizer,
                                architecture=architecture,
                                class_balancing=balancing,
                                learning_rate=lr,
                                weight_decay=wd,
                                accuracy=round(0.60 + 0.38 * _unit(key + ":acc"), 6),
                                precision=round(0.50 + 0.45 * _unit(key + ":prec"), 6),
                                recall=round(0.50 + 0.45 * _unit(key + ":rec"), 6),
                                f1=round(0.55 + 0.40 * _unit(key + ":f1"), 6),
                            )
                        )
    return runs
