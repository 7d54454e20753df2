"""Aggregations over hyperparameter-sweep run records.

A sweep is a list of runs, one per trained configuration (optimizer,
architecture, class balancing, learning rate, weight decay) with its four
validation metrics. The operations here produce the standard report views:
a leaderboard, per-architecture mean/std/average-rank, learning-rate and
weight-decay effect tables, and paired win counts.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from statistics import fmean, pstdev, stdev
from typing import Iterable, Literal, Sequence

OPTIMIZERS = ("adam", "sgd")
LEARNING_RATE_GRID = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6)
WEIGHT_DECAY_GRID = (1e-2, 1e-3, 1e-4, 1e-5)

SWEEP_HEADER = [
    "optimizer",
    "architecture",
    "class_balancing",
    "learning_rate",
    "weight_decay",
    "accuracy",
    "precision",
    "recall",
    "f1",
]


@dataclass(frozen=True)
class RunRecord:
    optimizer: str
    architecture: str
    class_balancing: bool
    learning_rate: float
    weight_decay: float
    accuracy: float
    precision: float
    recall: float
    f1: float

    def __post_init__(self):
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if not self.architecture:
            raise ValueError("empty architecture")
        for name in ("accuracy", "precision", "recall", "f1"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {value!r}")
        if self.learning_rate <= 0 or self.weight_decay <= 0:
            raise ValueError("learning_rate and weight_decay must be positive")

    @property
    def combo(self) -> tuple:
        """Hyperparameter combination shared across architectures."""
        return (self.optimizer, self.class_balancing, self.learning_rate, self.weight_decay)


def _on_grid(value: float, grid: Sequence[float]) -> bool:
    return any(math.isclose(value, g, rel_tol=1e-9) for g in grid)


def validate_grid(runs: Iterable[RunRecord]):
    """Check learning rates and weight decays against the standard sweep grids."""
    for index, run in enumerate(runs):
        if not _on_grid(run.learning_rate, LEARNING_RATE_GRID):
            raise ValueError(f"run {index}: learning_rate {run.learning_rate!r} off grid")
        if not _on_grid(run.weight_decay, WEIGHT_DECAY_GRID):
            raise ValueError(f"run {index}: weight_decay {run.weight_decay!r} off grid")


def format_rate(value: float) -> str:
    """Scientific notation with a minimal mantissa, e.g. 1e-04 or 2.5e-03."""
    mantissa, _, exponent = f"{value:.12e}".partition("e")
    mantissa = mantissa.rstrip("0").rstrip(".")
    return f"{mantissa}e{exponent}"


def _format_bool(value: bool) -> str:
    return "yes" if value else "no"


def _parse_bool(text: str, where: str) -> bool:
    folded = text.strip().lower()
    if folded in ("yes", "true", "1"):
        return True
    if folded in ("no", "false", "0"):
        return False
    raise ValueError(f"{where}: bad class_balancing value {text!r}")


def load_sweep_csv(path, enforce_grid: bool = True) -> list[RunRecord]:
    with open(Path(path), newline="", encoding="utf-8") as fh:
        return read_sweep(fh, enforce_grid=enforce_grid)


def read_sweep(fh, enforce_grid: bool = True) -> list[RunRecord]:
    reader = csv.reader(fh)
    header = next(reader, None)
    if header is None or [c.strip() for c in header] != SWEEP_HEADER:
        raise ValueError(f"sweep CSV must start with header {','.join(SWEEP_HEADER)!r}")
    runs = []
    for line_no, cells in enumerate(reader, start=2):
        if not cells:
            continue
        if len(cells) != len(SWEEP_HEADER):
            raise ValueError(f"line {line_no}: expected {len(SWEEP_HEADER)} columns")
        where = f"line {line_no}"
        try:
            runs.append(
                RunRecord(
                    optimizer=cells[0].strip().lower(),
                    architecture=cells[1].strip(),
                    class_balancing=_parse_bool(cells[2], where),
                    learning_rate=float(cells[3]),
                    weight_decay=float(cells[4]),
                    accuracy=float(cells[5]),
                    precision=float(cells[6]),
                    recall=float(cells[7]),
                    f1=float(cells[8]),
                )
            )
        except ValueError as exc:
            raise ValueError(f"{where}: {exc}" if where not in str(exc) else str(exc)) from None
    if not runs:
        raise ValueError("sweep CSV contains no runs")
    if enforce_grid:
        validate_grid(runs)
    return runs


def dump_sweep_csv(runs: Iterable[RunRecord]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(SWEEP_HEADER)
    for run in runs:
        writer.writerow(
            [
                run.optimizer,
                run.architecture,
                _format_bool(run.class_balancing),
                format_rate(run.learning_rate),
                format_rate(run.weight_decay),
                repr(run.accuracy),
                repr(run.precision),
                repr(run.recall),
                repr(run.f1),
            ]
        )
    return out.getvalue()


def _leaderboard_key(run: RunRecord):
    # Descending F1; ties resolved by the configuration so the ordering is
    # total and independent of input order; metrics last for duplicate
    # configurations, covering every field so equal keys mean equal records.
    return (
        -run.f1,
        run.architecture.casefold(),
        run.architecture,
        run.optimizer,
        run.learning_rate,
        run.weight_decay,
        run.class_balancing,
        -run.accuracy,
        -run.precision,
        -run.recall,
    )


def leaderboard(runs: Sequence[RunRecord], top_k: int | None = None) -> list[RunRecord]:
    """Runs ordered by descending F1 with a deterministic tie-break."""
    if not runs:
        raise ValueError("no runs to rank")
    ordered = sorted(runs, key=_leaderboard_key)
    return ordered if top_k is None else ordered[:top_k]


@dataclass(frozen=True)
class ArchitectureSummary:
    architecture: str
    mean_f1: float
    std_f1: float
    avg_rank: float


def _std(values: Sequence[float], std: str) -> float:
    if std == "population":
        return pstdev(values)
    if std == "sample":
        return stdev(values) if len(values) > 1 else 0.0
    raise ValueError(f"std must be 'population' or 'sample', got {std!r}")


def _ranks_desc(values: Sequence[float]) -> list[float]:
    """Competition-free ranks for descending values; ties share the mean rank."""
    order = sorted(range(len(values)), key=lambda i: -values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mean_rank = (i + j) / 2.0 + 1.0
        for position in range(i, j + 1):
            ranks[order[position]] = mean_rank
        i = j + 1
    return ranks


def architecture_summary(
    runs: Sequence[RunRecord], std: str = "population"
) -> list[ArchitectureSummary]:
    """Per-architecture mean/std of F1 plus the average rank over the shared
    hyperparameter combinations (1 = best; ties share the mean rank).

    Requires a balanced factorial design: every architecture must appear with
    the identical set of combinations, exactly once each.
    """
    if not runs:
        raise ValueError("no runs to summarize")
    by_arch: dict[str, dict[tuple, float]] = {}
    for run in runs:
        cell = by_arch.setdefault(run.architecture, {})
        if run.combo in cell:
            raise ValueError(
                f"duplicate run for architecture {run.architecture!r} at combo {run.combo!r}"
            )
        cell[run.combo] = run.f1
    all_combos = set()
    for combos in by_arch.values():
        all_combos.update(combos)
    missing = []
    for arch in sorted(by_arch):
        for combo in sorted(all_combos, key=repr):
            if combo not in by_arch[arch]:
                missing.append((arch, combo))
    if missing:
        listing = "; ".join(f"{arch}: {combo}" for arch, combo in missing[:20])
        raise ValueError(f"unbalanced design, {len(missing)} missing combination(s): {listing}")

    architectures = sorted(by_arch)
    rank_sums = {arch: 0.0 for arch in architectures}
    for combo in all_combos:
        f1s = [by_arch[arch][combo] for arch in architectures]
        for arch, rank in zip(architectures, _ranks_desc(f1s)):
            rank_sums[arch] += rank
    n_combos = len(all_combos)
    summaries = [
        ArchitectureSummary(
            architecture=arch,
            mean_f1=fmean(by_arch[arch].values()),
            std_f1=_std(list(by_arch[arch].values()), std),
            avg_rank=rank_sums[arch] / n_combos,
        )
        for arch in architectures
    ]
    summaries.sort(key=lambda s: (s.avg_rank, s.architecture.casefold()))
    return summaries


@dataclass(frozen=True)
class FactorEffect:
    optimizer: str
    value: float
    mean_f1: float
    std_f1: float
    count: int


def factor_effect_table(
    runs: Sequence[RunRecord],
    factor: Literal["lr", "wd"],
    std: str = "population",
) -> list[FactorEffect]:
    """Mean/std of F1 per (optimizer, factor value), values ascending."""
    if factor not in ("lr", "wd"):
        raise ValueError(f"factor must be 'lr' or 'wd', got {factor!r}")
    attr = "learning_rate" if factor == "lr" else "weight_decay"
    groups: dict[tuple[str, float], list[float]] = {}
    for run in runs:
        groups.setdefault((run.optimizer, getattr(run, attr)), []).append(run.f1)
    return [
        FactorEffect(
            optimizer=optimizer,
            value=value,
            mean_f1=fmean(f1s),
            std_f1=_std(f1s, std),
            count=len(f1s),
        )
        for (optimizer, value), f1s in sorted(groups.items())
    ]


@dataclass(frozen=True)
class WinCounts:
    factor: str
    level_a: str
    level_b: str
    wins_a: int
    wins_b: int
    ties: int

    @property
    def pairs(self) -> int:
        return self.wins_a + self.wins_b + self.ties


def paired_win_count(
    runs: Sequence[RunRecord], factor: Literal["optimizer", "class_balancing"]
) -> WinCounts:
    """Head-to-head F1 wins over run pairs differing only in the factor.

    Level a is ``adam`` for the optimizer factor and ``yes`` (balanced) for
    class balancing; exact F1 equality counts as a tie. A configuration with
    two runs at the same factor level is a validation error.
    """
    if factor == "optimizer":
        levels = ("adam", "sgd")
        level_of = lambda run: run.optimizer  # noqa: E731
        key_of = lambda run: (  # noqa: E731
            run.architecture,
            run.class_balancing,
            run.learning_rate,
            run.weight_decay,
        )
        names = ("adam", "sgd")
    elif factor == "class_balancing":
        levels = (True, False)
        level_of = lambda run: run.class_balancing  # noqa: E731
        key_of = lambda run: (  # noqa: E731
            run.optimizer,
            run.architecture,
            run.learning_rate,
            run.weight_decay,
        )
        names = ("yes", "no")
    else:
        raise ValueError(f"factor must be 'optimizer' or 'class_balancing', got {factor!r}")

    table: dict[tuple, dict] = {}
    for run in runs:
        cell = table.setdefault(key_of(run), {})
        level = level_of(run)
        if level in cell:
            raise ValueError(f"duplicate run for configuration {key_of(run)!r} at level {level!r}")
        cell[level] = run.f1
    wins_a = wins_b = ties = 0
    for cell in table.values():
        if levels[0] not in cell or levels[1] not in cell:
            continue
        f1_a, f1_b = cell[levels[0]], cell[levels[1]]
        if f1_a > f1_b:
            wins_a += 1
        elif f1_b > f1_a:
            wins_b += 1
        else:
            ties += 1
    return WinCounts(
        factor=factor,
        level_a=names[0],
        level_b=names[1],
        wins_a=wins_a,
        wins_b=wins_b,
        ties=ties,
    )
