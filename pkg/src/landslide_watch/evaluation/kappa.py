"""Fleiss' kappa: chance-corrected agreement for a fixed number of raters.

Input is an items x categories matrix where cell (i, j) counts the raters
assigning item i to category j. Agreement per item is
P_i = (sum_j c_ij^2 - n) / (n (n - 1)); chance agreement is the sum of
squared category proportions over all assignments; kappa is
(mean(P_i) - P_e) / (1 - P_e). The degenerate case where every rating lands
in one category has P_e = 1 and is defined as perfect agreement (1.0).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence


@dataclass(frozen=True)
class AnnotationMatrix:
    counts: tuple[tuple[int, ...], ...]
    n_raters: int

    def __post_init__(self):
        if len(self.counts) < 1:
            raise ValueError("at least one item is required")
        k = len(self.counts[0])
        if k < 2:
            raise ValueError("at least two categories are required")
        if self.n_raters < 2:
            raise ValueError("at least two raters are required")
        for i, row in enumerate(self.counts):
            if len(row) != k:
                raise ValueError(f"row {i} has {len(row)} categories, expected {k}")
            if any((not isinstance(c, int)) or isinstance(c, bool) or c < 0 for c in row):
                raise ValueError(f"row {i} contains a non-count value")
            if sum(row) != self.n_raters:
                raise ValueError(
                    f"row {i} sums to {sum(row)}, expected {self.n_raters} raters"
                )

    @property
    def n_items(self) -> int:
        return len(self.counts)

    @property
    def n_categories(self) -> int:
        return len(self.counts[0])

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]]) -> "AnnotationMatrix":
        """Build from raw count rows, inferring the rater count from row sums."""
        if not rows:
            raise ValueError("at least one item is required")
        counts = tuple(tuple(int(c) for c in row) for row in rows)
        return cls(counts=counts, n_raters=sum(counts[0]))


def fleiss_kappa(m: AnnotationMatrix) -> float:
    n = m.n_raters
    total = m.n_items * n
    category_totals = [sum(row[j] for row in m.counts) for j in range(m.n_categories)]
    p_categories = [t / total for t in category_totals]
    p_bar = sum(
        (sum(c * c for c in row) - n) / (n * (n - 1)) for row in m.counts
    ) / m.n_items
    p_expected = sum(p * p for p in p_categories)
    if p_expected >= 1.0:
        return 1.0
    return (p_bar - p_expected) / (1.0 - p_expected)


def load_annotation_csv(path) -> AnnotationMatrix:
    """Read an items x categories matrix of integer counts; a non-numeric
    first row is treated as a header and skipped."""
    rows: list[list[int]] = []
    with open(Path(path), newline="", encoding="utf-8") as fh:
        for line_no, cells in enumerate(csv.reader(fh)):
            if not cells or all(not c.strip() for c in cells):
                continue
            try:
                rows.append([int(c) for c in cells])
            except ValueError:
                if line_no == 0:
                    continue
                raise ValueError(f"non-integer count on line {line_no + 1}") from None
    return AnnotationMatrix.from_rows(rows)
