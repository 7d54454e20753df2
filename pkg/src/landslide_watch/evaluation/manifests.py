"""Labeled image manifests: CSV IO, contingency stats, class balancing."""

from __future__ import annotations

import csv
import io
import random
from dataclasses import dataclass, field
from pathlib import Path

LABELS = ("landslide", "not_landslide")
SOURCES = ("google", "twitter", "bgs")
SPLITS = ("train", "val", "test")

_HEADER = ["id", "label", "source", "split"]


@dataclass(frozen=True)
class ManifestEntry:
    image_id: str
    label: str
    source: str
    split: str

    def __post_init__(self):
        if not self.image_id:
            raise ValueError("empty image id")
        if self.label not in LABELS:
            raise ValueError(f"unknown label {self.label!r}")
        if self.source not in SOURCES:
            raise ValueError(f"unknown source {self.source!r}")
        if self.split not in SPLITS:
            raise ValueError(f"unknown split {self.split!r}")


@dataclass
class LabeledManifest:
    """Ordered list of labeled entries.

    Loaded manifests must have unique ids (which also keeps splits disjoint);
    manifests produced by oversampling intentionally repeat entries and skip
    that check.
    """

    entries: list[ManifestEntry] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def validate_unique_ids(self) -> "LabeledManifest":
        seen: set[str] = set()
        for entry in self.entries:
            if entry.image_id in seen:
                raise ValueError(f"duplicate id {entry.image_id!r}")
            seen.add(entry.image_id)
        return self

    def split_entries(self, split: str) -> list[ManifestEntry]:
        return [e for e in self.entries if e.split == split]


def load_manifest_csv(path) -> LabeledManifest:
    with open(Path(path), newline="", encoding="utf-8") as fh:
        return _read_manifest(fh)


def _read_manifest(fh) -> LabeledManifest:
    reader = csv.reader(fh)
    header = next(reader, None)
    if header is None or [c.strip() for c in header] != _HEADER:
        raise ValueError(f"manifest must start with header {','.join(_HEADER)!r}")
    entries = []
    for line_no, cells in enumerate(reader, start=2):
        if not cells:
            continue
        if len(cells) != 4:
            raise ValueError(f"line {line_no}: expected 4 columns, got {len(cells)}")
        try:
            entries.append(ManifestEntry(*[c.strip() for c in cells]))
        except ValueError as exc:
            raise ValueError(f"line {line_no}: {exc}") from None
    return LabeledManifest(entries).validate_unique_ids()


def dump_manifest_csv(manifest: LabeledManifest) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(_HEADER)
    for entry in manifest.entries:
        writer.writerow([entry.image_id, entry.label, entry.source, entry.split])
    return out.getvalue()


def save_manifest_csv(manifest: LabeledManifest, path):
    Path(path).write_text(dump_manifest_csv(manifest), encoding="utf-8")


@dataclass
class ManifestStats:
    by_source: dict
    by_label: dict
    split_totals: dict
    total: int


def manifest_stats(manifest: LabeledManifest) -> ManifestStats:
    """Exact per-(source, split) and per-(label, split) contingency counts."""
    by_source = {source: {split: 0 for split in SPLITS} for source in SOURCES}
    by_label = {label: {split: 0 for split in SPLITS} for label in LABELS}
    split_totals = {split: 0 for split in SPLITS}
    for entry in manifest.entries:
        by_source[entry.source][entry.split] += 1
        by_label[entry.label][entry.split] += 1
        split_totals[entry.split] += 1
    return ManifestStats(
        by_source=by_source,
        by_label=by_label,
        split_totals=split_totals,
        total=len(manifest.entries),
    )


def balanced_manifest(manifest: LabeledManifest, split: str, seed: int) -> LabeledManifest:
    """Oversample the minority class of one split until the classes match.

    Every original entry of the split appears once (so minority coverage is
    guaranteed), then the remaining deficit is drawn from the minority class
    with replacement using a seeded PRNG. Only the requested split is
    returned; the result repeats ids by construction.
    """
    if split not in SPLITS:
        raise ValueError(f"unknown split {split!r}")
    entries = manifest.split_entries(split)
    positives = [e for e in entries if e.label == LABELS[0]]
    negatives = [e for e in entries if e.label == LABELS[1]]
    if not positives or not negatives:
        raise ValueError(f"split {split!r} must contain both classes")
    if len(positives) == len(negatives):
        return LabeledManifest(list(entries))
    minority = positives if len(positives) < len(negatives) else negatives
    deficit = abs(len(positives) - len(negatives))
    rng = random.Random(seed)
    extras = rng.choices(minority, k=deficit)
    return LabeledManifest(list(entries) + extras)
