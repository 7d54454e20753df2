"""Durable detection storage with query and GeoJSON export.

Storage is an append-only JSONL log plus an in-memory index rebuilt on
startup. Writes are first-write-wins by image_id, so pipeline retries and
replays never mutate history. One writer, any number of readers.
"""

from __future__ import annotations

import json
import math
import os
import threading
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Iterable, Optional

from .classify import LABEL_LANDSLIDE, LABEL_NOT_LANDSLIDE, label_for
from .geo import SOURCE_NONE, GeoResult

STORED = "stored"
DEDUPLICATED = "deduplicated"


class StoreError(Exception):
    """Raised when the log cannot be read or durably appended."""


class FilterError(ValueError):
    """Raised for malformed query filters."""


def _require_aware(value: datetime, name: str) -> datetime:
    if not isinstance(value, datetime) or value.tzinfo is None:
        raise ValueError(f"{name} must be a timezone-aware datetime")
    return value


@dataclass(frozen=True)
class DetectionRecord:
    """One classified, geolocated image as persisted by the pipeline."""

    image_id: str
    post_id: str
    prob_landslide: float
    label: str
    model_id: str
    threshold: float
    geo: GeoResult
    created_at: datetime
    ingested_at: datetime

    def __post_init__(self):
        if not self.image_id or not self.post_id:
            raise ValueError("image_id and post_id must be non-empty")
        if not math.isfinite(self.prob_landslide) or not 0.0 <= self.prob_landslide <= 1.0:
            raise ValueError(f"prob_landslide must be in [0, 1], got {self.prob_landslide!r}")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError(f"threshold must be in [0, 1], got {self.threshold!r}")
        if self.label not in (LABEL_LANDSLIDE, LABEL_NOT_LANDSLIDE):
            raise ValueError(f"unknown label {self.label!r}")
        # The label must agree with the probability under the threshold that
        # was in force at write time.
        expected = label_for(self.prob_landslide, self.threshold)
        if self.label != expected:
            raise ValueError(
                f"label {self.label!r} inconsistent with prob {self.prob_landslide!r} "
                f"at threshold {self.threshold!r}"
            )
        _require_aware(self.created_at, "created_at")
        _require_aware(self.ingested_at, "ingested_at")

    def to_dict(self) -> dict:
        return {
            "image_id": self.image_id,
            "post_id": self.post_id,
            "prob_landslide": self.prob_landslide,
            "label": self.label,
            "model_id": self.model_id,
            "threshold": self.threshold,
            "geo": self.geo.to_dict(),
            "created_at": self.created_at.isoformat(),
            "ingested_at": self.ingested_at.isoformat(),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "DetectionRecord":
        return cls(
            image_id=obj["image_id"],
            post_id=obj["post_id"],
            prob_landslide=float(obj["prob_landslide"]),
            label=obj["label"],
            model_id=obj["model_id"],
            threshold=float(obj["threshold"]),
            geo=GeoResult.from_dict(obj["geo"]),
            created_at=datetime.fromisoformat(obj["created_at"]),
            ingested_at=datetime.fromisoformat(obj["ingested_at"]),
        )


def _valid_bbox(bbox) -> bool:
    if len(bbox) != 4:
        return False
    min_lon, min_lat, max_lon, max_lat = bbox
    if not all(isinstance(v, (int, float)) and math.isfinite(v) for v in bbox):
        return False
    if not (-180.0 <= min_lon <= 180.0 and -180.0 <= max_lon <= 180.0):
        return False
    if not (-90.0 <= min_lat <= 90.0 and -90.0 <= max_lat <= 90.0):
        return False
    return min_lon <= max_lon and min_lat <= max_lat


@dataclass(frozen=True)
class QueryFilter:
    """Conjunctive record filter; time bounds are inclusive."""

    label: Optional[str] = None
    since: Optional[datetime] = None
    until: Optional[datetime] = None
    bbox: Optional[tuple[float, float, float, float]] = None  # (min_lon, min_lat, max_lon, max_lat)
    min_prob: Optional[float] = None

    def __post_init__(self):
        if self.label is not None and self.label not in (LABEL_LANDSLIDE, LABEL_NOT_LANDSLIDE):
            raise FilterError(f"unknown label {self.label!r}")
        for name in ("since", "until"):
            value = getattr(self, name)
            if value is not None:
                try:
                    _require_aware(value, name)
                except ValueError as exc:
                    raise FilterError(str(exc)) from None
        if self.since is not None and self.until is not None and self.since > self.until:
            raise FilterError("since must not be after until")
        if self.bbox is not None:
            if not _valid_bbox(self.bbox):
                raise FilterError(f"invalid bbox {self.bbox!r}")
            object.__setattr__(self, "bbox", tuple(float(v) for v in self.bbox))
        if self.min_prob is not None and not 0.0 <= self.min_prob <= 1.0:
            raise FilterError(f"min_prob must be in [0, 1], got {self.min_prob!r}")

    def matches(self, rec: DetectionRecord) -> bool:
        if self.label is not None and rec.label != self.label:
            return False
        if self.since is not None and rec.created_at < self.since:
            return False
        if self.until is not None and rec.created_at > self.until:
            return False
        if self.min_prob is not None and rec.prob_landslide < self.min_prob:
            return False
        if self.bbox is not None:
            if rec.geo.point is None:
                return False
            lat, lon = rec.geo.point
            min_lon, min_lat, max_lon, max_lat = self.bbox
            if not (min_lon <= lon <= max_lon and min_lat <= lat <= max_lat):
                return False
        return True


EMPTY_FILTER = QueryFilter()


class DetectionStore:
    """Append-only JSONL log with a rebuilt in-memory index."""

    def __init__(self, path, read_only: bool = False):
        self._path = Path(path)
        self._read_only = read_only
        self._lock = threading.Lock()
        self._index: dict[str, DetectionRecord] = {}
        self._fh = None
        try:
            if read_only and not self._path.exists():
                raise StoreError(f"store does not exist: {self._path}")
            self._load()
            if not read_only:
                self._path.parent.mkdir(parents=True, exist_ok=True)
                self._fh = open(self._path, "a", encoding="utf-8")
        except OSError as exc:
            raise StoreError(f"cannot open store at {self._path}: {exc}") from exc

    @property
    def path(self) -> Path:
        return self._path

    def _load(self):
        if not self._path.exists():
            return
        with open(self._path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
        for line_no, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                rec = DetectionRecord.from_dict(json.loads(line))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                if line_no == len(lines):
                    # Torn trailing write from a crash: recoverable, drop it.
                    break
                raise StoreError(f"corrupt store record at line {line_no}: {exc}") from exc
            self._index.setdefault(rec.image_id, rec)

    def persist(self, rec: DetectionRecord) -> str:
        with self._lock:
            if self._read_only:
                raise StoreError("store opened read-only")
            if rec.image_id in self._index:
                return DEDUPLICATED
            line = json.dumps(rec.to_dict(), sort_keys=True, separators=(",", ":"))
            try:
                self._fh.write(line + "\n")
                self._fh.flush()
                os.fsync(self._fh.fileno())
            except (OSError, ValueError) as exc:
                raise StoreError(f"append failed: {exc}") from exc
            self._index[rec.image_id] = rec
            return STORED

    def get(self, image_id: str) -> Optional[DetectionRecord]:
        with self._lock:
            return self._index.get(image_id)

    def __len__(self) -> int:
        with self._lock:
            return len(self._index)

    def query(self, flt: Optional[QueryFilter] = None) -> list[DetectionRecord]:
        flt = flt or EMPTY_FILTER
        with self._lock:
            snapshot = list(self._index.values())
        matched = [rec for rec in snapshot if flt.matches(rec)]
        matched.sort(key=lambda rec: (rec.created_at, rec.image_id))
        return matched

    def export_geojson(self, flt: Optional[QueryFilter] = None) -> dict:
        return geojson_collection(self.query(flt))

    def stats(self) -> dict:
        """Counts by label, geo source, and UTC day of the post timestamp."""
        records = self.query()
        by_label: dict[str, int] = {}
        by_source: dict[str, int] = {}
        by_day: dict[str, int] = {}
        for rec in records:
            by_label[rec.label] = by_label.get(rec.label, 0) + 1
            by_source[rec.geo.source] = by_source.get(rec.geo.source, 0) + 1
            day = rec.created_at.date().isoformat()
            by_day[day] = by_day.get(day, 0) + 1
        return {
            "total": len(records),
            "by_label": dict(sorted(by_label.items())),
            "by_source": dict(sorted(by_source.items())),
            "by_day": dict(sorted(by_day.items())),
        }

    def close(self):
        with self._lock:
            if self._fh is not None and not self._fh.closed:
                self._fh.close()

    def __enter__(self) -> "DetectionStore":
        return self

    def __exit__(self, *exc_info):
        self.close()


def geojson_collection(records: Iterable[DetectionRecord]) -> dict:
    """FeatureCollection of the geolocated records; the rest are counted in
    the foreign member ``excluded_count``. Coordinates are [lon, lat]."""
    features = []
    excluded = 0
    for rec in records:
        if rec.geo.point is None or rec.geo.source == SOURCE_NONE:
            excluded += 1
            continue
        lat, lon = rec.geo.point
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [lon, lat]},
                "properties": {
                    "image_id": rec.image_id,
                    "post_id": rec.post_id,
                    "prob_landslide": rec.prob_landslide,
                    "label": rec.label,
                    "model_id": rec.model_id,
                    "source": rec.geo.source,
                    "confidence": rec.geo.confidence,
                },
            }
        )
    return {"type": "FeatureCollection", "features": features, "excluded_count": excluded}
