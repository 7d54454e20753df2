"""Point-location inference from post metadata.

The cascade is strict: device GPS beats a tagged place bounding box, which
beats a gazetteer lookup of the author's free-text profile location. Missing
or unusable data degrades to a no-point result; coordinates are never
fabricated.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

SOURCE_GPS = "gps"
SOURCE_PLACE = "place"
SOURCE_GAZETTEER = "profile_gazetteer"
SOURCE_NONE = "none"

_CONFIDENCE = {
    SOURCE_GPS: "high",
    SOURCE_PLACE: "medium",
    SOURCE_GAZETTEER: "low",
    SOURCE_NONE: "none",
}


@dataclass(frozen=True)
class GeoMetadata:
    """Raw location hints attached to a post."""

    gps: Optional[tuple[float, float]] = None  # (lat, lon)
    place_bbox: Optional[tuple[float, float, float, float]] = None  # (min_lon, min_lat, max_lon, max_lat)
    place_name: Optional[str] = None


@dataclass(frozen=True)
class GeoResult:
    point: Optional[tuple[float, float]]  # (lat, lon)
    source: str
    confidence: str

    def __post_init__(self):
        if self.source not in _CONFIDENCE:
            raise ValueError(f"unknown geo source {self.source!r}")
        if (self.source == SOURCE_NONE) != (self.point is None):
            raise ValueError("point must be present exactly when source is not 'none'")
        if self.confidence != _CONFIDENCE[self.source]:
            raise ValueError(f"source {self.source!r} implies confidence {_CONFIDENCE[self.source]!r}")

    def to_dict(self) -> dict:
        return {
            "point": None if self.point is None else {"lat": self.point[0], "lon": self.point[1]},
            "source": self.source,
            "confidence": self.confidence,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "GeoResult":
        point = obj.get("point")
        return cls(
            point=None if point is None else (float(point["lat"]), float(point["lon"])),
            source=obj["source"],
            confidence=obj["confidence"],
        )


def _result(source: str, point: Optional[tuple[float, float]] = None) -> GeoResult:
    return GeoResult(point=point, source=source, confidence=_CONFIDENCE[source])


NO_LOCATION = _result(SOURCE_NONE)


def _valid_latlon(lat: float, lon: float) -> bool:
    return -90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0


class Gazetteer:
    """Case-folded exact-match place-name table loaded from TSV."""

    def __init__(self, entries: dict[str, tuple[float, float]] | None = None):
        self._entries = dict(entries or {})
        self.skipped_rows = 0

    def __len__(self) -> int:
        return len(self._entries)

    def lookup(self, name: str) -> Optional[tuple[float, float]]:
        return self._entries.get(name.casefold().strip())


def load_gazetteer(path) -> Gazetteer:
    """Load ``name<TAB>lat<TAB>lon`` rows; malformed rows are skipped and counted."""
    gaz = Gazetteer()
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        if not raw.strip():
            continue
        parts = raw.split("\t")
        if len(parts) != 3:
            gaz.skipped_rows += 1
            continue
        name, lat_text, lon_text = parts
        try:
            lat, lon = float(lat_text), float(lon_text)
        except ValueError:
            gaz.skipped_rows += 1
            continue
        if not name.strip() or not _valid_latlon(lat, lon):
            gaz.skipped_rows += 1
            continue
        gaz._entries[name.casefold().strip()] = (lat, lon)
    return gaz


def geolocate(post, gazetteer: Gazetteer) -> GeoResult:
    """Resolve a post to a point using the gps > place > profile cascade.

    Total function: out-of-range GPS or an invalid bounding box (min > max on
    either axis, which includes boxes crossing the antimeridian) yields the
    no-point result for that post rather than falling through to weaker
    evidence or fabricating coordinates.
    """
    meta = post.geo
    if meta is not None and meta.gps is not None:
        lat, lon = meta.gps
        if _valid_latlon(lat, lon):
            return _result(SOURCE_GPS, (lat, lon))
        return NO_LOCATION
    if meta is not None and meta.place_bbox is not None:
        min_lon, min_lat, max_lon, max_lat = meta.place_bbox
        usable = (
            min_lon <= max_lon
            and min_lat <= max_lat
            and _valid_latlon(min_lat, min_lon)
            and _valid_latlon(max_lat, max_lon)
        )
        if not usable:
            return NO_LOCATION
        return _result(SOURCE_PLACE, ((min_lat + max_lat) / 2.0, (min_lon + max_lon) / 2.0))
    if post.author_location:
        point = gazetteer.lookup(post.author_location)
        if point is not None:
            return _result(SOURCE_GAZETTEER, point)
    return NO_LOCATION
