"""Deterministic end-to-end fixture: a replayable 10-post feed with images.

``build_demo`` writes a self-contained directory (feed, images, gazetteer,
config) whose drain-mode outcome is known exactly. Six posts match the
default keywords; they reference eight fetchable images of which two are
byte-identical repeats, leaving six classified records, three of them
landslides, five geolocatable. The module-level EXPECTED_* constants are the
hand-traced ground truth used by tests, scripts, and contract suites.
"""

from __future__ import annotations

import io
import json
from pathlib import Path

import numpy as np
from PIL import Image

from .classify import KIND_EMBEDDED, KIND_REMOTE

# (ingested, keyword_matched, images_fetched, duplicates_dropped,
#  classified, landslide_count, geolocated, persisted)
EXPECTED_STATS = (10, 6, 8, 2, 6, 3, 5, 6)
EXPECTED_FEATURE_COUNT = 5
EXPECTED_EXCLUDED_COUNT = 1
EXPECTED_LANDSLIDE_IDS = ("p01#0", "p03#0", "p07#0")
EXPECTED_PERSISTED_IDS = ("p01#0", "p03#0", "p03#1", "p05#0", "p07#0", "p08#0")
# image_id -> GeoJSON (lon, lat)
EXPECTED_COORDINATES = {
    "p01#0": (85.32, 27.7),
    "p03#0": (85.5, 27.5),
    "p03#1": (85.5, 27.5),
    "p05#0": (85.324, 27.7172),
    "p08#0": (83.9856, 28.2096),
}

# Bright images average 211.25 gray (landslide under both the embedded
# reference weights and a mean-gray stub); dark images average 46.25 (not).
# The stripe offsets keep every distinct pair at least 8 dHash bits apart.
SIZE = 64
STRIPE_WIDTH = 8
STRIPE_OFFSETS = {"a": 8, "b": 24, "c": 40}
BRIGHT = (220, 150)  # (background, stripe)
DARK = (40, 90)


def stripe_image(palette: tuple[int, int], variant: str) -> np.ndarray:
    background, stripe = palette
    pixels = np.full((SIZE, SIZE), background, dtype=np.uint8)
    x0 = STRIPE_OFFSETS[variant]
    pixels[:, x0 : x0 + STRIPE_WIDTH] = stripe
    return pixels


def png_bytes(pixels: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(pixels, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def _post(post_id, minute, text, urls, geo=None, author_location=None):
    return {
        "post_id": post_id,
        "created_at": f"2021-07-01T12:{minute:02d}:00Z",
        "text": text,
        "media_urls": urls,
        "geo": geo,
        "lang": "en",
        "author_location": author_location,
    }


def build_demo(target_dir, backend_kind: str = KIND_EMBEDDED, endpoint: str | None = None) -> Path:
    """Write the fixture into ``target_dir`` and return the config path."""
    target = Path(target_dir)
    images = target / "images"
    images.mkdir(parents=True, exist_ok=True)

    variants = {
        "bright_a": png_bytes(stripe_image(BRIGHT, "a")),
        "bright_b": png_bytes(stripe_image(BRIGHT, "b")),
        "bright_c": png_bytes(stripe_image(BRIGHT, "c")),
        "dark_a": png_bytes(stripe_image(DARK, "a")),
        "dark_b": png_bytes(stripe_image(DARK, "b")),
        "dark_c": png_bytes(stripe_image(DARK, "c")),
    }
    # Repeats are byte-identical files under different URLs.
    variants["bright_a_copy"] = variants["bright_a"]
    variants["dark_a_copy"] = variants["dark_a"]
    for name, data in variants.items():
        (images / f"{name}.png").write_bytes(data)

    def url(name: str) -> str:
        return "file://" + str((images / f"{name}.png").resolve())

    posts = [
        _post(
            "p01", 0, "Huge mudslide blocks the highway", [url("bright_a")],
            geo={"gps": {"lat": 27.70, "lon": 85.32}},
        ),
        _post("p02", 1, "Lovely beach day #sunset", [url("dark_a")]),
        _post(
            "p03", 2, "scary scenes #LandSlip today", [url("bright_b"), url("dark_a")],
            geo={
                "place_bbox": {"min_lon": 85.0, "min_lat": 27.0, "max_lon": 86.0, "max_lat": 28.0},
                "place_name": "Bagmati",
            },
        ),
        _post("p04", 3, "Rock fall on the coast road", [url("bright_a_copy")]),
        _post(
            "p05", 4, "earth slip near the village", [url("dark_b")],
            author_location="Kathmandu",
        ),
        _post("p06", 5, "nothing to see here", []),
        _post(
            "p07", 6, "Landslide reported after heavy rain",
            [url("bright_c"), url("dark_a_copy")],
        ),
        _post(
            "p08", 7, "massive rockslide video", [url("dark_c")],
            author_location="Pokhara",
        ),
        _post("p09", 8, "sunset over the lake #evening", []),
        _post("p10", 9, "commute was slow today", []),
    ]
    feed_path = target / "feed.jsonl"
    with open(feed_path, "w", encoding="utf-8") as fh:
        for post in posts:
            fh.write(json.dumps(post, sort_keys=True) + "\n")

    gazetteer_path = target / "gazetteer.tsv"
    gazetteer_path.write_text(
        "Kathmandu\t27.7172\t85.324\nPokhara\t28.2096\t83.9856\n", encoding="utf-8"
    )

    if backend_kind == KIND_EMBEDDED:
        backend_table = '[backend]\nkind = "embedded_reference"\nthreshold = 0.5\n'
    elif backend_kind == KIND_REMOTE:
        if not endpoint:
            raise ValueError("remote backend demo requires an endpoint")
        backend_table = (
            f'[backend]\nkind = "remote_http"\nendpoint = "{endpoint}"\nthreshold = 0.5\n'
        )
    else:
        raise ValueError(f"unknown backend kind {backend_kind!r}")

    config_path = target / "config.toml"
    config_path.write_text(
        "[feed]\n"
        'source = "feed.jsonl"\n'
        "\n"
        "[gazetteer]\n"
        'path = "gazetteer.tsv"\n'
        "\n"
        "[store]\n"
        'path = "detections.jsonl"\n'
        "\n" + backend_table,
        encoding="utf-8",
    )
    return config_path
