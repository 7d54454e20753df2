"""Image acquisition: download, decode, perceptual hashing, duplicate window.

The perceptual hash is a 64-bit difference hash: the grayscale image is
reduced to 9x8 by exact area averaging and each bit records whether a pixel
is brighter than its right neighbour, row-major, most significant bit first.
"""

from __future__ import annotations

import io
import math
import threading
import time
from collections import OrderedDict
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional
from urllib.parse import unquote, urlsplit

import httpx
import numpy as np
from PIL import Image

_FORMAT_MIME = {"PNG": "image/png", "JPEG": "image/jpeg", "WEBP": "image/webp"}

REASON_FETCH_FAILED = "fetch_failed"
REASON_DECODE_FAILED = "decode_failed"
REASON_TOO_LARGE = "too_large"


class ImageDecodeError(ValueError):
    pass


@dataclass(frozen=True)
class FetchPolicy:
    attempts: int = 3
    timeout_s: float = 10.0
    max_bytes: int = 8 * 1024 * 1024
    retry_backoff_s: float = 0.5

    def __post_init__(self):
        if self.attempts < 1:
            raise ValueError("attempts must be >= 1")
        if self.max_bytes < 1:
            raise ValueError("max_bytes must be >= 1")


@dataclass(frozen=True)
class ImageRecord:
    image_id: str
    source_post: str
    data: bytes
    content_type: str
    phash: int
    fetched_at: datetime


@dataclass(frozen=True)
class FetchFailure:
    url: str
    reason: str


@dataclass
class FetchResult:
    records: list[ImageRecord] = field(default_factory=list)
    failures: list[FetchFailure] = field(default_factory=list)


class _Skip(Exception):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


def _cover_weights(n_in: int, n_out: int) -> np.ndarray:
    """Row-stochastic matrix averaging n_in cells into n_out equal-width bins."""
    weights = np.zeros((n_out, n_in), dtype=np.float64)
    step = n_in / n_out
    for j in range(n_out):
        lo = j * step
        hi = (j + 1) * step
        for i in range(int(math.floor(lo)), min(int(math.ceil(hi)), n_in)):
            weights[j, i] = min(hi, i + 1.0) - max(lo, float(i))
    return weights / weights.sum(axis=1, keepdims=True)


def area_downsample(gray: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Exact area-average resize of a 2-D grayscale array to out_h x out_w."""
    gray = np.asarray(gray, dtype=np.float64)
    if gray.ndim != 2 or gray.shape[0] < 1 or gray.shape[1] < 1:
        raise ImageDecodeError(f"expected a non-empty 2-D array, got shape {gray.shape}")
    rows = _cover_weights(gray.shape[0], out_h)
    cols = _cover_weights(gray.shape[1], out_w)
    return rows @ gray @ cols.T


def dhash64(gray: np.ndarray) -> int:
    """64-bit difference hash of a decoded grayscale image (bit=1 where left > right)."""
    grid = area_downsample(gray, 8, 9)
    value = 0
    for r in range(8):
        for c in range(8):
            value = (value << 1) | int(grid[r, c] > grid[r, c + 1])
    return value


def hamming64(hash_a: int, hash_b: int) -> int:
    return ((hash_a ^ hash_b) & 0xFFFFFFFFFFFFFFFF).bit_count()


def is_duplicate(hash_a: int, hash_b: int, threshold: int) -> bool:
    """True iff the hashes differ in at most ``threshold`` bits."""
    if not 0 <= threshold <= 64:
        raise ValueError("threshold must be in [0, 64]")
    return hamming64(hash_a, hash_b) <= threshold


def decode_grayscale(data: bytes) -> tuple[np.ndarray, str]:
    """Decode image bytes to a float grayscale array plus its MIME type.

    Only JPEG, PNG, and WebP payloads are accepted.
    """
    try:
        with Image.open(io.BytesIO(data)) as image:
            mime = _FORMAT_MIME.get(image.format or "")
            gray = np.asarray(image.convert("L"), dtype=np.float64)
    except Exception as exc:
        raise ImageDecodeError(str(exc)) from exc
    if mime is None:
        raise ImageDecodeError("unsupported image format")
    if gray.ndim != 2 or gray.size == 0:
        raise ImageDecodeError("empty image")
    return gray, mime


class DedupWindow:
    """Bounded LRU of recently seen perceptual hashes.

    ``seen`` reports whether a hash is within ``threshold_bits`` of any hash
    in the window and records first occurrences; near-duplicates refresh the
    recency of the hash they matched. Access is serialized; duplicates that
    fall outside the window are tolerated by design.
    """

    def __init__(self, capacity: int = 100_000, threshold_bits: int = 4):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        if not 0 <= threshold_bits <= 64:
            raise ValueError("threshold_bits must be in [0, 64]")
        self.capacity = capacity
        self.threshold_bits = threshold_bits
        self._hashes: OrderedDict[int, None] = OrderedDict()
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._hashes)

    def seen(self, phash: int) -> bool:
        with self._lock:
            if phash in self._hashes:
                self._hashes.move_to_end(phash)
                return True
            if self.threshold_bits > 0:
                for known in self._hashes:
                    if hamming64(phash, known) <= self.threshold_bits:
                        self._hashes.move_to_end(known)
                        return True
            self._hashes[phash] = None
            while len(self._hashes) > self.capacity:
                self._hashes.popitem(last=False)
            return False


_shared_client: httpx.Client | None = None
_shared_client_lock = threading.Lock()


def shared_http_client() -> httpx.Client:
    global _shared_client
    with _shared_client_lock:
        if _shared_client is None:
            _shared_client = httpx.Client(follow_redirects=True)
        return _shared_client


def _download(url: str, policy: FetchPolicy, client: httpx.Client) -> bytes:
    parts = urlsplit(url)
    if parts.scheme == "file":
        path = Path(unquote(parts.path))
        try:
            if path.stat().st_size > policy.max_bytes:
                raise _Skip(REASON_TOO_LARGE)
            return path.read_bytes()
        except OSError:
            raise _Skip(REASON_FETCH_FAILED) from None
    for attempt in range(policy.attempts):
        if attempt and policy.retry_backoff_s > 0:
            time.sleep(policy.retry_backoff_s)
        try:
            with client.stream("GET", url, timeout=policy.timeout_s) as response:
                if response.status_code != 200:
                    continue
                buffer = bytearray()
                for chunk in response.iter_bytes():
                    buffer.extend(chunk)
                    if len(buffer) > policy.max_bytes:
                        raise _Skip(REASON_TOO_LARGE)
                return bytes(buffer)
        except httpx.HTTPError:
            continue
    raise _Skip(REASON_FETCH_FAILED)


def fetch_images(
    post,
    policy: FetchPolicy | None = None,
    client: httpx.Client | None = None,
) -> FetchResult:
    """Download and decode every media URL of a post, order preserved.

    Each failure is recorded with one of the reasons ``fetch_failed``,
    ``decode_failed``, or ``too_large`` instead of aborting the post.
    """
    policy = policy or FetchPolicy()
    client = client or shared_http_client()
    result = FetchResult()
    for index, url in enumerate(post.media_urls):
        try:
            data = _download(url, policy, client)
            gray, mime = _decode_or_skip(data)
        except _Skip as skip:
            result.failures.append(FetchFailure(url=url, reason=skip.reason))
            continue
        result.records.append(
            ImageRecord(
                image_id=f"{post.post_id}#{index}",
                source_post=post.post_id,
                data=data,
                content_type=mime,
                phash=dhash64(gray),
                fetched_at=datetime.now(timezone.utc),
            )
        )
    return result


def _decode_or_skip(data: bytes) -> tuple[np.ndarray, str]:
    try:
        return decode_grayscale(data)
    except ImageDecodeError:
        raise _Skip(REASON_DECODE_FAILED) from None
