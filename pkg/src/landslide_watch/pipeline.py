"""Pipeline orchestration: ingest -> fetch/dedup -> classify -> geolocate -> persist.

Each stage is a thread; stages communicate only through bounded queues of
immutable records, so a stalled stage applies backpressure upstream instead
of buffering without limit. A done sentinel cascades through the queues at
end of stream; an abort event short-circuits every blocking queue operation.
"""

from __future__ import annotations

import queue
import threading
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Optional

import tomli

from .classify import (
    KIND_EMBEDDED,
    KIND_REMOTE,
    LABEL_LANDSLIDE,
    BackendDescriptor,
    ClassificationError,
    RemoteHttpBackend,
    classify,
    make_backend,
)
from .geo import Gazetteer, geolocate, load_gazetteer
from .images import DedupWindow, FetchPolicy, fetch_images, shared_http_client
from .ingest import (
    FeedError,
    KeywordSet,
    connect_feed,
    default_keywords,
    load_keywords,
    matches_keywords,
)
from .store import STORED, DetectionRecord, DetectionStore, StoreError

_DONE = object()

# A remote backend that fails this many predictions in a row is considered
# permanently unavailable and aborts the run.
CONSECUTIVE_BACKEND_FAILURES = 5


class ConfigError(ValueError):
    """Raised for unreadable, unknown-key, or invalid configuration."""


@dataclass(frozen=True)
class PipelineConfig:
    feed_source: str
    store_path: str
    backend: BackendDescriptor = field(
        default_factory=lambda: BackendDescriptor(kind=KIND_EMBEDDED)
    )
    keywords_path: Optional[str] = None
    gazetteer_path: Optional[str] = None
    fetch: FetchPolicy = field(default_factory=FetchPolicy)
    fetch_workers: int = 8
    queue_capacity: int = 256
    dedup_capacity: int = 100_000
    dedup_threshold_bits: int = 4
    drain_deadline_s: float = 30.0

    def __post_init__(self):
        if not self.feed_source:
            raise ConfigError("feed source must be non-empty")
        if not self.store_path:
            raise ConfigError("store path must be non-empty")
        if self.queue_capacity < 1:
            raise ConfigError("queue capacity must be >= 1")
        if self.fetch_workers < 1:
            raise ConfigError("fetch workers must be >= 1")
        if self.dedup_capacity < 1:
            raise ConfigError("dedup capacity must be >= 1")
        if not 0 <= self.dedup_threshold_bits <= 64:
            raise ConfigError("dedup threshold_bits must be in [0, 64]")


_SCHEMA = {
    "feed": {"source"},
    "keywords": {"path"},
    "gazetteer": {"path"},
    "store": {"path"},
    "backend": {"kind", "endpoint", "threshold", "weights_path"},
    "fetch": {"attempts", "timeout_s", "max_bytes", "retry_backoff_s", "workers"},
    "queues": {"capacity"},
    "dedup": {"capacity", "threshold_bits"},
    "shutdown": {"drain_deadline_s"},
}


def _resolve(base: Path, value: str) -> str:
    """Resolve config-relative paths against the config file's directory."""
    if value.startswith(("file://", "tcp://", "http://", "https://")):
        if value.startswith("file://"):
            inner = value[len("file://"):]
            return "file://" + str((base / inner).resolve())
        return value
    return str((base / value).resolve())


def load_config(path) -> PipelineConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomli.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from exc

    unknown = [section for section in raw if section not in _SCHEMA]
    for section, keys in raw.items():
        if section in _SCHEMA:
            if not isinstance(keys, dict):
                raise ConfigError(f"[{section}] must be a table")
            unknown.extend(f"{section}.{key}" for key in keys if key not in _SCHEMA[section])
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")

    base = path.parent
    feed = raw.get("feed", {})
    if "source" not in feed:
        raise ConfigError("missing required key feed.source")
    store = raw.get("store", {})
    if "path" not in store:
        raise ConfigError("missing required key store.path")

    backend_raw = raw.get("backend", {})
    kind = backend_raw.get("kind", KIND_EMBEDDED)
    weights = backend_raw.get("weights_path")
    try:
        descriptor = BackendDescriptor(
            kind=kind,
            endpoint=backend_raw.get("endpoint"),
            threshold=float(backend_raw.get("threshold", 0.5)),
            weights_path=_resolve(base, weights) if weights else None,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    fetch_raw = raw.get("fetch", {})
    policy = FetchPolicy(
        attempts=int(fetch_raw.get("attempts", 3)),
        timeout_s=float(fetch_raw.get("timeout_s", 10.0)),
        max_bytes=int(fetch_raw.get("max_bytes", 8 * 1024 * 1024)),
        retry_backoff_s=float(fetch_raw.get("retry_backoff_s", 0.5)),
    )

    keywords = raw.get("keywords", {}).get("path")
    gazetteer = raw.get("gazetteer", {}).get("path")
    try:
        cfg = PipelineConfig(
            feed_source=_resolve(base, feed["source"]),
            store_path=_resolve(base, store["path"]),
            backend=descriptor,
            keywords_path=_resolve(base, keywords) if keywords else None,
            gazetteer_path=_resolve(base, gazetteer) if gazetteer else None,
            fetch=policy,
            fetch_workers=int(fetch_raw.get("workers", 8)),
            queue_capacity=int(raw.get("queues", {}).get("capacity", 256)),
            dedup_capacity=int(raw.get("dedup", {}).get("capacity", 100_000)),
            dedup_threshold_bits=int(raw.get("dedup", {}).get("threshold_bits", 4)),
            drain_deadline_s=float(raw.get("shutdown", {}).get("drain_deadline_s", 30.0)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    _check_paths(cfg)
    return cfg


def _check_paths(cfg: PipelineConfig):
    referenced = []
    if cfg.feed_source.startswith("file://"):
        referenced.append(("feed.source", cfg.feed_source[len("file://"):]))
    elif "://" not in cfg.feed_source:
        referenced.append(("feed.source", cfg.feed_source))
    if cfg.keywords_path:
        referenced.append(("keywords.path", cfg.keywords_path))
    if cfg.gazetteer_path:
        referenced.append(("gazetteer.path", cfg.gazetteer_path))
    if cfg.backend.weights_path:
        referenced.append(("backend.weights_path", cfg.backend.weights_path))
    for key, candidate in referenced:
        if not Path(candidate).exists():
            raise ConfigError(f"{key} does not exist: {candidate}")


CANONICAL_COUNTERS = (
    "ingested",
    "keyword_matched",
    "images_fetched",
    "duplicates_dropped",
    "classified",
    "landslide_count",
    "geolocated",
    "persisted",
)


class PipelineStats:
    """Thread-safe per-stage counters plus error tallies by category."""

    def __init__(self):
        self._lock = threading.Lock()
        self._counts = {name: 0 for name in CANONICAL_COUNTERS}
        self._counts["persist_deduplicated"] = 0
        self.errors: dict[str, int] = {}
        self.aborted = False
        self.abort_reason: Optional[str] = None

    def inc(self, name: str, by: int = 1):
        with self._lock:
            self._counts[name] += by

    def err(self, category: str, by: int = 1):
        if by == 0:
            return
        with self._lock:
            self.errors[category] = self.errors.get(category, 0) + by

    def mark_aborted(self, reason: str):
        with self._lock:
            if not self.aborted:
                self.aborted = True
                self.abort_reason = reason

    def __getattr__(self, name: str) -> int:
        counts = object.__getattribute__(self, "_counts")
        if name in counts:
            with object.__getattribute__(self, "_lock"):
                return counts[name]
        raise AttributeError(name)

    @property
    def error_total(self) -> int:
        with self._lock:
            return sum(self.errors.values())

    def as_tuple(self) -> tuple[int, ...]:
        with self._lock:
            return tuple(self._counts[name] for name in CANONICAL_COUNTERS)

    def to_dict(self) -> dict:
        with self._lock:
            return {
                **dict(self._counts),
                "errors": dict(self.errors),
                "aborted": self.aborted,
                "abort_reason": self.abort_reason,
            }

    def format(self) -> str:
        data = self.to_dict()
        lines = [f"{name:>22}  {data[name]}" for name in CANONICAL_COUNTERS]
        lines.append(f"{'persist_deduplicated':>22}  {data['persist_deduplicated']}")
        errors = data["errors"]
        err_text = ", ".join(f"{k}={v}" for k, v in sorted(errors.items())) or "none"
        lines.append(f"{'errors':>22}  {err_text}")
        if data["aborted"]:
            lines.append(f"{'aborted':>22}  {data['abort_reason']}")
        return "\n".join(lines)


class _Channel:
    """Bounded queue whose blocking operations poll an abort event."""

    def __init__(self, capacity: int, abort: threading.Event):
        self._q: queue.Queue = queue.Queue(capacity)
        self._abort = abort

    def put(self, item) -> bool:
        while not self._abort.is_set():
            try:
                self._q.put(item, timeout=0.1)
                return True
            except queue.Full:
                continue
        return False

    def get(self):
        while not self._abort.is_set():
            try:
                return self._q.get(timeout=0.1)
            except queue.Empty:
                continue
        return _DONE


def _ingest_stage(reader, keywords: KeywordSet, stats: PipelineStats, out: _Channel):
    try:
        for post in reader:
            stats.inc("ingested")
            if not matches_keywords(post, keywords):
                continue
            stats.inc("keyword_matched")
            if not out.put(post):
                return
    except FeedError:
        stats.err("feed")
        stats.mark_aborted("feed_unreachable")
    finally:
        stats.err("malformed_posts", reader.stats.malformed)
        stats.err("dropped_media_urls", reader.stats.dropped_media_urls)
        out.put(_DONE)


def _fetch_stage(
    inp: _Channel,
    out: _Channel,
    stats: PipelineStats,
    policy: FetchPolicy,
    window: DedupWindow,
    workers: int,
    abort: threading.Event,
):
    client = shared_http_client()

    def handle(post, result):
        for failure in result.failures:
            stats.err(failure.reason)
        for record in result.records:
            stats.inc("images_fetched")
            if window.seen(record.phash):
                stats.inc("duplicates_dropped")
                continue
            if not out.put((post, record)):
                return

    try:
        with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="fetch") as pool:
            # Futures are consumed in submission order so the dedup window sees
            # images in a deterministic sequence regardless of download timing.
            pending: deque = deque()
            while True:
                item = inp.get()
                if item is _DONE:
                    break
                post = item
                pending.append((post, pool.submit(fetch_images, post, policy, client)))
                while pending and (pending[0][1].done() or len(pending) >= 2 * workers):
                    done_post, future = pending.popleft()
                    handle(done_post, future.result())
                if abort.is_set():
                    break
            while pending:
                done_post, future = pending.popleft()
                if abort.is_set():
                    future.cancel()
                    continue
                handle(done_post, future.result())
    finally:
        out.put(_DONE)


def _classify_stage(
    inp: _Channel,
    out: _Channel,
    stats: PipelineStats,
    backend,
    abort: threading.Event,
):
    is_remote = isinstance(backend, RemoteHttpBackend)
    consecutive_failures = 0
    try:
        while True:
            item = inp.get()
            if item is _DONE:
                break
            post, image = item
            try:
                prediction = classify(image, backend)
            except ClassificationError:
                stats.err("classification")
                consecutive_failures += 1
                if is_remote and consecutive_failures >= CONSECUTIVE_BACKEND_FAILURES:
                    stats.mark_aborted("backend_unavailable")
                    abort.set()
                    return
                continue
            consecutive_failures = 0
            stats.inc("classified")
            if prediction.label == LABEL_LANDSLIDE:
                stats.inc("landslide_count")
            if not out.put((post, image, prediction)):
                return
    finally:
        out.put(_DONE)


def _geolocate_stage(
    inp: _Channel,
    out: _Channel,
    stats: PipelineStats,
    gazetteer: Gazetteer,
    threshold: float,
    clock: Callable[[], datetime],
):
    try:
        while True:
            item = inp.get()
            if item is _DONE:
                break
            post, image, prediction = item
            geo = geolocate(post, gazetteer)
            if geo.point is not None:
                stats.inc("geolocated")
            record = DetectionRecord(
                image_id=prediction.image_id,
                post_id=post.post_id,
                prob_landslide=prediction.prob_landslide,
                label=prediction.label,
                model_id=prediction.model_id,
                threshold=threshold,
                geo=geo,
                created_at=post.created_at,
                ingested_at=clock(),
            )
            if not out.put(record):
                return
    finally:
        out.put(_DONE)


def _persist_stage(
    inp: _Channel,
    stats: PipelineStats,
    store: DetectionStore,
    abort: threading.Event,
):
    while True:
        record = inp.get()
        if record is _DONE:
            return
        try:
            outcome = store.persist(record)
        except StoreError:
            stats.err("store")
            stats.mark_aborted("store_failure")
            abort.set()
            return
        if outcome == STORED:
            stats.inc("persisted")
        else:
            stats.inc("persist_deduplicated")


def _utc_now() -> datetime:
    return datetime.now(timezone.utc)


def run_pipeline(
    cfg: PipelineConfig,
    mode: str = "drain",
    stop_event: Optional[threading.Event] = None,
    clock: Optional[Callable[[], datetime]] = None,
) -> PipelineStats:
    """Run the full pipeline; returns final (or partial, on abort) stats.

    Drain mode replays a finite feed to completion. Live mode runs until the
    feed ends or ``stop_event`` is set, then flushes in-flight work within the
    configured drain deadline before aborting whatever remains.
    """
    if mode not in ("drain", "live"):
        raise ValueError(f"mode must be 'drain' or 'live', got {mode!r}")
    stop_event = stop_event or threading.Event()
    clock = clock or _utc_now
    stats = PipelineStats()
    abort = threading.Event()

    keywords = load_keywords(cfg.keywords_path) if cfg.keywords_path else default_keywords()
    gazetteer = load_gazetteer(cfg.gazetteer_path) if cfg.gazetteer_path else Gazetteer()
    backend = make_backend(cfg.backend)
    try:
        if cfg.backend.kind == KIND_REMOTE and backend.health() is None:
            stats.err("backend_unavailable")
            stats.mark_aborted("backend_unavailable")
            return stats

        window = DedupWindow(cfg.dedup_capacity, cfg.dedup_threshold_bits)
        reader = connect_feed(cfg.feed_source, stop_event=stop_event)
        with DetectionStore(cfg.store_path) as store:
            q_fetch = _Channel(cfg.queue_capacity, abort)
            q_classify = _Channel(cfg.queue_capacity, abort)
            q_geo = _Channel(cfg.queue_capacity, abort)
            q_persist = _Channel(cfg.queue_capacity, abort)

            threads = [
                threading.Thread(
                    target=_ingest_stage,
                    args=(reader, keywords, stats, q_fetch),
                    name="stage-ingest",
                ),
                threading.Thread(
                    target=_fetch_stage,
                    args=(q_fetch, q_classify, stats, cfg.fetch, window, cfg.fetch_workers, abort),
                    name="stage-fetch",
                ),
                threading.Thread(
                    target=_classify_stage,
                    args=(q_classify, q_geo, stats, backend, abort),
                    name="stage-classify",
                ),
                threading.Thread(
                    target=_geolocate_stage,
                    args=(q_geo, q_persist, stats, gazetteer, cfg.backend.threshold, clock),
                    name="stage-geolocate",
                ),
                threading.Thread(
                    target=_persist_stage,
                    args=(q_persist, stats, store, abort),
                    name="stage-persist",
                ),
            ]
            for thread in threads:
                thread.start()

            if mode == "drain":
                for thread in threads:
                    thread.join()
            else:
                threads[0].join()
                deadline = time.monotonic() + cfg.drain_deadline_s
                for thread in threads[1:]:
                    remaining = deadline - time.monotonic()
                    thread.join(timeout=max(0.0, remaining))
                    if thread.is_alive():
                        stats.mark_aborted("drain_deadline")
                        abort.set()
                for thread in threads[1:]:
                    thread.join()
    finally:
        close = getattr(backend, "close", None)
        if close is not None:
            close()
    return stats
