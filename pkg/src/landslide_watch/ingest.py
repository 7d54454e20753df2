"""Post-stream ingestion: feed connectors, record parsing, keyword filtering.

A feed is a source of newline-delimited JSON objects, one post per line,
either replayed from a file (``file://path``) or read from a TCP endpoint
(``tcp://host:port``). Malformed lines are counted and skipped; they never
abort the stream.
"""

from __future__ import annotations

import json
import re
import socket
import threading
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Iterator, Optional
from urllib.parse import urlsplit

from .geo import GeoMetadata

# The English seed terms; additional languages are a configuration concern
# and load from a keyword file.
DEFAULT_TERMS = (
    "landslide",
    "landslip",
    "earth slip",
    "mudslide",
    "rockslide",
    "rock fall",
)
# Hashtags cannot contain spaces, so multi-word terms are compressed.
DEFAULT_HASHTAG_TERMS = (
    "landslide",
    "landslip",
    "earthslip",
    "mudslide",
    "rockslide",
    "rockfall",
)

_HASHTAG_RE = re.compile(r"#(\w+)", re.UNICODE)


class FeedError(Exception):
    """Raised when a feed source cannot be used at all (bad descriptor, give-up)."""


class PostParseError(ValueError):
    """A single feed line that cannot be turned into a valid PostRecord."""

    def __init__(self, reason: str, detail: str = ""):
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason


@dataclass(frozen=True)
class PostRecord:
    """One social post, immutable once constructed."""

    post_id: str
    created_at: datetime
    text: str
    media_urls: tuple[str, ...] = ()
    geo: Optional[GeoMetadata] = None
    lang: Optional[str] = None
    author_location: Optional[str] = None


@dataclass(frozen=True)
class KeywordSet:
    """Lowercased terms matched as substrings plus hashtag-only terms.

    Terms are case-folded and de-duplicated on construction, preserving
    first-occurrence order. At least one term or hashtag term is required.
    """

    terms: tuple[str, ...]
    hashtag_terms: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "terms", _fold_unique(self.terms))
        object.__setattr__(self, "hashtag_terms", _fold_unique(self.hashtag_terms))
        if not self.terms and not self.hashtag_terms:
            raise ValueError("keyword set must contain at least one term")


def _fold_unique(values) -> tuple[str, ...]:
    seen = {}
    for v in values:
        folded = v.casefold().strip()
        if folded and folded not in seen:
            seen[folded] = None
    return tuple(seen)


def default_keywords() -> KeywordSet:
    return KeywordSet(terms=DEFAULT_TERMS, hashtag_terms=DEFAULT_HASHTAG_TERMS)


def load_keywords(path) -> KeywordSet:
    """Read a keyword file: one term per line, ``#:`` prefix marks hashtag terms."""
    terms: list[str] = []
    hashtags: list[str] = []
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#:"):
            hashtags.append(line[2:].strip())
        else:
            terms.append(line)
    return KeywordSet(terms=tuple(terms), hashtag_terms=tuple(hashtags))


def matches_keywords(post: PostRecord, kw: KeywordSet) -> bool:
    """True iff the case-folded text contains any term as a substring, or any
    hashtag token equals a hashtag term after case-folding."""
    folded = post.text.casefold()
    if any(term in folded for term in kw.terms):
        return True
    if kw.hashtag_terms:
        for token in _HASHTAG_RE.findall(post.text):
            if token.casefold() in kw.hashtag_terms:
                return True
    return False


def _is_absolute_url(url: str) -> bool:
    try:
        parts = urlsplit(url)
    except ValueError:
        return False
    if parts.scheme in ("http", "https"):
        return bool(parts.netloc)
    if parts.scheme == "file":
        return bool(parts.path)
    return False


def _parse_rfc3339(value) -> datetime:
    if not isinstance(value, str):
        raise PostParseError("bad_created_at", repr(value))
    text = value.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    try:
        stamp = datetime.fromisoformat(text)
    except ValueError as exc:
        raise PostParseError("bad_created_at", str(exc)) from None
    if stamp.tzinfo is None:
        raise PostParseError("bad_created_at", "missing UTC offset")
    return stamp


def _parse_geo(obj) -> Optional[GeoMetadata]:
    if obj is None:
        return None
    if not isinstance(obj, dict):
        raise PostParseError("bad_geo", "geo must be an object")
    gps = None
    if obj.get("gps") is not None:
        g = obj["gps"]
        if not isinstance(g, dict):
            raise PostParseError("bad_geo", "gps must be an object")
        try:
            gps = (float(g["lat"]), float(g["lon"]))
        except (KeyError, TypeError, ValueError):
            raise PostParseError("bad_geo", "gps needs numeric lat/lon") from None
    bbox = None
    if obj.get("place_bbox") is not None:
        b = obj["place_bbox"]
        if not isinstance(b, dict):
            raise PostParseError("bad_geo", "place_bbox must be an object")
        try:
            bbox = (
                float(b["min_lon"]),
                float(b["min_lat"]),
                float(b["max_lon"]),
                float(b["max_lat"]),
            )
        except (KeyError, TypeError, ValueError):
            raise PostParseError("bad_geo", "place_bbox needs 4 numeric bounds") from None
    place_name = obj.get("place_name")
    if place_name is not None and not isinstance(place_name, str):
        raise PostParseError("bad_geo", "place_name must be a string")
    if gps is None and bbox is None and place_name is None:
        return None
    return GeoMetadata(gps=gps, place_bbox=bbox, place_name=place_name)


def parse_post(obj: dict) -> tuple[PostRecord, int]:
    """Validate one decoded feed object.

    Returns the record plus the number of media URL entries dropped for not
    being syntactically valid absolute URLs. Raises PostParseError when the
    object as a whole is unusable.
    """
    if not isinstance(obj, dict):
        raise PostParseError("not_an_object")
    post_id = obj.get("post_id")
    if not isinstance(post_id, str) or not post_id:
        raise PostParseError("bad_post_id")
    text = obj.get("text")
    if not isinstance(text, str):
        raise PostParseError("bad_text")
    created_at = _parse_rfc3339(obj.get("created_at"))
    raw_urls = obj.get("media_urls", [])
    if not isinstance(raw_urls, list) or not all(isinstance(u, str) for u in raw_urls):
        raise PostParseError("bad_media_urls")
    urls = tuple(u for u in raw_urls if _is_absolute_url(u))
    dropped = len(raw_urls) - len(urls)
    lang = obj.get("lang")
    if lang is not None and not isinstance(lang, str):
        raise PostParseError("bad_lang")
    author_location = obj.get("author_location")
    if author_location is not None and not isinstance(author_location, str):
        raise PostParseError("bad_author_location")
    record = PostRecord(
        post_id=post_id,
        created_at=created_at,
        text=text,
        media_urls=urls,
        geo=_parse_geo(obj.get("geo")),
        lang=lang,
        author_location=author_location,
    )
    return record, dropped


@dataclass
class FeedStats:
    lines: int = 0
    emitted: int = 0
    malformed: int = 0
    dropped_media_urls: int = 0
    malformed_reasons: dict = field(default_factory=dict)

    def count_malformed(self, reason: str):
        self.malformed += 1
        self.malformed_reasons[reason] = self.malformed_reasons.get(reason, 0) + 1


@dataclass
class Backoff:
    """Capped exponential backoff schedule for feed reconnect attempts."""

    initial_s: float = 1.0
    factor: float = 2.0
    cap_s: float = 60.0

    def delays(self) -> Iterator[float]:
        delay = self.initial_s
        while True:
            yield delay
            delay = min(delay * self.factor, self.cap_s)


class FeedReader:
    """Iterator over PostRecords from a feed descriptor.

    Tracks per-line stats and enforces post_id uniqueness within the session
    (repeats are counted as malformed with reason ``duplicate_post_id``).
    ``health`` is ``"ok"`` while connected, ``"degraded"`` while retrying an
    unreachable endpoint, and ``"ended"`` once the stream is exhausted.
    """

    def __init__(
        self,
        source: str,
        backoff: Backoff | None = None,
        max_retries: int | None = None,
        stop_event: threading.Event | None = None,
    ):
        self.source = source
        self.backoff = backoff or Backoff()
        self.max_retries = max_retries
        self.stop_event = stop_event or threading.Event()
        self.stats = FeedStats()
        self.health = "ok"
        self._seen_ids: set[str] = set()

    def __iter__(self) -> Iterator[PostRecord]:
        for line in self._lines():
            if self.stop_event.is_set():
                break
            self.stats.lines += 1
            record = self._parse_line(line)
            if record is not None:
                self.stats.emitted += 1
                yield record
        self.health = "ended"

    def _parse_line(self, line: str) -> Optional[PostRecord]:
        stripped = line.strip()
        if not stripped:
            self.stats.count_malformed("empty_line")
            return None
        try:
            obj = json.loads(stripped)
        except json.JSONDecodeError:
            self.stats.count_malformed("bad_json")
            return None
        try:
            record, dropped = parse_post(obj)
        except PostParseError as exc:
            self.stats.count_malformed(exc.reason)
            return None
        self.stats.dropped_media_urls += dropped
        if record.post_id in self._seen_ids:
            self.stats.count_malformed("duplicate_post_id")
            return None
        self._seen_ids.add(record.post_id)
        return record

    def _lines(self) -> Iterator[str]:
        scheme, rest = _split_descriptor(self.source)
        if scheme == "file":
            try:
                fh = open(rest, "r", encoding="utf-8")
            except OSError as exc:
                raise FeedError(f"cannot open feed file {rest}: {exc}") from exc
            with fh:
                yield from fh
        elif scheme == "tcp":
            yield from self._tcp_lines(rest)
        else:
            raise FeedError(f"unsupported feed scheme: {self.source!r}")

    def _tcp_lines(self, endpoint: str) -> Iterator[str]:
        host, _, port_text = endpoint.partition(":")
        try:
            port = int(port_text)
        except ValueError:
            raise FeedError(f"bad tcp endpoint: {endpoint!r}") from None
        sock = self._connect(host, port)
        if sock is None:
            return
        buffer = b""
        with sock:
            sock.settimeout(0.2)
            while not self.stop_event.is_set():
                try:
                    chunk = sock.recv(65536)
                except socket.timeout:
                    continue
                except OSError:
                    break
                if not chunk:
                    break
                buffer += chunk
                while b"\n" in buffer:
                    line, buffer = buffer.split(b"\n", 1)
                    yield line.decode("utf-8", errors="replace")
        if buffer.strip():
            yield buffer.decode("utf-8", errors="replace")

    def _connect(self, host: str, port: int) -> Optional[socket.socket]:
        retries = 0
        for delay in self.backoff.delays():
            if self.stop_event.is_set():
                return None
            try:
                sock = socket.create_connection((host, port), timeout=5.0)
                self.health = "ok"
                return sock
            except OSError:
                self.health = "degraded"
                retries += 1
                if self.max_retries is not None and retries > self.max_retries:
                    raise FeedError(f"feed unreachable after {retries} attempts: {self.source}")
                if self.stop_event.wait(delay):
                    return None
        return None


def _split_descriptor(source: str) -> tuple[str, str]:
    if source.startswith("file://"):
        return "file", source[len("file://"):]
    if source.startswith("tcp://"):
        return "tcp", source[len("tcp://"):]
    # A bare path is treated as a replay file.
    if "://" not in source:
        return "file", source
    return source.split("://", 1)[0], source.split("://", 1)[1]


def connect_feed(
    source: str,
    backoff: Backoff | None = None,
    max_retries: int | None = None,
    stop_event: threading.Event | None = None,
) -> FeedReader:
    """Open a feed descriptor (``file://path``, bare path, or ``tcp://host:port``)."""
    return FeedReader(source, backoff=backoff, max_retries=max_retries, stop_event=stop_event)
