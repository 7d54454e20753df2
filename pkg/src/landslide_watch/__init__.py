"""Social-media landslide monitoring: ingest, classify, geolocate, persist,
plus an evaluation toolkit for the offline model-selection workflow."""

from .classify import (
    KIND_EMBEDDED,
    KIND_REMOTE,
    LABEL_LANDSLIDE,
    LABEL_NOT_LANDSLIDE,
    BackendDescriptor,
    ClassificationError,
    EmbeddedReferenceBackend,
    Prediction,
    ProtocolViolationError,
    RemoteHttpBackend,
    classify,
    label_for,
    make_backend,
)
from .geo import (
    NO_LOCATION,
    Gazetteer,
    GeoMetadata,
    GeoResult,
    geolocate,
    load_gazetteer,
)
from .images import (
    DedupWindow,
    FetchPolicy,
    FetchResult,
    ImageRecord,
    area_downsample,
    decode_grayscale,
    dhash64,
    fetch_images,
    hamming64,
    is_duplicate,
)
from .ingest import (
    FeedReader,
    KeywordSet,
    PostParseError,
    PostRecord,
    connect_feed,
    default_keywords,
    load_keywords,
    matches_keywords,
    parse_post,
)
from .pipeline import (
    ConfigError,
    PipelineConfig,
    PipelineStats,
    load_config,
    run_pipeline,
)
from .store import (
    DetectionRecord,
    DetectionStore,
    FilterError,
    QueryFilter,
    StoreError,
    geojson_collection,
)

__version__ = "0.1.0"

__all__ = [
    "KIND_EMBEDDED",
    "KIND_REMOTE",
    "LABEL_LANDSLIDE",
    "LABEL_NOT_LANDSLIDE",
    "BackendDescriptor",
    "ClassificationError",
    "EmbeddedReferenceBackend",
    "Prediction",
    "ProtocolViolationError",
    "RemoteHttpBackend",
    "classify",
    "label_for",
    "make_backend",
    "NO_LOCATION",
    "Gazetteer",
    "GeoMetadata",
    "GeoResult",
    "geolocate",
    "load_gazetteer",
    "DedupWindow",
    "FetchPolicy",
    "FetchResult",
    "ImageRecord",
    "area_downsample",
    "decode_grayscale",
    "dhash64",
    "fetch_images",
    "hamming64",
    "is_duplicate",
    "FeedReader",
    "KeywordSet",
    "PostParseError",
    "PostRecord",
    "connect_feed",
    "default_keywords",
    "load_keywords",
    "matches_keywords",
    "parse_post",
    "ConfigError",
    "PipelineConfig",
    "PipelineStats",
    "load_config",
    "run_pipeline",
    "DetectionRecord",
    "DetectionStore",
    "FilterError",
    "QueryFilter",
    "StoreError",
    "geojson_collection",
    "__version__",
]
