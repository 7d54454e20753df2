"""Read-only HTTP API over a DetectionStore.

Endpoints:
  GET /v1/detections          query records as a JSON array
  GET /v1/detections.geojson  query records as a GeoJSON FeatureCollection
  GET /v1/stats               store counts plus live pipeline counters

Query parameters (all optional, conjunctive): ``label``, ``since``, ``until``
(RFC 3339 timestamps), ``bbox=minLon,minLat,maxLon,maxLat``, ``min_prob``.
Malformed parameters yield 400 with a reason.
"""

from __future__ import annotations

from datetime import datetime
from typing import Callable, Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .store import DetectionStore, FilterError, QueryFilter

_KNOWN_PARAMS = {"label", "since", "until", "bbox", "min_prob"}


class _BadRequest(Exception):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


def _parse_timestamp(raw: str, name: str) -> datetime:
    try:
        value = datetime.fromisoformat(raw.replace("Z", "+00:00"))
    except ValueError:
        raise _BadRequest(f"{name} is not an RFC 3339 timestamp: {raw!r}") from None
    if value.tzinfo is None:
        raise _BadRequest(f"{name} must carry a timezone offset: {raw!r}")
    return value


def _parse_filter(params) -> QueryFilter:
    unknown = sorted(set(params) - _KNOWN_PARAMS)
    if unknown:
        raise _BadRequest(f"unknown query parameter(s): {', '.join(unknown)}")
    label = params.get("label")
    since = params.get("since")
    until = params.get("until")
    bbox_raw = params.get("bbox")
    min_prob_raw = params.get("min_prob")

    bbox = None
    if bbox_raw is not None:
        parts = bbox_raw.split(",")
        if len(parts) != 4:
            raise _BadRequest("bbox must be minLon,minLat,maxLon,maxLat")
        try:
            bbox = tuple(float(part) for part in parts)
        except ValueError:
            raise _BadRequest(f"bbox has a non-numeric component: {bbox_raw!r}") from None
    min_prob = None
    if min_prob_raw is not None:
        try:
            min_prob = float(min_prob_raw)
        except ValueError:
            raise _BadRequest(f"min_prob is not a number: {min_prob_raw!r}") from None
    try:
        return QueryFilter(
            label=label,
            since=_parse_timestamp(since, "since") if since is not None else None,
            until=_parse_timestamp(until, "until") if until is not None else None,
            bbox=bbox,
            min_prob=min_prob,
        )
    except FilterError as exc:
        raise _BadRequest(str(exc)) from None


def create_app(
    store: DetectionStore,
    pipeline_stats_provider: Optional[Callable[[], dict]] = None,
) -> FastAPI:
    app = FastAPI(title="landslide-watch", docs_url=None, redoc_url=None)

    @app.exception_handler(_BadRequest)
    async def bad_request_handler(request: Request, exc: _BadRequest):
        return JSONResponse(status_code=400, content={"error": exc.reason})

    @app.get("/v1/detections")
    def detections(request: Request):
        flt = _parse_filter(request.query_params)
        return [rec.to_dict() for rec in store.query(flt)]

    @app.get("/v1/detections.geojson")
    def detections_geojson(request: Request):
        flt = _parse_filter(request.query_params)
        return JSONResponse(
            content=store.export_geojson(flt),
            media_type="application/geo+json",
        )

    @app.get("/v1/stats")
    def stats(request: Request):
        unknown = sorted(set(request.query_params))
        if unknown:
            raise _BadRequest(f"unknown query parameter(s): {', '.join(unknown)}")
        payload = {"store": store.stats()}
        if pipeline_stats_provider is not None:
            payload["pipeline"] = pipeline_stats_provider()
        return payload

    return app
