"""HTTP surface implementing the prediction wire protocol.

GET /v1/health   -> 200 {"status": "ok", "model_id": ...} when a model is
                    loaded, 503 otherwise.
POST /v1/predict -> 200 {"image_id", "prob_landslide", "model_id"};
                    400 for malformed requests, 422 for bodies whose image
                    bytes do not decode, 503 when no model is loaded.

Responses are deterministic for identical request bytes.
"""

from __future__ import annotations

import base64
import binascii
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .models import ServedModel, decode_image


def _bad_request(reason: str) -> JSONResponse:
    return JSONResponse(status_code=400, content={"error": reason})


def create_app(model: Optional[ServedModel]) -> FastAPI:
    app = FastAPI(title="landslide model server")

    @app.get("/v1/health")
    def health():
        if model is None:
            return JSONResponse(
                status_code=503, content={"status": "unavailable", "model_id": None}
            )
        return {"status": "ok", "model_id": model.model_id}

    @app.post("/v1/predict")
    async def predict(request: Request):
        try:
            body = await request.json()
        except Exception:
            return _bad_request("request body is not JSON")
        if not isinstance(body, dict):
            return _bad_request("request body must be a JSON object")
        image_id = body.get("image_id")
        if not isinstance(image_id, str) or not image_id:
            return _bad_request("image_id must be a non-empty string")
        encoded = body.get("image_b64")
        if not isinstance(encoded, str):
            return _bad_request("image_b64 must be a base64 string")
        content_type = body.get("content_type")
        if content_type is not None and not isinstance(content_type, str):
            return _bad_request("content_type must be a string")
        if model is None:
            return JSONResponse(status_code=503, content={"error": "no model loaded"})
        try:
            data = base64.b64decode(encoded, validate=True)
        except (binascii.Error, ValueError):
            return _bad_request("image_b64 is not valid base64")
        try:
            image = decode_image(data)
        except ValueError as exc:
            return JSONResponse(status_code=422, content={"error": str(exc)})
        return {
            "image_id": image_id,
            "prob_landslide": model.prob_landslide(image),
            "model_id": model.model_id,
        }

    return app
