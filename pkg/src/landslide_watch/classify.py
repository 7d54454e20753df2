"""Landslide / not-landslide tagging via pluggable inference backends.

Two backends speak the same ``predict(image) -> (probability, model_id)``
interface: a deterministic embedded logistic model over an 8x8 grayscale
thumbnail (for desk-scale runs and tests), and a client for the remote HTTP
inference protocol. The decision threshold turns the probability into a
label; ties at exactly the threshold classify as landslide.
"""

from __future__ import annotations

import base64
import json
import math
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional, Protocol

import httpx
import numpy as np

from .images import ImageRecord, ImageDecodeError, area_downsample, decode_grayscale

LABEL_LANDSLIDE = "landslide"
LABEL_NOT_LANDSLIDE = "not_landslide"

KIND_REMOTE = "remote_http"
KIND_EMBEDDED = "embedded_reference"

DEFAULT_WEIGHTS_RESOURCE = "embedded_weights.json"


class ClassificationError(Exception):
    """Backend failure for one image; carries the image id for logging."""

    def __init__(self, image_id: str, message: str):
        super().__init__(f"{image_id}: {message}")
        self.image_id = image_id


class ProtocolViolationError(ClassificationError):
    """The backend answered, but outside the wire contract (e.g. prob not in [0,1])."""


class WeightsError(Exception):
    """Embedded backend weights file missing or corrupt."""


@dataclass(frozen=True)
class Prediction:
    image_id: str
    prob_landslide: float
    label: str
    model_id: str
    latency_ms: float


@dataclass(frozen=True)
class BackendDescriptor:
    kind: str
    endpoint: Optional[str] = None
    threshold: float = 0.5
    weights_path: Optional[str] = None

    def __post_init__(self):
        if self.kind not in (KIND_REMOTE, KIND_EMBEDDED):
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.kind == KIND_REMOTE and not self.endpoint:
            raise ValueError("remote_http backend requires an endpoint")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must be in [0, 1]")


class Backend(Protocol):
    threshold: float

    def predict(self, image: ImageRecord) -> tuple[float, str]: ...


def _logistic(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


class EmbeddedReferenceBackend:
    """Logistic score over a fixed 64-dim feature: the 8x8 area-averaged
    grayscale thumbnail scaled to [0, 1], row-major."""

    def __init__(self, weights_path: Optional[str] = None, threshold: float = 0.5):
        self.threshold = threshold
        try:
            if weights_path is None:
                payload = (
                    resources.files("landslide_watch.data")
                    .joinpath(DEFAULT_WEIGHTS_RESOURCE)
                    .read_text(encoding="utf-8")
                )
            else:
                payload = Path(weights_path).read_text(encoding="utf-8")
            spec = json.loads(payload)
            self.weights = np.asarray(spec["w"], dtype=np.float64)
            self.bias = float(spec["b"])
            self.model_id = str(spec["model_id"])
        except (OSError, KeyError, ValueError, TypeError) as exc:
            raise WeightsError(f"cannot load embedded weights: {exc}") from exc
        if self.weights.shape != (64,):
            raise WeightsError(f"expected 64 weights, got {self.weights.shape}")

    def score(self, gray: np.ndarray) -> float:
        features = area_downsample(gray, 8, 8).reshape(64) / 255.0
        return _logistic(float(self.weights @ features) + self.bias)

    def predict(self, image: ImageRecord) -> tuple[float, str]:
        try:
            gray, _ = decode_grayscale(image.data)
        except ImageDecodeError as exc:
            raise ClassificationError(image.image_id, f"undecodable image: {exc}") from exc
        return self.score(gray), self.model_id


def embedded_reference_score(gray: np.ndarray, weights_path: Optional[str] = None) -> float:
    """Score decoded grayscale pixels with the embedded reference model."""
    return EmbeddedReferenceBackend(weights_path=weights_path).score(gray)


class RemoteHttpBackend:
    """Client for the inference wire protocol.

    POST ``{endpoint}/v1/predict`` with a base64 payload; a valid response is
    200 with a probability in [0, 1]. Out-of-range probabilities are protocol
    violations, never clamped.
    """

    def __init__(
        self,
        endpoint: str,
        threshold: float = 0.5,
        timeout_s: float = 30.0,
        max_in_flight: int = 16,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.threshold = threshold
        self._client = httpx.Client(
            timeout=timeout_s,
            limits=httpx.Limits(max_connections=max_in_flight),
        )

    def close(self):
        self._client.close()

    def health(self) -> Optional[str]:
        """Model id when the backend reports healthy, else None."""
        try:
            response = self._client.get(f"{self.endpoint}/v1/health")
        except httpx.HTTPError:
            return None
        if response.status_code != 200:
            return None
        try:
            body = response.json()
        except ValueError:
            return None
        if body.get("status") != "ok":
            return None
        return str(body.get("model_id", ""))

    def predict(self, image: ImageRecord) -> tuple[float, str]:
        request = {
            "image_id": image.image_id,
            "content_type": image.content_type,
            "image_b64": base64.b64encode(image.data).decode("ascii"),
        }
        try:
            response = self._client.post(f"{self.endpoint}/v1/predict", json=request)
        except httpx.HTTPError as exc:
            raise ClassificationError(image.image_id, f"transport failure: {exc}") from exc
        if response.status_code != 200:
            raise ClassificationError(
                image.image_id, f"backend returned status {response.status_code}"
            )
        try:
            body = response.json()
            prob = float(body["prob_landslide"])
            model_id = str(body["model_id"])
        except (ValueError, KeyError, TypeError) as exc:
            raise ClassificationError(image.image_id, f"malformed response: {exc}") from exc
        if not math.isfinite(prob) or not 0.0 <= prob <= 1.0:
            raise ProtocolViolationError(
                image.image_id, f"probability {prob!r} outside [0, 1]"
            )
        return prob, model_id


def make_backend(descriptor: BackendDescriptor) -> Backend:
    if descriptor.kind == KIND_EMBEDDED:
        return EmbeddedReferenceBackend(
            weights_path=descriptor.weights_path, threshold=descriptor.threshold
        )
    return RemoteHttpBackend(endpoint=descriptor.endpoint, threshold=descriptor.threshold)


def label_for(prob: float, threshold: float) -> str:
    return LABEL_LANDSLIDE if prob >= threshold else LABEL_NOT_LANDSLIDE


def classify(image: ImageRecord, backend: Backend) -> Prediction:
    """Run one image through a backend and apply the threshold rule."""
    start = time.perf_counter()
    prob, model_id = backend.predict(image)
    latency_ms = (time.perf_counter() - start) * 1000.0
    return Prediction(
        image_id=image.image_id,
        prob_landslide=prob,
        label=label_for(prob, backend.threshold),
        model_id=model_id,
        latency_ms=latency_ms,
    )
