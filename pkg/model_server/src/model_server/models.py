"""Served models: a deterministic stub and fine-tuned CNN checkpoints.

A checkpoint file is a ``torch.save`` payload with three keys: ``model_id``
(stable identifier reported on every response), ``architecture`` (one of the
names in ``ARCHITECTURES``), and ``state_dict`` (weights for the matching
two-class network). The stub needs no file and scores an image as its mean
gray level over 255, which makes pipeline-level expectations computable by
hand.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import torch
from PIL import Image, UnidentifiedImageError
from torchvision import models as tv_models

KIND_STUB = "deterministic_stub"
KIND_CHECKPOINT = "cnn_checkpoint"

STUB_MODEL_ID = "stub-v1"

CLASSES = ("not_landslide", "landslide")
IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)

# architecture name -> (torchvision constructor, input size)
_BUILDERS = {
    "vgg16": (lambda: tv_models.vgg16(weights=None, num_classes=2), 224),
    "resnet18": (lambda: tv_models.resnet18(weights=None, num_classes=2), 224),
    "resnet50": (lambda: tv_models.resnet50(weights=None, num_classes=2), 224),
    "resnet101": (lambda: tv_models.resnet101(weights=None, num_classes=2), 224),
    "densenet": (lambda: tv_models.densenet121(weights=None, num_classes=2), 224),
    "inceptionnet": (
        lambda: tv_models.inception_v3(
            weights=None, num_classes=2, aux_logits=True, init_weights=False
        ),
        299,
    ),
    "efficientnet": (lambda: tv_models.efficientnet_b0(weights=None, num_classes=2), 224),
}

ARCHITECTURES = {name: size for name, (_, size) in _BUILDERS.items()}


class ModelError(Exception):
    """A model could not be constructed or loaded."""


@dataclass(frozen=True)
class ServedModel:
    model_id: str
    kind: str
    scorer: Callable[[Image.Image], float] = field(repr=False, compare=False)
    input_size: Optional[int] = None
    normalize_mean: Optional[tuple] = None
    normalize_std: Optional[tuple] = None

    def __post_init__(self):
        if not self.model_id:
            raise ModelError("model_id must be non-empty")
        if self.kind not in (KIND_STUB, KIND_CHECKPOINT):
            raise ModelError(f"unknown model kind {self.kind!r}")

    def prob_landslide(self, image: Image.Image) -> float:
        prob = float(self.scorer(image))
        if not 0.0 <= prob <= 1.0:
            raise ModelError(f"scorer produced {prob!r}, outside [0, 1]")
        return prob


def decode_image(data: bytes) -> Image.Image:
    try:
        image = Image.open(io.BytesIO(data))
        image.load()
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise ValueError(f"undecodable image: {exc}") from None
    return image


def _mean_gray(image: Image.Image) -> float:
    gray = np.asarray(image.convert("L"), dtype=np.float64)
    return float(gray.mean() / 255.0)


def stub_model() -> ServedModel:
    return ServedModel(model_id=STUB_MODEL_ID, kind=KIND_STUB, scorer=_mean_gray)


def build_network(architecture: str) -> tuple[torch.nn.Module, int]:
    """Fresh two-class network and input size for a supported architecture."""
    key = architecture.strip().lower()
    if key not in _BUILDERS:
        raise ModelError(
            f"unknown architecture {architecture!r}; expected one of {sorted(_BUILDERS)}"
        )
    builder, size = _BUILDERS[key]
    return builder(), size


def save_checkpoint(path, model_id: str, architecture: str, network: torch.nn.Module):
    if architecture.strip().lower() not in _BUILDERS:
        raise ModelError(f"unknown architecture {architecture!r}")
    torch.save(
        {
            "model_id": model_id,
            "architecture": architecture,
            "state_dict": network.state_dict(),
        },
        Path(path),
    )


def load_checkpoint(path) -> ServedModel:
    path = Path(path)
    if not path.is_file():
        raise ModelError(f"checkpoint {path} does not exist")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:
        raise ModelError(f"checkpoint {path} is not readable: {exc}") from None
    if not isinstance(payload, dict):
        raise ModelError(f"checkpoint {path} must contain a payload dict")
    for key in ("model_id", "architecture", "state_dict"):
        if key not in payload:
            raise ModelError(f"checkpoint {path} is missing {key!r}")
    model_id = payload["model_id"]
    if not isinstance(model_id, str) or not model_id:
        raise ModelError(f"checkpoint {path} has an invalid model_id")

    network, size = build_network(str(payload["architecture"]))
    try:
        network.load_state_dict(payload["state_dict"])
    except Exception as exc:
        raise ModelError(
            f"state dict does not match architecture {payload['architecture']!r}: {exc}"
        ) from None
    network.eval()

    mean = torch.tensor(IMAGENET_MEAN).view(3, 1, 1)
    std = torch.tensor(IMAGENET_STD).view(3, 1, 1)

    def score(image: Image.Image) -> float:
        resized = image.convert("RGB").resize((size, size), Image.BILINEAR)
        pixels = torch.from_numpy(np.asarray(resized, dtype=np.float32) / 255.0)
        batch = ((pixels.permute(2, 0, 1) - mean) / std).unsqueeze(0)
        with torch.no_grad():
            logits = network(batch)
        return torch.softmax(logits, dim=1)[0, 1].item()

    return ServedModel(
        model_id=model_id,
        kind=KIND_CHECKPOINT,
        scorer=score,
        input_size=size,
        normalize_mean=IMAGENET_MEAN,
        normalize_std=IMAGENET_STD,
    )
