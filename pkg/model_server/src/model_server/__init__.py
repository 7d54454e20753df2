"""Reference server for the landslide prediction wire protocol."""

from .app import create_app
from .models import (
    ARCHITECTURES,
    CLASSES,
    IMAGENET_MEAN,
    IMAGENET_STD,
    KIND_CHECKPOINT,
    KIND_STUB,
    ModelError,
    ServedModel,
    build_network,
    load_checkpoint,
    save_checkpoint,
    stub_model,
)

__all__ = [
    "ARCHITECTURES",
    "CLASSES",
    "IMAGENET_MEAN",
    "IMAGENET_STD",
    "KIND_CHECKPOINT",
    "KIND_STUB",
    "ModelError",
    "ServedModel",
    "build_network",
    "create_app",
    "load_checkpoint",
    "save_checkpoint",
    "stub_model",
]
