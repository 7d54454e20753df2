import base64
import io

import numpy as np
import pytest
import torch
from PIL import Image

from model_server.models import build_network, save_checkpoint

TOY_MODEL_ID = "toy-resnet18-epoch1"


def flat_png(value: int, size: tuple[int, int] = (64, 64)) -> bytes:
    pixels = np.full((size[1], size[0]), value, dtype=np.uint8)
    return png_bytes(pixels)


def png_bytes(pixels: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(pixels, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def predict_body(data: bytes, image_id: str = "img#0") -> dict:
    return {
        "image_id": image_id,
        "content_type": "image/png",
        "image_b64": base64.b64encode(data).decode("ascii"),
    }


@pytest.fixture(scope="session")
def toy_checkpoint(tmp_path_factory):
    """Randomly initialized two-class ResNet18 saved in the checkpoint format."""
    torch.manual_seed(0)
    network, _ = build_network("resnet18")
    path = tmp_path_factory.mktemp("checkpoints") / "toy.pt"
    save_checkpoint(path, TOY_MODEL_ID, "resnet18", network)
    return path
