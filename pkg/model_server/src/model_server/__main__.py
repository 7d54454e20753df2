"""Run the model server.

Configuration comes from the environment: MODEL_SERVER_MODEL is either the
literal "stub" (default) or a checkpoint path, MODEL_SERVER_HOST and
MODEL_SERVER_PORT set the bind address. A checkpoint that cannot be loaded
is a startup failure with a nonzero exit.
"""

import os
import sys

import uvicorn

from .app import create_app
from .models import ModelError, load_checkpoint, stub_model

STUB_SOURCE = "stub"


def main() -> int:
    source = os.environ.get("MODEL_SERVER_MODEL", STUB_SOURCE)
    host = os.environ.get("MODEL_SERVER_HOST", "127.0.0.1")
    try:
        port = int(os.environ.get("MODEL_SERVER_PORT", "8500"))
    except ValueError:
        print("error: MODEL_SERVER_PORT must be an integer", file=sys.stderr)
        return 2
    try:
        model = stub_model() if source == STUB_SOURCE else load_checkpoint(source)
    except ModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"serving {model.model_id} on {host}:{port}")
    uvicorn.run(create_app(model), host=host, port=port)
    return 0


def entrypoint():
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
