#!/usr/bin/env python3
"""Serve a detection store over HTTP, read-only."""

import argparse

import uvicorn

from landslide_watch.api import create_app
from landslide_watch.store import DetectionStore


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("store", help="path to a detections JSONL log")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8800)
    args = parser.parse_args()

    store = DetectionStore(args.store, read_only=True)
    uvicorn.run(create_app(store), host=args.host, port=args.port)


if __name__ == "__main__":
    main()
