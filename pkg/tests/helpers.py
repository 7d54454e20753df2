"""Shared fixture builders: images, posts, records, loopback servers."""

from __future__ import annotations

import base64
import io
import json
import socket
import socketserver
import threading
from contextlib import contextmanager
from datetime import datetime, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
from PIL import Image

from landslide_watch.images import ImageRecord, decode_grayscale, dhash64
from landslide_watch.ingest import PostRecord

UTC_NOON = datetime(2021, 7, 1, 12, 0, 0, tzinfo=timezone.utc)


def flat_image(value: float, shape=(64, 64)) -> np.ndarray:
    return np.full(shape, float(value))


def encode_image(pixels: np.ndarray, fmt: str = "PNG") -> bytes:
    buf = io.BytesIO()
    Image.fromarray(np.asarray(pixels, dtype=np.uint8), mode="L").save(buf, format=fmt)
    return buf.getvalue()


def flat_png(value: int, shape=(64, 64)) -> bytes:
    return encode_image(flat_image(value, shape))


def make_post(
    post_id: str = "p1",
    text: str = "landslide on the hill",
    urls: tuple = (),
    minute: int = 0,
    geo=None,
    author_location=None,
) -> PostRecord:
    return PostRecord(
        post_id=post_id,
        created_at=UTC_NOON.replace(minute=minute),
        text=text,
        media_urls=tuple(urls),
        geo=geo,
        lang="en",
        author_location=author_location,
    )


def image_record(data: bytes, image_id: str = "p1#0") -> ImageRecord:
    gray, mime = decode_grayscale(data)
    return ImageRecord(
        image_id=image_id,
        source_post=image_id.split("#")[0],
        data=data,
        content_type=mime,
        phash=dhash64(gray),
        fetched_at=UTC_NOON,
    )


class _CannedHandler(BaseHTTPRequestHandler):
    """Serves whatever the server's ``routes`` dict says.

    A route value is either (status, content_type, body_bytes) or a callable
    (handler) -> same tuple, evaluated per request.
    """

    def log_message(self, *args):
        pass

    def _respond(self):
        self.server.request_log.append(self.path)
        route = self.server.routes.get(self.path)
        if route is None:
            self.send_response(404)
            self.end_headers()
            return
        if callable(route):
            route = route(self)
        status, content_type, body = route
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    do_GET = _respond
    do_POST = _respond


@contextmanager
def canned_http_server(routes: dict):
    server = ThreadingHTTPServer(("127.0.0.1", 0), _CannedHandler)
    server.routes = routes
    server.request_log = []
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield server, f"http://127.0.0.1:{server.server_port}"
    finally:
        server.shutdown()
        server.server_close()
        thread.join()


class _PredictHandler(BaseHTTPRequestHandler):
    """Minimal inference wire-protocol stub with injectable failure modes."""

    def log_message(self, *args):
        pass

    def do_GET(self):
        if self.path != "/v1/health":
            self.send_response(404)
            self.end_headers()
            return
        if self.server.mode == "unhealthy":
            self._json(503, {"status": "unavailable", "model_id": None})
        else:
            self._json(200, {"status": "ok", "model_id": self.server.model_id})

    def do_POST(self):
        if self.path != "/v1/predict":
            self.send_response(404)
            self.end_headers()
            return
        mode = self.server.mode
        length = int(self.headers.get("Content-Length", "0"))
        raw = self.rfile.read(length)
        try:
            request = json.loads(raw)
            image_id = request["image_id"]
            data = base64.b64decode(request["image_b64"])
        except (ValueError, KeyError, TypeError):
            self._json(400, {"error": "malformed request"})
            return
        if mode == "http_500":
            self._json(500, {"error": "boom"})
            return
        if mode == "bad_json":
            self._raw(200, b"not json{", "application/json")
            return
        if mode == "missing_key":
            self._json(200, {"image_id": image_id, "model_id": self.server.model_id})
            return
        if mode == "prob_high":
            self._json(
                200,
                {"image_id": image_id, "prob_landslide": 1.5, "model_id": self.server.model_id},
            )
            return
        if mode == "prob_nan":
            self._raw(
                200,
                f'{{"image_id": "{image_id}", "prob_landslide": NaN, '
                f'"model_id": "{self.server.model_id}"}}'.encode(),
                "application/json",
            )
            return
        try:
            gray, _ = decode_grayscale(data)
        except ValueError:
            self._json(422, {"error": "undecodable image"})
            return
        prob = float(gray.mean() / 255.0)
        self._json(
            200,
            {"image_id": image_id, "prob_landslide": prob, "model_id": self.server.model_id},
        )

    def _json(self, status: int, payload: dict):
        self._raw(status, json.dumps(payload).encode(), "application/json")

    def _raw(self, status: int, body: bytes, content_type: str):
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


@contextmanager
def stub_predict_server(mode: str = "mean_gray", model_id: str = "stub-test"):
    """Loopback model server scoring images by mean gray, or failing per mode."""
    server = ThreadingHTTPServer(("127.0.0.1", 0), _PredictHandler)
    server.mode = mode
    server.model_id = model_id
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield f"http://127.0.0.1:{server.server_port}"
    finally:
        server.shutdown()
        server.server_close()
        thread.join()


@contextmanager
def tcp_line_server(lines: list[bytes]):
    """One-shot TCP server that writes the lines to each connection, then closes."""

    class Handler(socketserver.BaseRequestHandler):
        def handle(self):
            for line in lines:
                self.request.sendall(line)
            self.request.shutdown(socket.SHUT_WR)

    server = socketserver.ThreadingTCPServer(("127.0.0.1", 0), Handler)
    server.daemon_threads = True
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield f"tcp://127.0.0.1:{server.server_address[1]}"
    finally:
        server.shutdown()
        server.server_close()
        thread.join()


def free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]
