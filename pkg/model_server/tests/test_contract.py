"""Cross-component contract: the primary pipeline against this server.

The pipeline is driven exactly as an operator would run it, over a real
socket, so these tests exercise the wire protocol end to end rather than
the app object.
"""

import json
import subprocess
import threading
import time

import httpx
import pytest
import uvicorn

from landslide_watch.classify import KIND_REMOTE
from landslide_watch.demo import (
    EXPECTED_PERSISTED_IDS,
    EXPECTED_STATS,
    build_demo,
)
from landslide_watch.pipeline import load_config, run_pipeline

from model_server.app import create_app
from model_server.models import stub_model


@pytest.fixture(scope="module")
def live_server():
    config = uvicorn.Config(
        create_app(stub_model()), host="127.0.0.1", port=0, log_level="error"
    )
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 10.0
    while not server.started:
        if time.monotonic() > deadline:
            raise RuntimeError("server did not start")
        time.sleep(0.02)
    port = server.servers[0].sockets[0].getsockname()[1]
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=5)


def test_health_over_socket(live_server):
    response = httpx.get(f"{live_server}/v1/health")
    assert response.status_code == 200
    assert response.json() == {"status": "ok", "model_id": "stub-v1"}


def test_drain_matches_embedded_backend_results(live_server, tmp_path):
    cfg = load_config(
        build_demo(tmp_path, backend_kind=KIND_REMOTE, endpoint=live_server)
    )
    stats = run_pipeline(cfg)
    assert stats.as_tuple() == EXPECTED_STATS
    assert not stats.aborted
    assert stats.errors == {}

    records = [
        json.loads(line)
        for line in (tmp_path / "detections.jsonl").read_text().splitlines()
    ]
    assert tuple(r["image_id"] for r in records) == EXPECTED_PERSISTED_IDS
    assert all(r["model_id"] == "stub-v1" for r in records)


def test_cli_drain_through_console_script(live_server, tmp_path):
    config_path = build_demo(tmp_path, backend_kind=KIND_REMOTE, endpoint=live_server)
    proc = subprocess.run(
        ["landslide-watch", "run", str(config_path), "--drain"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    for name, value in zip(("ingested", "persisted"), (10, 6)):
        assert f"{name:>22}  {value}" in proc.stdout
