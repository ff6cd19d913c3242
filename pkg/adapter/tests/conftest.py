from __future__ import annotations

import threading
from pathlib import Path

import pytest

import acdsim
from acdsim.protocol import serve_tcp

SCENARIO_DIR = Path(__file__).resolve().parents[2] / "src" / "acdsim" / "scenarios"


@pytest.fixture(scope="session")
def mvp_tcp_server():
    """A live TCP server for the mvp scenario on an ephemeral port."""
    config = acdsim.load_bundled("mvp-2host")
    ready = threading.Event()
    holder = {}

    def on_ready(server):
        holder["server"] = server
        ready.set()

    thread = threading.Thread(
        target=serve_tcp, args=(config, 0), kwargs={"ready_callback": on_ready},
        daemon=True,
    )
    thread.start()
    assert ready.wait(10.0)
    server = holder["server"]
    yield server.server_address
    server.shutdown()
