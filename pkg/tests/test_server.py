"""Live-socket smoke test: `node start` serves the explorer API for real."""

from __future__ import annotations

import json
import socket
import subprocess
import sys
import time
from pathlib import Path

import httpx
import pytest

from custodychain import encoding
from custodychain.cli import main
from custodychain.node import LocalNode


def free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


@pytest.fixture
def served_node(tmp_path):
    d = tmp_path / "node"
    assert main(["ca", "init", "--dir", str(d), "--seed", "server-test"]) == 0
    assert main(["enroll", "--dir", str(d), "--role", "ISP", "--name", "isp"]) == 0
    assert main(["enroll", "--dir", str(d), "--role", "LEA", "--name", "lea"]) == 0
    port = free_port()
    cfg = json.loads((d / "node_config.json").read_text()) if (d / "node_config.json").exists() else {}
    cfg.update({"orderer": "isp", "host": "127.0.0.1", "port": port})
    (d / "node_config.json").write_text(json.dumps(cfg))

    proc = subprocess.Popen(
        [sys.executable, "-m", "custodychain.cli", "node", "start", "--config", str(d / "node_config.json")],
        stdout=subprocess.PIPE,
        stderr=subprocess.STDOUT,
    )
    base = f"http://127.0.0.1:{port}"
    try:
        for _ in range(100):
            try:
                httpx.get(base + "/blocks/latest", timeout=0.5)
                break
            except httpx.TransportError:
                if proc.poll() is not None:
                    raise RuntimeError(proc.stdout.read().decode())
                time.sleep(0.1)
        yield d, base
    finally:
        proc.terminate()
        proc.wait(timeout=10)


def login(base: str, node_dir: Path, name: str) -> dict:
    node = LocalNode(node_dir)
    ident = node.identity(name)
    address = ident.participant.address.hex()
    challenge = httpx.post(base + "/session/challenge", json={"address": address}).json()["challenge"]
    signature = encoding.to_b64(ident.key.sign(bytes.fromhex(challenge)))
    resp = httpx.post(
        base + "/session/login",
        json={"address": address, "challenge": challenge, "signature": signature},
    )
    assert resp.status_code == 200, resp.text
    return {"Authorization": f"Bearer {resp.json()['token']}"}


def test_node_start_serves_explorer_over_http(served_node):
    node_dir, base = served_node
    assert httpx.get(base + "/blocks/latest").status_code == 401  # auth enforced on the wire
    headers = login(base, node_dir, "lea")
    genesis = httpx.get(base + "/blocks/0", headers=headers).json()
    assert genesis["height"] == 0
    assert genesis["prev_hash"] == "00" * 32
    report = httpx.get(base + "/chain/verify", headers=headers).json()
    assert report["valid"] is True


def test_explorer_serve_requires_initialized_chain(tmp_path, capsys):
    d = tmp_path / "empty"
    d.mkdir()
    (d / "node_config.json").write_text(json.dumps({"host": "127.0.0.1", "port": free_port()}))
    code = main(["explorer", "serve", "--config", str(d / "node_config.json")])
    captured = capsys.readouterr()
    assert code == 1
    assert "chain is empty" in json.loads(captured.err)["message"]
