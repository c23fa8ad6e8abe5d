from __future__ import annotations

import json
from pathlib import Path

import pytest

from custodychain.cli import main

SCENARIO = {
    "kind": "smarthome",
    "seed": 42,
    "start_time": 1_750_000_000,
    "duration_s": 400,
    "patient_zero": "cam-1",
    "devices": [
        {"device_id": "cam-1", "device_type": "camera", "open_services": ["TELNET"], "default_credentials": True},
        {"device_id": "tv-1", "device_type": "smart-tv", "vulnerable_firmware": True},
        {"device_id": "hub-1", "device_type": "hub"},
    ],
    "attacks": ["DDOS", "SPAM"],
}


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture
def node_dir(tmp_path, capsys):
    d = tmp_path / "node"
    assert main(["ca", "init", "--dir", str(d), "--seed", "cli-tests"]) == 0
    for role, name in (("ISP", "ispA"), ("ISP", "ispB"), ("LEA", "lea"), ("PROSECUTOR", "pros")):
        assert main(["enroll", "--dir", str(d), "--role", role, "--name", name]) == 0
    cfg = json.loads((d / "node_config.json").read_text()) if (d / "node_config.json").exists() else {}
    cfg["orderer"] = "ispA"
    (d / "node_config.json").write_text(json.dumps(cfg))
    capsys.readouterr()
    return d


def create_evidence(node_dir, tmp_path, capsys, dsc="intrusion"):
    payload = tmp_path / "capture.bin"
    payload.write_bytes(b"captured packets for " + dsc.encode())
    code, out, _ = run(
        capsys,
        "evidence",
        "create",
        "--dir",
        str(node_dir),
        "--as",
        "ispA",
        "--payload",
        str(payload),
        "--dsc",
        dsc,
        "--type",
        "camera",
        "--tm",
        "1750000100",
        "--output",
        "structured",
    )
    assert code == 0, out
    return json.loads(out)["id"]


def test_ca_init_and_enroll_files(node_dir):
    assert (node_dir / "ca" / "root.pub").exists()
    assert (node_dir / "identities" / "ispA.cert").exists()
    assert (node_dir / "identities" / "ispA.key").exists()


def test_evidence_lifecycle_via_cli(node_dir, tmp_path, capsys):
    eid = create_evidence(node_dir, tmp_path, capsys)

    code, out, _ = run(capsys, "evidence", "get", "--dir", str(node_dir), "--as", "ispA", "--id", eid,
                       "--out", str(tmp_path / "fetched.bin"), "--output", "structured")
    assert code == 0
    assert (tmp_path / "fetched.bin").read_bytes().startswith(b"captured packets")

    code, out, _ = run(capsys, "evidence", "transfer", "--dir", str(node_dir), "--as", "ispA",
                       "--id", eid, "--to", "lea", "--output", "structured")
    assert code == 0

    # previous owner can no longer get
    code, _, err = run(capsys, "evidence", "get", "--dir", str(node_dir), "--as", "ispA", "--id", eid)
    assert code == 1
    assert json.loads(err)["code"] == "PERMISSION_DENIED"

    code, out, _ = run(capsys, "trail", "show", "--dir", str(node_dir), "--id", eid, "--output", "structured")
    assert code == 0
    trail = json.loads(out)["trail"]
    assert len(trail) == 2 and trail[-1]["open"]

    code, out, _ = run(capsys, "evidence", "erase", "--dir", str(node_dir), "--as", "ispA", "--id", eid)
    assert code == 0
    code, _, err = run(capsys, "evidence", "get", "--dir", str(node_dir), "--as", "lea", "--id", eid)
    assert code == 1
    assert json.loads(err)["code"] == "ERASED"

    code, out, _ = run(capsys, "chain", "verify", "--dir", str(node_dir))
    assert code == 0
    assert "chain valid" in out


def test_transfer_without_owner_key_denied(node_dir, tmp_path, capsys):
    eid = create_evidence(node_dir, tmp_path, capsys)
    code, _, err = run(capsys, "evidence", "transfer", "--dir", str(node_dir), "--as", "lea",
                       "--id", eid, "--to", "pros")
    assert code == 1
    assert json.loads(err)["code"] == "PERMISSION_DENIED"


def test_device_register_and_verify(node_dir, tmp_path, capsys):
    fw = tmp_path / "firmware.bin"
    fw.write_bytes(b"firmware v1")
    cfgf = tmp_path / "config.json"
    cfgf.write_bytes(b"config v1")
    code, out, _ = run(capsys, "device", "register", "--dir", str(node_dir), "--as", "ispA",
                       "--device-id", "cam-1", "--firmware-file", str(fw), "--config-file", str(cfgf),
                       "--output", "structured")
    assert code == 0
    doc = json.loads(out)
    code, out, _ = run(capsys, "device", "verify", "--dir", str(node_dir), "--device-id", "cam-1",
                       "--firmware-hash", doc["firmware_hash"], "--config-hash", doc["config_hash"],
                       "--output", "structured")
    assert code == 0
    assert json.loads(out)["result"] == "CURRENT"
    code, out, _ = run(capsys, "device", "verify", "--dir", str(node_dir), "--device-id", "cam-1",
                       "--firmware-hash", "ff" * 32, "--config-hash", "ee" * 32, "--output", "structured")
    assert code == 0
    assert json.loads(out)["result"] == "UNKNOWN"


def test_chain_verify_detects_tamper_and_prints_height(node_dir, tmp_path, capsys):
    for i in range(3):
        create_evidence(node_dir, tmp_path, capsys, dsc=f"case {i}")
    dat = node_dir / "chain" / "blocks.dat"
    raw = bytearray(dat.read_bytes())
    raw[len(raw) // 2] ^= 0x01
    dat.write_bytes(bytes(raw))
    code, out, _ = run(capsys, "chain", "verify", "--dir", str(node_dir))
    assert code == 1
    assert "INVALID at height" in out


def test_scenario_run_deterministic(tmp_path, capsys):
    spec = tmp_path / "scenario.json"
    spec.write_text(json.dumps(SCENARIO))
    code, out1, _ = run(capsys, "scenario", "run", "--spec", str(spec), "--dir", str(tmp_path / "n1"))
    assert code == 0
    code, out2, _ = run(capsys, "scenario", "run", "--spec", str(spec), "--dir", str(tmp_path / "n2"))
    assert code == 0
    assert out1 == out2
    summary = json.loads(out1)
    assert summary["chain_valid"] is True
    assert summary["evidence_created"] > 0
    assert summary["incidents"]["PROPAGATION"] == 1


def test_scenario_seed_override_changes_summary(tmp_path, capsys):
    spec = tmp_path / "scenario.json"
    spec.write_text(json.dumps(SCENARIO))
    code, out1, _ = run(capsys, "scenario", "run", "--spec", str(spec), "--dir", str(tmp_path / "n1"))
    code, out2, _ = run(capsys, "scenario", "run", "--spec", str(spec), "--dir", str(tmp_path / "n2"),
                        "--seed", "43")
    assert json.loads(out1)["seed"] != json.loads(out2)["seed"]


def test_network_scenario_run(tmp_path, capsys):
    spec = tmp_path / "net.json"
    spec.write_text(
        json.dumps(
            {
                "kind": "network",
                "seed": 7,
                "max_batch": 5,
                "nodes": [
                    {"node_id": "orderer", "is_orderer": True},
                    {"node_id": "p1"},
                    {"node_id": "p2"},
                ],
                "clients": {"c0": "ISP"},
                "timeline": [
                    {"at_ms": 0, "action": "create", "client": "c0", "count": 8},
                    {"at_ms": 500, "action": "fault", "fault": "PARTITION", "groups": {"p2": 1}},
                    {"at_ms": 600, "action": "create", "client": "c0", "count": 4},
                    {"at_ms": 2000, "action": "heal"},
                ],
            }
        )
    )
    code, out1, _ = run(capsys, "scenario", "run", "--spec", str(spec))
    assert code == 0
    summary = json.loads(out1)
    assert summary["chains_identical"] is True
    assert summary["committed_txs"] == 12
    code, out2, _ = run(capsys, "scenario", "run", "--spec", str(spec))
    assert out1 == out2


def test_cli_query_output_is_byte_stable(node_dir, tmp_path, capsys):
    """Golden-file check: structured trail output for a fixed chain."""
    eid = create_evidence(node_dir, tmp_path, capsys)
    run(capsys, "evidence", "transfer", "--dir", str(node_dir), "--as", "ispA", "--id", eid, "--to", "lea")
    outs = []
    for _ in range(2):
        code, out, _ = run(capsys, "trail", "show", "--dir", str(node_dir), "--id", eid, "--output", "structured")
        assert code == 0
        outs.append(out)
    assert outs[0] == outs[1]
    doc = json.loads(outs[0])
    assert list(doc.keys()) == ["id", "erased", "trail"]
    assert list(doc["trail"][0].keys()) == ["owner", "start", "end", "open"]


def test_unknown_identity_error(node_dir, tmp_path, capsys):
    code, _, err = run(capsys, "evidence", "create", "--dir", str(node_dir), "--as", "ghost",
                       "--payload", __file__, "--dsc", "x", "--type", "t")
    assert code == 1
    assert json.loads(err)["code"] == "NOT_FOUND"


def test_scenario_summary_matches_golden_file(tmp_path, capsys):
    """Frozen output: any summary-format or determinism regression shows up here."""
    spec = tmp_path / "scenario.json"
    spec.write_text(json.dumps(SCENARIO))
    code, out, _ = run(capsys, "scenario", "run", "--spec", str(spec), "--dir", str(tmp_path / "node"))
    assert code == 0
    golden = (Path(__file__).parent / "golden" / "scenario_seed42_summary.json").read_text()
    assert out == golden
