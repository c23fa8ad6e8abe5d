from __future__ import annotations

import hashlib
import json

import pytest
from fastapi.testclient import TestClient

from custodychain import chaincode, encoding
from custodychain.explorer_api import create_app
from custodychain.identity import Role
from custodychain.node import LocalNode
from custodychain.records import TxKind


@pytest.fixture
def node(tmp_path):
    node = LocalNode(tmp_path / "node")
    ca = node.init_ca(seed="api-tests")
    node.enroll(Role.ISP, "ispA", ca=ca)
    node.enroll(Role.ISP, "ispB", ca=ca)
    node.enroll(Role.LEA, "lea", ca=ca)
    node.enroll(Role.PROSECUTOR, "pros", ca=ca)
    node.config["orderer"] = "ispA"
    node.ensure_genesis()
    return node


@pytest.fixture
def client(node):
    return TestClient(create_app(node))


def login(client, node, name):
    ident = node.identity(name)
    address = ident.participant.address.hex()
    challenge = client.post("/session/challenge", json={"address": address}).json()["challenge"]
    signature = encoding.to_b64(ident.key.sign(bytes.fromhex(challenge)))
    resp = client.post(
        "/session/login",
        json={"address": address, "challenge": challenge, "signature": signature},
    )
    assert resp.status_code == 200, resp.text
    return {"Authorization": f"Bearer {resp.json()['token']}"}


def seed_evidence(node, payload=b"packet capture", dsc="intrusion", name="ispA"):
    ident = node.identity(name)
    store = node.store_for(ident.participant.address)
    event = store.ev_gen(ident.participant, ident.key, payload)
    tx = store.tx_gen(event, ident.participant, ident.key, meta={"summary": dsc}, device_type="camera")
    node.submit(tx)
    return event.id


def invoke(client, node, headers, op, tx):
    return client.post(
        f"/invoke/{op}", json={"transaction": encoding.to_b64(tx.to_bytes())}, headers=headers
    )


def test_all_endpoints_require_session(client, node):
    id_hex = "00" * 32
    for path in (
        "/blocks/latest",
        "/blocks/0",
        f"/tx/{id_hex}",
        f"/evidence/{id_hex}",
        f"/evidence/{id_hex}/trail",
        f"/evidence/{id_hex}/payload",
        "/devices/cam-1",
        "/chain/verify",
    ):
        assert client.get(path).status_code == 401
    assert client.post("/invoke/create", json={"transaction": ""}).status_code == 401


def test_login_with_wrong_key_rejected(client, node):
    ident = node.identity("ispA")
    other = node.identity("lea")
    address = ident.participant.address.hex()
    challenge = client.post("/session/challenge", json={"address": address}).json()["challenge"]
    forged = encoding.to_b64(other.key.sign(bytes.fromhex(challenge)))
    resp = client.post(
        "/session/login", json={"address": address, "challenge": challenge, "signature": forged}
    )
    assert resp.status_code == 403


def test_expired_token_rejected(client, node):
    headers = login(client, node, "ispA")
    app = client.app
    token = headers["Authorization"].removeprefix("Bearer ")
    address, _ = app.state.sessions.tokens[token]
    app.state.sessions.tokens[token] = (address, 0.0)  # force expiry
    assert client.get("/blocks/latest", headers=headers).status_code == 401


def test_genesis_block_visible(client, node):
    headers = login(client, node, "lea")
    block = client.get("/blocks/0", headers=headers).json()
    assert block["height"] == 0
    assert block["prev_hash"] == "00" * 32
    assert block["tx_list"][0]["kind"] == "GENESIS"


def test_block_and_tx_round_trip(client, node):
    headers = login(client, node, "ispA")
    eid = seed_evidence(node)
    latest = client.get("/blocks/latest", headers=headers).json()
    assert latest["height"] == 1
    tx_id = latest["tx_list"][0]["tx_id"]
    tx = client.get(f"/tx/{tx_id}", headers=headers).json()
    assert tx["height"] == 1
    assert tx["tx"]["proposal"]["id"] == eid.hex()


def test_unknown_entities_404(client, node):
    headers = login(client, node, "ispA")
    assert client.get(f"/blocks/99", headers=headers).status_code == 404
    assert client.get(f"/tx/{'aa'*32}", headers=headers).status_code == 404
    assert client.get(f"/evidence/{'bb'*32}", headers=headers).status_code == 404
    assert client.get("/devices/nope", headers=headers).status_code == 404


def test_evidence_metadata_open_to_enrolled_participants(client, node):
    eid = seed_evidence(node)
    headers = login(client, node, "lea")  # not the owner; open policy
    doc = client.get(f"/evidence/{eid.hex()}", headers=headers).json()
    assert doc["record"]["id"] == eid.hex()
    assert doc["erased"] is False
    assert doc["locator"].startswith("evdb://")


def test_trail_matches_node_state(client, node):
    eid = seed_evidence(node)
    isp = node.identity("ispA")
    lea = node.identity("lea")
    tx = chaincode.transfer_ownership(node.state, isp.participant, isp.key, eid, lea.participant.address)
    node.submit(tx)
    headers = login(client, node, "lea")
    doc = client.get(f"/evidence/{eid.hex()}/trail", headers=headers).json()
    expected = [c.to_json_dict() for c in node.trail(eid)]
    assert doc["trail"] == expected
    assert [seg["open"] for seg in doc["trail"]] == [False, True]


def test_payload_stream_owner_only_with_integrity_headers(client, node):
    payload = b"\x00\x01\x02 raw capture bytes"
    eid = seed_evidence(node, payload=payload)
    isp_headers = login(client, node, "ispA")
    resp = client.get(f"/evidence/{eid.hex()}/payload", headers=isp_headers)
    assert resp.status_code == 200
    assert resp.content == payload
    assert resp.headers["X-Evidence-Id"] == eid.hex()
    nonce = bytes.fromhex(resp.headers["X-Evidence-Nonce"])
    isp = node.identity("ispA")
    sig = node.store_for(isp.participant.address).fetch(eid).creator_signature
    assert hashlib.sha256(resp.content + sig + nonce).digest() == eid

    lea_headers = login(client, node, "lea")
    assert client.get(f"/evidence/{eid.hex()}/payload", headers=lea_headers).status_code == 403


def test_previous_owner_loses_payload_access(client, node):
    eid = seed_evidence(node)
    isp = node.identity("ispA")
    lea = node.identity("lea")
    node.submit(chaincode.transfer_ownership(node.state, isp.participant, isp.key, eid, lea.participant.address))
    isp_headers = login(client, node, "ispA")
    assert client.get(f"/evidence/{eid.hex()}/payload", headers=isp_headers).status_code == 403
    lea_headers = login(client, node, "lea")
    assert client.get(f"/evidence/{eid.hex()}/payload", headers=lea_headers).status_code == 200


def test_erased_evidence_metadata_retained_payload_gone(client, node):
    eid = seed_evidence(node)
    isp = node.identity("ispA")
    node.submit(chaincode.erase_evidence(node.state, isp.participant, isp.key, eid))
    headers = login(client, node, "ispA")
    doc = client.get(f"/evidence/{eid.hex()}", headers=headers).json()
    assert doc["erased"] is True
    assert doc["locator"] == ""
    assert client.get(f"/evidence/{eid.hex()}/payload", headers=headers).status_code == 410


def test_invoke_transfer_and_poll(client, node):
    eid = seed_evidence(node)
    isp = node.identity("ispA")
    lea = node.identity("lea")
    tx = chaincode.transfer_ownership(node.state, isp.participant, isp.key, eid, lea.participant.address)
    headers = login(client, node, "ispA")
    resp = invoke(client, node, headers, "transfer", tx)
    assert resp.status_code == 200, resp.text
    body = resp.json()
    assert body["height"] == 2
    seen = client.get(f"/tx/{body['tx_id']}", headers=headers).json()
    assert seen["tx"]["kind"] == "TRANSFER"
    assert node.state.record(eid).own == lea.participant.address


def test_invoke_non_owner_transfer_denied(client, node):
    eid = seed_evidence(node)
    lea = node.identity("lea")
    pros = node.identity("pros")
    from custodychain.records import sign_transaction
    from dataclasses import replace

    rec = replace(node.state.record(eid), own=pros.participant.address, own_prev=lea.participant.address, custody_times=())
    rogue = sign_transaction(TxKind.TRANSFER, rec, lea.participant, lea.key)
    headers = login(client, node, "lea")
    resp = invoke(client, node, headers, "transfer", rogue)
    assert resp.status_code == 403
    assert resp.json()["code"] == "PERMISSION_DENIED"


def test_invoke_replay_is_idempotent(client, node):
    eid = seed_evidence(node)
    isp = node.identity("ispA")
    lea = node.identity("lea")
    tx = chaincode.transfer_ownership(node.state, isp.participant, isp.key, eid, lea.participant.address)
    headers = login(client, node, "ispA")
    first = invoke(client, node, headers, "transfer", tx).json()
    second = invoke(client, node, headers, "transfer", tx).json()
    assert first == second
    occurrences = sum(
        1
        for h in range(node.chain.height)
        for t in node.block(h).tx_list
        if t.tx_id().hex() == first["tx_id"]
    )
    assert occurrences == 1


def test_invoke_requires_submitter_to_match_session(client, node):
    eid = seed_evidence(node)
    isp = node.identity("ispA")
    lea = node.identity("lea")
    tx = chaincode.transfer_ownership(node.state, isp.participant, isp.key, eid, lea.participant.address)
    lea_headers = login(client, node, "lea")
    resp = invoke(client, node, lea_headers, "transfer", tx)
    assert resp.status_code == 403


def test_invoke_malformed_and_mismatched(client, node):
    headers = login(client, node, "ispA")
    resp = client.post("/invoke/create", json={"transaction": "not base64!!"}, headers=headers)
    assert resp.status_code == 400
    eid = seed_evidence(node)
    isp = node.identity("ispA")
    erase_tx = chaincode.erase_evidence(node.state, isp.participant, isp.key, eid)
    resp = invoke(client, node, headers, "transfer", erase_tx)
    assert resp.status_code == 400  # kind does not match op


def test_chain_verify_endpoint(client, node):
    seed_evidence(node)
    headers = login(client, node, "pros")
    doc = client.get("/chain/verify", headers=headers).json()
    assert doc["valid"] is True
    assert doc["height"] == node.chain.height


def test_api_agrees_with_replay(client, node):
    from custodychain.ledger import replay

    eid = seed_evidence(node)
    isp = node.identity("ispA")
    lea = node.identity("lea")
    node.submit(chaincode.transfer_ownership(node.state, isp.participant, isp.key, eid, lea.participant.address))
    headers = login(client, node, "lea")
    state = replay(node.chain.store, node.hash_name)
    doc = client.get(f"/evidence/{eid.hex()}", headers=headers).json()
    assert doc["record"] == state.evidence[eid].to_json_dict()
    trail = client.get(f"/evidence/{eid.hex()}/trail", headers=headers).json()["trail"]
    assert trail == [c.to_json_dict() for c in state.evidence[eid].custody_times]


def test_owner_gated_metadata_policy(tmp_path):
    node = LocalNode(tmp_path / "gated")
    ca = node.init_ca(seed="gated")
    node.enroll(Role.ISP, "ispA", ca=ca)
    node.enroll(Role.LEA, "lea", ca=ca)
    node.config["metadata_access"] = "owner"
    node.ensure_genesis()
    eid = seed_evidence(node)
    client = TestClient(create_app(node))
    lea_headers = login(client, node, "lea")
    assert client.get(f"/evidence/{eid.hex()}", headers=lea_headers).status_code == 403
    isp_headers = login(client, node, "ispA")
    assert client.get(f"/evidence/{eid.hex()}", headers=isp_headers).status_code == 200
