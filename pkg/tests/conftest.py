from __future__ import annotations

import pytest

from custodychain.config import ChainConfig
from custodychain.identity import Role, ca_init
from custodychain.ledger import Chain, MemoryBlockStore, build_block
from custodychain.node import build_genesis_transaction


@pytest.fixture
def ca():
    # Certs valid from t=0 far into the future so tests can use logical block times.
    return ca_init(seed="test-ca", clock=lambda: 0, cert_lifetime=1 << 33)


@pytest.fixture
def parties(ca):
    """Deterministic roster: one ISP (doubles as orderer), a second ISP, two LEAs, a prosecutor."""
    isp_a = ca.enroll(Role.ISP)
    isp_b = ca.enroll(Role.ISP)
    lea_a = ca.enroll(Role.LEA)
    lea_b = ca.enroll(Role.LEA)
    pros = ca.enroll(Role.PROSECUTOR)
    return {"isp_a": isp_a, "isp_b": isp_b, "lea_a": lea_a, "lea_b": lea_b, "pros": pros}


def make_chain(ca, parties, cfg: ChainConfig | None = None, genesis_time: int = 1_700_000_000) -> Chain:
    cfg = cfg or ChainConfig()
    roster = [p.cert for p, _ in parties.values()]
    orderer, orderer_key = parties["isp_a"]
    genesis_tx = build_genesis_transaction(ca, roster, orderer.address, cfg)
    chain = Chain(MemoryBlockStore(), cfg.hash_name)
    block = build_block(0, b"\x00" * 32, genesis_time, [genesis_tx], orderer, orderer_key, cfg.hash_name)
    chain.append_block(block)
    return chain


@pytest.fixture
def chain(ca, parties):
    return make_chain(ca, parties)


def commit(chain: Chain, parties, txs, timestamp: int) -> None:
    orderer, orderer_key = parties["isp_a"]
    block = build_block(
        chain.height, chain.tip_hash, timestamp, txs, orderer, orderer_key, chain.hash_name
    )
    chain.append_block(block)
