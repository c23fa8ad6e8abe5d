"""Single-node runtime: a data directory holding the chain, the CA material,
enrolled identities and the per-ISP evidence stores.

This is the deployment unit behind the CLI and the HTTP explorer. The node
embeds the ordering role: submissions are validated and committed one block
per submission (batch window zero), serialized through a commit lock.
Membership is frozen at genesis; identities enrolled afterwards are not part
of the chain roster.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass
from pathlib import Path

from . import chaincode
from .chaincode import EvidenceHandle, WorldState, locator_for
from .config import ChainConfig, DEFAULT_PAYLOAD_CAP
from .errors import ChainError, NotFound
from .evidence_store import EvidenceStore
from .identity import (
    CAContext,
    Certificate,
    Participant,
    Role,
    SigningKey,
    address_from_public_key,
    load_cert,
    load_key,
    save_cert,
    save_key,
)
from .ledger import Block, Chain, FileBlockStore, VerificationReport, build_block
from .records import GenesisPayload, Transaction, TxKind, sign_transaction

CONFIG_NAME = "node_config.json"
DEFAULT_CONFIG = {
    "hash_name": "sha256",
    "orderer": None,
    "allow_prosecutor_transfer": False,
    "metadata_access": "open",
    "payload_cap": DEFAULT_PAYLOAD_CAP,
    "host": "127.0.0.1",
    "port": 8808,
    "session_ttl_s": 3600,
    "genesis_time": None,
}


def build_genesis_transaction(
    ca: CAContext,
    roster: list[Certificate],
    orderer_address: bytes,
    cfg: ChainConfig,
) -> Transaction:
    """Membership anchor signed directly by the CA root key."""
    payload = GenesisPayload(
        ca_root_public_key=ca.root_public_key,
        orderer_address=orderer_address,
        chain_config=cfg,
        roster=tuple(sorted(roster, key=lambda c: c.subject_address)),
    )
    submitter = address_from_public_key(ca.root_public_key, cfg.hash_name)
    unsigned = Transaction(kind=TxKind.GENESIS, proposal=payload, submitter=submitter, submitter_signature=b"")
    return Transaction(
        kind=TxKind.GENESIS,
        proposal=payload,
        submitter=submitter,
        submitter_signature=ca.sign(unsigned.signing_bytes()),
    )


@dataclass
class Identity:
    name: str
    participant: Participant
    key: SigningKey | None


class LocalNode:
    """Node over a data directory; commit path serialized, reads lock-free."""

    def __init__(self, base_dir: Path, clock=None) -> None:
        self.base_dir = Path(base_dir)
        self.base_dir.mkdir(parents=True, exist_ok=True)
        self.config = dict(DEFAULT_CONFIG)
        cfg_path = self.base_dir / CONFIG_NAME
        if cfg_path.exists():
            self.config.update(json.loads(cfg_path.read_text()))
        self.clock = clock or (lambda: int(time.time()))
        self.hash_name = self.config["hash_name"]
        self.chain = Chain(FileBlockStore(self.base_dir / "chain"), self.hash_name)
        self._commit_lock = threading.Lock()
        self._stores: dict[bytes, EvidenceStore] = {}

    # -- directory pieces -----------------------------------------------------

    def save_config(self) -> None:
        (self.base_dir / CONFIG_NAME).write_text(json.dumps(self.config, indent=2) + "\n")

    @property
    def ca_dir(self) -> Path:
        return self.base_dir / "ca"

    @property
    def identities_dir(self) -> Path:
        return self.base_dir / "identities"

    def ca_public_key(self) -> bytes:
        path = self.ca_dir / "root.pub"
        if not path.exists():
            raise NotFound("CA not initialized (run `ca init` first)")
        from .encoding import load_binary_or_b64

        return load_binary_or_b64(path.read_bytes())

    def load_ca(self) -> CAContext:
        path = self.ca_dir / "root.key"
        if not path.exists():
            raise NotFound("CA root key not present in this node directory")
        return CAContext.from_key(load_key(path), hash_name=self.hash_name)

    def init_ca(self, seed=None, text: bool = False, clock=None, cert_lifetime: int | None = None) -> CAContext:
        kwargs = {"seed": seed, "hash_name": self.hash_name, "clock": clock}
        if cert_lifetime is not None:
            kwargs["cert_lifetime"] = cert_lifetime
        ca = CAContext(**kwargs)
        self.ca_dir.mkdir(parents=True, exist_ok=True)
        save_key(ca.root_signing_key, self.ca_dir / "root.key", text=text)
        (self.ca_dir / "root.pub").write_bytes(ca.root_public_key)
        return ca

    def enroll(self, role: Role, name: str, ca: CAContext | None = None, text: bool = False) -> Identity:
        ca = ca or self.load_ca()
        participant, key = ca.enroll(role)
        self.identities_dir.mkdir(parents=True, exist_ok=True)
        save_cert(participant.cert, self.identities_dir / f"{name}.cert", text=text)
        save_key(key, self.identities_dir / f"{name}.key", text=text)
        return Identity(name=name, participant=participant, key=key)

    def identities(self) -> dict[str, Identity]:
        out: dict[str, Identity] = {}
        if not self.identities_dir.exists():
            return out
        for cert_path in sorted(self.identities_dir.glob("*.cert")):
            name = cert_path.stem
            participant = Participant.from_cert(load_cert(cert_path))
            key_path = cert_path.with_suffix(".key")
            key = load_key(key_path) if key_path.exists() else None
            out[name] = Identity(name=name, participant=participant, key=key)
        return out

    def identity(self, name: str) -> Identity:
        ident = self.identities().get(name)
        if ident is None:
            raise NotFound(f"identity {name!r} not enrolled in this node directory")
        return ident

    def resolve_address(self, name_or_hex: str) -> bytes:
        ident = self.identities().get(name_or_hex)
        if ident is not None:
            return ident.participant.address
        try:
            return bytes.fromhex(name_or_hex)
        except ValueError:
            raise NotFound(f"unknown participant {name_or_hex!r}") from None

    # -- genesis / commit ------------------------------------------------------

    def chain_config(self) -> ChainConfig:
        if self.chain.height:
            return self.chain.state.config
        return ChainConfig(
            hash_name=self.hash_name,
            allow_prosecutor_transfer=bool(self.config["allow_prosecutor_transfer"]),
            metadata_access=self.config["metadata_access"],
            payload_cap=int(self.config["payload_cap"]),
        )

    def orderer_identity(self) -> Identity:
        idents = self.identities()
        name = self.config.get("orderer")
        if name:
            return self.identity(name)
        isps = [i for i in idents.values() if i.participant.role is Role.ISP and i.key is not None]
        if not isps:
            raise NotFound("no ISP identity available to act as orderer")
        return sorted(isps, key=lambda i: i.name)[0]

    def ensure_genesis(self) -> None:
        with self._commit_lock:
            if self.chain.height:
                return
            ca = self.load_ca()
            idents = self.identities()
            if not idents:
                raise NotFound("no identities enrolled; genesis needs a roster")
            orderer = self.orderer_identity()
            genesis_tx = build_genesis_transaction(
                ca,
                [i.participant.cert for i in idents.values()],
                orderer.participant.address,
                self.chain_config(),
            )
            ts = self.config.get("genesis_time") or self.clock()
            block = build_block(
                0, b"\x00" * 32, ts, [genesis_tx], orderer.participant, orderer.key, self.hash_name
            )
            self.chain.append_block(block)

    @property
    def state(self) -> WorldState:
        return self.chain.state

    def submit(self, tx: Transaction) -> tuple[bytes, int]:
        """Validate, commit in a single-transaction block, return (tx_id, height).

        Duplicate submissions are idempotent: the already-committed location
        is returned and nothing new lands on chain.
        """
        if self.chain.height == 0:
            self.ensure_genesis()
        tx_id = tx.tx_id(self.hash_name)
        with self._commit_lock:
            existing = self.chain.tx_index.get(tx_id)
            if existing is not None:
                return tx_id, existing[0]
            # Surface chaincode denials under their own reason codes instead
            # of a block-level rejection.
            chaincode.check_tx(self.state, tx)
            orderer = self.orderer_identity()
            block = build_block(
                self.chain.height,
                self.chain.tip_hash,
                self.clock(),
                [tx],
                orderer.participant,
                orderer.key,
                self.hash_name,
            )
            self.chain.append_block(block)
            self._post_commit(block)
            return tx_id, block.height

    def submit_many(self, txs: list[Transaction]) -> int:
        """Commit a FIFO batch in one block; returns the block height."""
        if self.chain.height == 0:
            self.ensure_genesis()
        with self._commit_lock:
            fresh = [tx for tx in txs if tx.tx_id(self.hash_name) not in self.chain.tx_index]
            if not fresh:
                return self.chain.height - 1
            orderer = self.orderer_identity()
            block = build_block(
                self.chain.height,
                self.chain.tip_hash,
                self.clock(),
                fresh,
                orderer.participant,
                orderer.key,
                self.hash_name,
            )
            self.chain.append_block(block)
            self._post_commit(block)
            return block.height

    def _post_commit(self, block: Block) -> None:
        # A committed ERASE destroys the payload in the creator ISP's evDB
        # (when that store lives in this node directory).
        for tx in block.tx_list:
            if tx.kind is not TxKind.ERASE:
                continue
            record = tx.proposal
            store = self.store_for(record.creator)
            if store.has(record.id) and not store.is_erased(record.id):
                submitter = self.state.participants.get(tx.submitter)
                if submitter is not None:
                    try:
                        store.erase(record.id, submitter)
                    except ChainError:
                        pass

    # -- evidence stores --------------------------------------------------------

    def store_for(self, creator_address: bytes) -> EvidenceStore:
        store = self._stores.get(creator_address)
        if store is None:
            store = EvidenceStore(
                self.base_dir / "stores" / creator_address.hex(),
                hash_name=self.hash_name,
                payload_cap=int(self.config["payload_cap"]),
                clock=self.clock,
            )
            self._stores[creator_address] = store
        return store

    # -- queries ----------------------------------------------------------------

    def block(self, height: int) -> Block:
        return self.chain.block(height)

    def latest_block(self) -> Block:
        if not self.chain.height:
            raise NotFound("chain is empty")
        return self.chain.block(self.chain.height - 1)

    def transaction(self, tx_id: bytes) -> tuple[Transaction, int]:
        return self.chain.transaction(tx_id)

    def evidence_handle(self, id: bytes) -> EvidenceHandle:
        record = self.state.record(id)
        erased = self.state.is_erased(id)
        return EvidenceHandle(
            record=record,
            erased=erased,
            locator="" if erased else locator_for(record),
        )

    def trail(self, id: bytes):
        return self.chain.custody_trail(id)

    def device_history(self, device_id: str):
        history = self.state.devices.get(device_id)
        if not history:
            raise NotFound(f"device {device_id}")
        return history

    def verify(self) -> VerificationReport:
        return self.chain.verify()
