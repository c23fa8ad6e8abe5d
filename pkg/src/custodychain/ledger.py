"""Blocks, the hash chain, durable block storage and world-state replay.

Blocks are persisted as one append-only file of length-prefixed canonical
records (4-byte big-endian length per record) plus a height-to-offset index.
Verification always re-reads the record file sequentially and re-derives
every digest, so any single-bit mutation of a persisted block is detected at
or before that block's height; the index is a derived artifact and is
rebuilt when inconsistent.

Single writer (the commit path), many readers; world-state snapshots are
immutable values.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import chaincode, encoding, merkle
from .chaincode import WorldState
from .config import ZERO_DIGEST, digest
from .errors import BlockRejected, ChainError, NotFound, RejectReason, ReplayError
from .identity import Participant, SigningKey, raw_verify, verify as cert_verify
from .records import CustodyInterval, GenesisPayload, Transaction, TxKind

_RECLEN = struct.Struct(">I")
_OFFSET = struct.Struct(">Q")


@dataclass(frozen=True)
class Block:
    height: int
    prev_hash: bytes
    timestamp: int
    tx_list: tuple[Transaction, ...]
    tx_merkle_root: bytes
    proposer: bytes
    proposer_signature: bytes

    def header_bytes(self) -> bytes:
        return encoding.pack_fields(
            encoding.pack_u64(self.height),
            encoding.pack_bytes(self.prev_hash),
            encoding.pack_u64(self.timestamp),
            encoding.pack_bytes(self.tx_merkle_root),
            encoding.pack_bytes(self.proposer),
        )

    def block_hash(self, hash_name: str = "sha256") -> bytes:
        return digest(hash_name, self.header_bytes())

    def to_bytes(self) -> bytes:
        return self.header_bytes() + encoding.pack_fields(
            encoding.pack_bytes(self.proposer_signature),
            encoding.pack_list([tx.to_bytes() for tx in self.tx_list]),
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "Block":
        r = encoding.Reader(data)
        block = cls(
            height=r.u64(),
            prev_hash=r.bytes(),
            timestamp=r.u64(),
            tx_merkle_root=r.bytes(),
            proposer=r.bytes(),
            proposer_signature=r.bytes(),
            tx_list=tuple(Transaction.from_bytes(t) for t in r.list()),
        )
        r.expect_end()
        return block

    def tx_ids(self, hash_name: str = "sha256") -> list[bytes]:
        return [tx.tx_id(hash_name) for tx in self.tx_list]

    def to_json_dict(self, hash_name: str = "sha256") -> dict:
        return {
            "height": self.height,
            "block_hash": self.block_hash(hash_name).hex(),
            "prev_hash": self.prev_hash.hex(),
            "timestamp": self.timestamp,
            "tx_merkle_root": self.tx_merkle_root.hex(),
            "proposer": self.proposer.hex(),
            "proposer_signature": encoding.to_b64(self.proposer_signature),
            "tx_list": [tx.to_json_dict(hash_name) for tx in self.tx_list],
        }


def build_block(
    height: int,
    prev_hash: bytes,
    timestamp: int,
    txs: list[Transaction],
    proposer: Participant,
    key: SigningKey,
    hash_name: str = "sha256",
) -> Block:
    root = merkle.merkle_root([tx.tx_id(hash_name) for tx in txs], hash_name)
    unsigned = Block(
        height=height,
        prev_hash=prev_hash,
        timestamp=timestamp,
        tx_list=tuple(txs),
        tx_merkle_root=root,
        proposer=proposer.address,
        proposer_signature=b"",
    )
    return replace(unsigned, proposer_signature=key.sign(unsigned.header_bytes()))


class MemoryBlockStore:
    """In-memory store of raw block records (used by the network simulator)."""

    def __init__(self) -> None:
        self._records: list[bytes] = []

    def __len__(self) -> int:
        return len(self._records)

    def append(self, raw: bytes) -> None:
        self._records.append(raw)

    def get(self, height: int) -> bytes:
        return self._records[height]

    def iter_raw(self):
        yield from self._records

    def tamper(self, height: int, byte_index: int, bit: int = 0) -> None:
        raw = bytearray(self._records[height])
        raw[byte_index % len(raw)] ^= 1 << (bit % 8)
        self._records[height] = bytes(raw)


class FileBlockStore:
    """Append-only block file plus height->offset index.

    blocks.dat: 4-byte big-endian record length, then the canonical block.
    blocks.idx: one 8-byte big-endian file offset per height.
    """

    def __init__(self, root: Path) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.dat = self.root / "blocks.dat"
        self.idx = self.root / "blocks.idx"
        if not self.dat.exists():
            self.dat.write_bytes(b"")
        self._offsets = self._load_or_rebuild_index()

    def _scan_offsets(self) -> list[int]:
        offsets = []
        data = self.dat.read_bytes()
        pos = 0
        while pos + 4 <= len(data):
            (n,) = _RECLEN.unpack_from(data, pos)
            if pos + 4 + n > len(data):
                break
            offsets.append(pos)
            pos += 4 + n
        return offsets

    def _load_or_rebuild_index(self) -> list[int]:
        scanned = self._scan_offsets()
        if self.idx.exists():
            raw = self.idx.read_bytes()
            stored = [
                _OFFSET.unpack_from(raw, i)[0] for i in range(0, len(raw) - len(raw) % 8, 8)
            ]
            if stored == scanned:
                return stored
        self.idx.write_bytes(b"".join(_OFFSET.pack(o) for o in scanned))
        return scanned

    def __len__(self) -> int:
        return len(self._offsets)

    def append(self, raw: bytes) -> None:
        with self.dat.open("ab") as f:
            offset = f.tell()
            f.write(_RECLEN.pack(len(raw)) + raw)
        with self.idx.open("ab") as f:
            f.write(_OFFSET.pack(offset))
        self._offsets.append(offset)

    def get(self, height: int) -> bytes:
        with self.dat.open("rb") as f:
            f.seek(self._offsets[height])
            (n,) = _RECLEN.unpack(f.read(4))
            return f.read(n)

    def iter_raw(self):
        """Sequential scan of the record file; never trusts the index."""
        with self.dat.open("rb") as f:
            while True:
                head = f.read(4)
                if not head:
                    return
                if len(head) < 4:
                    raise ChainError("truncated record length")
                (n,) = _RECLEN.unpack(head)
                raw = f.read(n)
                if len(raw) < n:
                    raise ChainError("truncated block record")
                yield raw


@dataclass
class BlockCheck:
    height: int
    valid: bool
    reasons: list[str] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {"height": self.height, "valid": self.valid, "reasons": self.reasons}


@dataclass
class VerificationReport:
    valid: bool
    height: int
    blocks: list[BlockCheck]

    @property
    def first_invalid_height(self) -> int | None:
        for b in self.blocks:
            if not b.valid:
                return b.height
        return None

    def to_json_dict(self) -> dict:
        return {
            "valid": self.valid,
            "height": self.height,
            "first_invalid_height": self.first_invalid_height,
            "blocks": [b.to_json_dict() for b in self.blocks],
        }


class Chain:
    """Hash chain over a block store, with an incrementally maintained
    world-state snapshot and a tx-id index."""

    def __init__(self, store, hash_name: str = "sha256") -> None:
        self.store = store
        self.hash_name = hash_name
        self.state = WorldState()
        self.blocks: list[Block] = []
        self.tx_index: dict[bytes, tuple[int, int]] = {}
        self._load()

    def _load(self) -> None:
        for raw in self.store.iter_raw():
            block = Block.from_bytes(raw)
            self._validate(block)
            self._absorb(block)

    @property
    def height(self) -> int:
        return len(self.blocks)

    @property
    def tip_hash(self) -> bytes:
        return self.blocks[-1].block_hash(self.hash_name) if self.blocks else ZERO_DIGEST

    def block(self, height: int) -> Block:
        if not 0 <= height < len(self.blocks):
            raise NotFound(f"block {height}")
        return self.blocks[height]

    def transaction(self, tx_id: bytes) -> tuple[Transaction, int]:
        loc = self.tx_index.get(tx_id)
        if loc is None:
            raise NotFound(f"tx {tx_id.hex()}")
        height, i = loc
        return self.blocks[height].tx_list[i], height

    # -- validation ---------------------------------------------------------

    def _validate(self, block: Block, state: WorldState | None = None) -> WorldState:
        """Full validation against the current tip; returns the advanced state."""
        state = state if state is not None else self.state
        if block.height != self.height:
            raise BlockRejected(RejectReason.HEIGHT, f"expected {self.height}, got {block.height}")
        expected_prev = self.tip_hash
        if block.prev_hash != expected_prev:
            raise BlockRejected(RejectReason.LINKAGE, f"prev_hash mismatch at height {block.height}")
        if not block.tx_list:
            raise BlockRejected(RejectReason.SEMANTICS, "empty blocks are not produced")
        root = merkle.merkle_root(block.tx_ids(self.hash_name), self.hash_name)
        if root != block.tx_merkle_root:
            raise BlockRejected(RejectReason.MERKLE, f"merkle root mismatch at height {block.height}")

        if block.height == 0:
            state = self._validate_genesis(block, state)
        else:
            self._check_proposer(block, state)
        for i, tx in enumerate(block.tx_list):
            if block.height == 0 and i == 0:
                continue
            tx_id = tx.tx_id(self.hash_name)
            if tx_id in self.tx_index:
                raise BlockRejected(RejectReason.SEMANTICS, f"duplicate tx {tx_id.hex()}")
            self._check_tx_signature(block, tx, state)
            try:
                state = chaincode.apply_tx(state, tx, block.timestamp)
            except ChainError as exc:
                raise BlockRejected(RejectReason.SEMANTICS, f"tx {i}: {exc.code}: {exc}") from exc
        return state

    def _validate_genesis(self, block: Block, state: WorldState) -> WorldState:
        genesis_tx = block.tx_list[0]
        if genesis_tx.kind is not TxKind.GENESIS or len(block.tx_list) != 1:
            raise BlockRejected(RejectReason.SEMANTICS, "genesis block must hold exactly one genesis tx")
        payload = genesis_tx.proposal
        if not isinstance(payload, GenesisPayload):
            raise BlockRejected(RejectReason.SEMANTICS, "genesis tx lacks a genesis payload")
        if payload.chain_config.hash_name != self.hash_name:
            raise BlockRejected(
                RejectReason.ENCODING,
                f"chain uses {payload.chain_config.hash_name}, node configured for {self.hash_name}",
            )
        from .identity import address_from_public_key

        expected_submitter = address_from_public_key(payload.ca_root_public_key, self.hash_name)
        if genesis_tx.submitter != expected_submitter:
            raise BlockRejected(RejectReason.SIGNATURE, "genesis tx must be submitted by the CA root")
        if not raw_verify(payload.ca_root_public_key, genesis_tx.signing_bytes(), genesis_tx.submitter_signature):
            raise BlockRejected(RejectReason.SIGNATURE, "genesis tx signature invalid")
        try:
            state = chaincode.apply_genesis(state, genesis_tx)
        except ChainError as exc:
            raise BlockRejected(RejectReason.SEMANTICS, str(exc)) from exc
        self._check_proposer(block, state)
        return state

    def _check_proposer(self, block: Block, state: WorldState) -> None:
        if block.proposer != state.orderer:
            raise BlockRejected(RejectReason.PROPOSER, "block proposer is not the configured orderer")
        orderer = state.participants.get(state.orderer)
        if orderer is None:
            raise BlockRejected(RejectReason.PROPOSER, "orderer missing from roster")
        if not cert_verify(
            orderer.cert,
            block.header_bytes(),
            block.proposer_signature,
            state.ca_root_public_key,
            at_time=block.timestamp,
        ):
            raise BlockRejected(RejectReason.SIGNATURE, f"proposer signature invalid at height {block.height}")

    def _check_tx_signature(self, block: Block, tx: Transaction, state: WorldState) -> None:
        submitter = state.participants.get(tx.submitter)
        if submitter is None:
            raise BlockRejected(RejectReason.SIGNATURE, f"unknown submitter {tx.submitter.hex()}")
        if not cert_verify(
            submitter.cert,
            tx.signing_bytes(),
            tx.submitter_signature,
            state.ca_root_public_key,
            at_time=block.timestamp,
        ):
            raise BlockRejected(RejectReason.SIGNATURE, "tx submitter signature invalid")

    def _absorb(self, block: Block) -> None:
        state = self.state
        if block.height == 0:
            state = chaincode.apply_genesis(state, block.tx_list[0])
        for i, tx in enumerate(block.tx_list):
            if block.height == 0 and i == 0:
                continue
            state = chaincode.apply_tx(state, tx, block.timestamp)
        for i, tx in enumerate(block.tx_list):
            self.tx_index[tx.tx_id(self.hash_name)] = (block.height, i)
        self.blocks.append(block)
        self.state = state

    # -- public operations ---------------------------------------------------

    def append_block(self, block: Block) -> None:
        """Validate and persist; on any failure the chain is unchanged."""
        self._validate(block)
        self.store.append(block.to_bytes())
        self._absorb(block)

    def custody_trail(self, id: bytes) -> list[CustodyInterval]:
        record = self.state.record(id)
        return list(record.custody_times)

    def verify(self) -> VerificationReport:
        """Re-read persisted bytes and re-derive every digest and signature."""
        return verify_store(self.store, self.hash_name)


def verify_store(store, hash_name: str = "sha256") -> VerificationReport:
    """Verify a block store from its raw records without requiring it to load.

    Each block is checked for framing, height, linkage, merkle root,
    proposer and submitter signatures, and chaincode semantics; the scan
    stops at the first invalid block.
    """
    checks: list[BlockCheck] = []
    shadow = Chain(MemoryBlockStore(), hash_name)
    height = 0
    try:
        for raw in store.iter_raw():
            check = BlockCheck(height=height, valid=True)
            try:
                block = Block.from_bytes(raw)
                shadow._validate(block)
                shadow.store.append(raw)
                shadow._absorb(block)
            except BlockRejected as exc:
                check.valid = False
                check.reasons.append(str(exc))
            except (encoding.DecodeError, ChainError, ValueError) as exc:
                check.valid = False
                check.reasons.append(f"{RejectReason.ENCODING}: {exc}")
            checks.append(check)
            if not check.valid:
                break
            height += 1
    except ChainError as exc:
        checks.append(BlockCheck(height=height, valid=False, reasons=[f"{RejectReason.ENCODING}: {exc}"]))
    valid = all(c.valid for c in checks)
    return VerificationReport(valid=valid, height=height, blocks=checks)


def replay(store, hash_name: str = "sha256") -> WorldState:
    """Deterministic world state from raw blocks; equal input, bit-identical output."""
    shadow = Chain(MemoryBlockStore(), hash_name)
    height = 0
    try:
        for raw in store.iter_raw():
            block = Block.from_bytes(raw)
            shadow._validate(block)
            shadow.store.append(raw)
            shadow._absorb(block)
            height += 1
    except ChainError as exc:
        raise ReplayError(height, str(exc)) from exc
    except encoding.DecodeError as exc:
        raise ReplayError(height, str(exc)) from exc
    return shadow.state
