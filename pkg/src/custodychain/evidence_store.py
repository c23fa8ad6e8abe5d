"""Off-chain evidence database: one per ISP.

Raw payloads are stored in a content directory keyed by hex id, each entry a
payload file plus a human-readable JSON sidecar holding the nonce, creator
signature, digests and timestamps, so the id can be recomputed from store
contents alone. The id of a payload is the configured 256-bit hash of the
signed evidence (payload then creator signature) followed by a fresh random
nonce, which makes ids unique even for identical payloads.

Erasure destroys the payload bytes but leaves a tombstone with the id, the
nonce and the erasure timestamp; the chain is never rewritten.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Callable

from . import encoding
from .config import DEFAULT_PAYLOAD_CAP, NONCE_LEN, digest
from .errors import (
    AlreadyErased,
    Erased,
    IntegrityError,
    InvalidEvidence,
    NotFound,
    PermissionDenied,
)
from .identity import Participant, Role, SigningKey, raw_verify
from .records import Transaction, TxKind, new_evidence_record, sign_transaction

META_NAME = "meta.json"
PAYLOAD_NAME = "payload.bin"


@dataclass(frozen=True)
class Evidence:
    payload: bytes
    nonce: bytes
    creator_signature: bytes
    id: bytes


@dataclass(frozen=True)
class EvidenceLogEvent:
    id: bytes
    creator: bytes
    timestamp: int
    digest: bytes
    signature: bytes

    def signing_bytes(self) -> bytes:
        return encoding.pack_fields(
            encoding.pack_bytes(self.id),
            encoding.pack_bytes(self.creator),
            encoding.pack_u64(self.timestamp),
            encoding.pack_bytes(self.digest),
        )

    def verify(self, creator_public_key: bytes) -> bool:
        return raw_verify(creator_public_key, self.signing_bytes(), self.signature)

    def to_json_dict(self) -> dict:
        return {
            "id": self.id.hex(),
            "creator": self.creator.hex(),
            "timestamp": self.timestamp,
            "digest": self.digest.hex(),
            "signature": encoding.to_b64(self.signature),
        }


@dataclass(frozen=True)
class ErasureReceipt:
    id: bytes
    erased_at: int

    def to_json_dict(self) -> dict:
        return {"id": self.id.hex(), "erased_at": self.erased_at}


def evidence_id(payload: bytes, creator_signature: bytes, nonce: bytes, hash_name: str = "sha256") -> bytes:
    """id = Hash(signed_evidence || nonce), signed_evidence = payload || signature."""
    return digest(hash_name, payload + creator_signature + nonce)


class EvidenceStore:
    """Disk-backed evDB; writes are serialized, reads are concurrent."""

    def __init__(
        self,
        root: Path,
        hash_name: str = "sha256",
        payload_cap: int = DEFAULT_PAYLOAD_CAP,
        nonce_source: Callable[[], bytes] | None = None,
        clock: Callable[[], int] | None = None,
    ) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.hash_name = hash_name
        self.payload_cap = payload_cap
        self.nonce_source = nonce_source or (lambda: os.urandom(NONCE_LEN))
        self.clock = clock or (lambda: int(time.time()))
        self._write_lock = threading.Lock()

    def _entry(self, id: bytes) -> Path:
        return self.root / id.hex()

    def _meta(self, id: bytes) -> dict:
        path = self._entry(id) / META_NAME
        if not path.exists():
            raise NotFound(f"evidence {id.hex()}")
        return json.loads(path.read_text())

    def _write_meta(self, id: bytes, meta: dict) -> None:
        (self._entry(id) / META_NAME).write_text(json.dumps(meta, indent=2) + "\n")

    # -- EvGen / TxGen -------------------------------------------------------

    def ev_gen(
        self,
        creator: Participant,
        key: SigningKey,
        payload: bytes,
        incident: dict | None = None,
        timestamp: int | None = None,
        reuse_existing: bool = False,
    ) -> EvidenceLogEvent:
        """Persist a payload, derive its id and emit the signed log event.

        With `reuse_existing`, hitting an already-stored id (possible only
        with an injected nonce source) returns the persisted event instead of
        failing, making deterministic re-runs idempotent.
        """
        if creator.role is not Role.ISP:
            raise PermissionDenied("only an ISP collects and stores evidence")
        if not payload:
            raise InvalidEvidence("payload must be non-empty")
        if len(payload) > self.payload_cap:
            raise InvalidEvidence(f"payload exceeds the {self.payload_cap}-byte cap")
        if timestamp is None:
            timestamp = self.clock()

        signature = key.sign(payload)
        nonce = self.nonce_source()
        if len(nonce) != NONCE_LEN:
            raise InvalidEvidence(f"nonce must be {NONCE_LEN} bytes")
        id = evidence_id(payload, signature, nonce, self.hash_name)
        payload_digest = digest(self.hash_name, payload)
        if self.has(id):
            if reuse_existing:
                return self.event_for(id)
            raise InvalidEvidence(f"evidence {id.hex()} already stored")

        event = EvidenceLogEvent(
            id=id,
            creator=creator.address,
            timestamp=timestamp,
            digest=payload_digest,
            signature=key.sign(
                EvidenceLogEvent(id, creator.address, timestamp, payload_digest, b"").signing_bytes()
            ),
        )

        with self._write_lock:
            entry = self._entry(id)
            entry.mkdir(parents=True, exist_ok=False)
            (entry / PAYLOAD_NAME).write_bytes(payload)
            self._write_meta(
                id,
                {
                    "id": id.hex(),
                    "nonce": nonce.hex(),
                    "creator": creator.address.hex(),
                    "creator_signature": encoding.to_b64(signature),
                    "payload_digest": payload_digest.hex(),
                    "created_at": timestamp,
                    "hash_name": self.hash_name,
                    "event": event.to_json_dict(),
                    "incident": incident,
                    "erased_at": None,
                },
            )
        return event

    def import_file(
        self,
        creator: Participant,
        key: SigningKey,
        path: Path,
        incident: dict | None = None,
        timestamp: int | None = None,
    ) -> EvidenceLogEvent:
        """Ingest a raw or pcap file as an opaque payload (pcap is not parsed)."""
        path = Path(path)
        if path.stat().st_size > self.payload_cap:
            raise InvalidEvidence(f"payload exceeds the {self.payload_cap}-byte cap")
        return self.ev_gen(creator, key, path.read_bytes(), incident=incident, timestamp=timestamp)

    def tx_gen(
        self,
        event: EvidenceLogEvent,
        creator: Participant,
        key: SigningKey,
        meta: dict | None = None,
        device_type: str = "",
    ) -> Transaction:
        """Turn a verified log event into a signed CreateEvidence proposal."""
        if event.creator != creator.address or not event.verify(creator.public_key):
            raise IntegrityError("evidence log event does not verify against its creator")
        dsc = (meta or {}).get("summary", "")
        record = new_evidence_record(
            id=event.id,
            creator=event.creator,
            dsc=dsc,
            tm=event.timestamp,
            device_type=device_type or (meta or {}).get("device_type", ""),
        )
        return sign_transaction(TxKind.CREATE, record, creator, key)

    # -- retrieval / erasure ---------------------------------------------------

    def has(self, id: bytes) -> bool:
        return (self._entry(id) / META_NAME).exists()

    def is_erased(self, id: bytes) -> bool:
        return self._meta(id)["erased_at"] is not None

    def fetch(self, id: bytes) -> Evidence:
        """Return payload, nonce and signature; the recomputed id must match."""
        meta = self._meta(id)
        if meta["erased_at"] is not None:
            raise Erased(f"evidence {id.hex()} was erased at {meta['erased_at']}")
        payload = (self._entry(id) / PAYLOAD_NAME).read_bytes()
        nonce = bytes.fromhex(meta["nonce"])
        signature = encoding.from_b64(meta["creator_signature"])
        recomputed = evidence_id(payload, signature, nonce, self.hash_name)
        if recomputed != id:
            raise IntegrityError(f"stored payload for {id.hex()} no longer matches its id")
        return Evidence(payload=payload, nonce=nonce, creator_signature=signature, id=id)

    def open_payload(self, id: bytes) -> tuple[BinaryIO, dict]:
        """Streaming payload handle plus the sidecar metadata."""
        meta = self._meta(id)
        if meta["erased_at"] is not None:
            raise Erased(f"evidence {id.hex()} was erased at {meta['erased_at']}")
        return (self._entry(id) / PAYLOAD_NAME).open("rb"), meta

    def event_for(self, id: bytes) -> EvidenceLogEvent:
        meta = self._meta(id)
        ev = meta["event"]
        return EvidenceLogEvent(
            id=bytes.fromhex(ev["id"]),
            creator=bytes.fromhex(ev["creator"]),
            timestamp=ev["timestamp"],
            digest=bytes.fromhex(ev["digest"]),
            signature=encoding.from_b64(ev["signature"]),
        )

    def erase(self, id: bytes, caller: Participant) -> ErasureReceipt:
        """Destroy the payload; keep a tombstone with id, nonce and timestamp.

        Only the ISP that created the entry may erase, regardless of who
        currently owns the evidence on chain.
        """
        with self._write_lock:
            meta = self._meta(id)
            if caller.role is not Role.ISP or meta["creator"] != caller.address.hex():
                raise PermissionDenied("only the creating ISP may erase stored evidence")
            if meta["erased_at"] is not None:
                raise AlreadyErased(f"evidence {id.hex()}")
            erased_at = self.clock()
            payload_path = self._entry(id) / PAYLOAD_NAME
            if payload_path.exists():
                payload_path.unlink()
            meta["erased_at"] = erased_at
            self._write_meta(id, meta)
        return ErasureReceipt(id=id, erased_at=erased_at)

    def list_ids(self) -> list[bytes]:
        return sorted(bytes.fromhex(p.name) for p in self.root.iterdir() if (p / META_NAME).exists())
