"""On-chain transaction payloads and their canonical encodings.

An evidence record carries the full metadata tuple for one piece of
evidence: identifier, creating ISP, incident description and time, current
and previous owner, attacked device type, and the list of custody intervals.
Device records carry firmware/configuration digests. The genesis payload
anchors the CA root key, the participant roster, the ordering node and the
chain configuration; membership is fixed at genesis.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

from . import encoding
from .config import ADDRESS_LEN, DIGEST_LEN, ChainConfig, digest
from .errors import IntegrityError
from .identity import Certificate, Participant, SigningKey


class TxKind(enum.Enum):
    GENESIS = "GENESIS"
    CREATE = "CREATE"
    TRANSFER = "TRANSFER"
    ERASE = "ERASE"
    ACCESS = "ACCESS"
    DEVICE_REGISTER = "DEVICE_REGISTER"
    DEVICE_VERIFY = "DEVICE_VERIFY"


EVIDENCE_KINDS = (TxKind.CREATE, TxKind.TRANSFER, TxKind.ERASE, TxKind.ACCESS)
DEVICE_KINDS = (TxKind.DEVICE_REGISTER, TxKind.DEVICE_VERIFY)


@dataclass(frozen=True)
class CustodyInterval:
    """Possession interval; `end` is None while the interval is open."""

    owner: bytes
    start: int
    end: int | None = None

    def to_bytes(self) -> bytes:
        return encoding.pack_fields(
            encoding.pack_bytes(self.owner),
            encoding.pack_u64(self.start),
            encoding.pack_u64(0 if self.end is None else 1),
            encoding.pack_u64(self.end or 0),
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "CustodyInterval":
        r = encoding.Reader(data)
        owner = r.bytes()
        start = r.u64()
        closed = r.u64()
        end = r.u64()
        r.expect_end()
        return cls(owner=owner, start=start, end=end if closed else None)

    def to_json_dict(self) -> dict:
        return {
            "owner": self.owner.hex(),
            "start": self.start,
            "end": self.end,
            "open": self.end is None,
        }


@dataclass(frozen=True)
class EvidenceRecord:
    id: bytes
    creator: bytes
    dsc: str
    tm: int
    own: bytes
    own_prev: bytes
    device_type: str
    custody_times: tuple[CustodyInterval, ...] = ()

    def to_bytes(self) -> bytes:
        return encoding.pack_fields(
            encoding.pack_bytes(self.id),
            encoding.pack_bytes(self.creator),
            encoding.pack_str(self.dsc),
            encoding.pack_u64(self.tm),
            encoding.pack_bytes(self.own),
            encoding.pack_bytes(self.own_prev),
            encoding.pack_str(self.device_type),
            encoding.pack_list([c.to_bytes() for c in self.custody_times]),
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "EvidenceRecord":
        r = encoding.Reader(data)
        rec = cls(
            id=r.bytes(),
            creator=r.bytes(),
            dsc=r.str(),
            tm=r.u64(),
            own=r.bytes(),
            own_prev=r.bytes(),
            device_type=r.str(),
            custody_times=tuple(CustodyInterval.from_bytes(c) for c in r.list()),
        )
        r.expect_end()
        return rec

    def open_interval(self) -> CustodyInterval | None:
        for c in self.custody_times:
            if c.end is None:
                return c
        return None

    def to_json_dict(self) -> dict:
        return {
            "id": self.id.hex(),
            "creator": self.creator.hex(),
            "dsc": self.dsc,
            "tm": self.tm,
            "own": self.own.hex(),
            "own_prev": self.own_prev.hex(),
            "device_type": self.device_type,
            "custody_times": [c.to_json_dict() for c in self.custody_times],
        }


@dataclass(frozen=True)
class DeviceRecord:
    device_id: str
    firmware_hash: bytes
    config_hash: bytes
    registered_at: int
    registrar: bytes

    def to_bytes(self) -> bytes:
        return encoding.pack_fields(
            encoding.pack_str(self.device_id),
            encoding.pack_bytes(self.firmware_hash),
            encoding.pack_bytes(self.config_hash),
            encoding.pack_u64(self.registered_at),
            encoding.pack_bytes(self.registrar),
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "DeviceRecord":
        r = encoding.Reader(data)
        rec = cls(
            device_id=r.str(),
            firmware_hash=r.bytes(),
            config_hash=r.bytes(),
            registered_at=r.u64(),
            registrar=r.bytes(),
        )
        r.expect_end()
        return rec

    def to_json_dict(self) -> dict:
        return {
            "device_id": self.device_id,
            "firmware_hash": self.firmware_hash.hex(),
            "config_hash": self.config_hash.hex(),
            "registered_at": self.registered_at,
            "registrar": self.registrar.hex(),
        }


@dataclass(frozen=True)
class GenesisPayload:
    """Membership anchor: CA root key, roster, ordering node and chain config."""

    ca_root_public_key: bytes
    orderer_address: bytes
    chain_config: ChainConfig
    roster: tuple[Certificate, ...]

    def to_bytes(self) -> bytes:
        return encoding.pack_fields(
            encoding.pack_bytes(self.ca_root_public_key),
            encoding.pack_bytes(self.orderer_address),
            encoding.pack_bytes(self.chain_config.to_bytes()),
            encoding.pack_list([c.to_bytes() for c in self.roster]),
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "GenesisPayload":
        r = encoding.Reader(data)
        payload = cls(
            ca_root_public_key=r.bytes(),
            orderer_address=r.bytes(),
            chain_config=ChainConfig.from_bytes(r.bytes()),
            roster=tuple(Certificate.from_bytes(c) for c in r.list()),
        )
        r.expect_end()
        return payload

    def to_json_dict(self) -> dict:
        return {
            "ca_root_public_key": self.ca_root_public_key.hex(),
            "orderer_address": self.orderer_address.hex(),
            "chain_config": self.chain_config.to_json_dict(),
            "roster": [
                {
                    "address": c.subject_address.hex(),
                    "role": c.subject_role.value,
                    "expires_at": c.expires_at,
                }
                for c in self.roster
            ],
        }


Proposal = EvidenceRecord | DeviceRecord | GenesisPayload


def _proposal_from_bytes(kind: TxKind, data: bytes) -> Proposal:
    if kind is TxKind.GENESIS:
        return GenesisPayload.from_bytes(data)
    if kind in DEVICE_KINDS:
        return DeviceRecord.from_bytes(data)
    return EvidenceRecord.from_bytes(data)


@dataclass(frozen=True)
class Transaction:
    kind: TxKind
    proposal: Proposal
    submitter: bytes
    submitter_signature: bytes

    def signing_bytes(self) -> bytes:
        # Kind is part of the signed message so an ACCESS proposal cannot be
        # replayed as an ERASE (both carry evidence-record proposals).
        return encoding.pack_fields(
            encoding.pack_str(self.kind.value),
            encoding.pack_bytes(self.proposal.to_bytes()),
        )

    def to_bytes(self) -> bytes:
        return encoding.pack_fields(
            encoding.pack_str(self.kind.value),
            encoding.pack_bytes(self.proposal.to_bytes()),
            encoding.pack_bytes(self.submitter),
            encoding.pack_bytes(self.submitter_signature),
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "Transaction":
        r = encoding.Reader(data)
        kind = TxKind(r.str())
        proposal = _proposal_from_bytes(kind, r.bytes())
        tx = cls(
            kind=kind,
            proposal=proposal,
            submitter=r.bytes(),
            submitter_signature=r.bytes(),
        )
        r.expect_end()
        return tx

    def tx_id(self, hash_name: str = "sha256") -> bytes:
        return digest(hash_name, self.to_bytes())

    def to_json_dict(self, hash_name: str = "sha256") -> dict:
        return {
            "tx_id": self.tx_id(hash_name).hex(),
            "kind": self.kind.value,
            "submitter": self.submitter.hex(),
            "submitter_signature": encoding.to_b64(self.submitter_signature),
            "proposal": self.proposal.to_json_dict(),
        }


def sign_transaction(kind: TxKind, proposal: Proposal, submitter: Participant, key: SigningKey) -> Transaction:
    unsigned = Transaction(kind=kind, proposal=proposal, submitter=submitter.address, submitter_signature=b"")
    return replace(unsigned, submitter_signature=key.sign(unsigned.signing_bytes()))


def new_evidence_record(id: bytes, creator: bytes, dsc: str, tm: int, device_type: str) -> EvidenceRecord:
    """Proposal-side record for CreateEvidence: the creator is both the first
    owner and the previous owner; custody intervals are materialized on chain
    from block time."""
    if len(id) != DIGEST_LEN:
        raise IntegrityError(f"evidence id must be {DIGEST_LEN} bytes")
    if len(creator) != ADDRESS_LEN:
        raise IntegrityError(f"creator address must be {ADDRESS_LEN} bytes")
    return EvidenceRecord(
        id=id,
        creator=creator,
        dsc=dsc,
        tm=tm,
        own=creator,
        own_prev=creator,
        device_type=device_type,
        custody_times=(),
    )
