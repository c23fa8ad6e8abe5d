"""Deterministic ledger business logic and the role permission matrix.

Rules enforced here: only ISPs create evidence and register device states;
only the creating ISP erases, regardless of current owner; only the current
owner reads or transfers; evidence moves only to LEA or prosecutor hands;
the prosecutor is a terminal owner unless explicitly configured otherwise.
Erasure tombstones the record: metadata and custody history stay queryable,
the chain is never rewritten.

Everything operates on immutable WorldState snapshots; `apply_tx` is a pure
function of (state, transaction, block time) and is evaluated serially in
the commit path.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

from .config import ADDRESS_LEN, DIGEST_LEN, MAX_DSC_LEN, ChainConfig
from .errors import (
    AlreadyErased,
    AlreadyExists,
    ChainError,
    Erased,
    IntegrityError,
    InvalidTransfer,
    NotAuthorized,
    NotFound,
    PermissionDenied,
    TerminalOwner,
    UnknownParticipant,
)
from .identity import Participant, Role, SigningKey
from .records import (
    CustodyInterval,
    DeviceRecord,
    EvidenceRecord,
    GenesisPayload,
    Transaction,
    TxKind,
    new_evidence_record,
    sign_transaction,
)

HOLDER_ROLES = (Role.LEA, Role.PROSECUTOR)


class VerificationResult(enum.Enum):
    CURRENT = "CURRENT"
    HISTORICAL = "HISTORICAL"
    UNKNOWN = "UNKNOWN"


@dataclass(frozen=True)
class WorldState:
    """Materialized view of the chain; a pure fold of apply_tx over blocks."""

    participants: dict[bytes, Participant] = field(default_factory=dict)
    orderer: bytes = b""
    ca_root_public_key: bytes = b""
    config: ChainConfig = field(default_factory=ChainConfig)
    evidence: dict[bytes, EvidenceRecord] = field(default_factory=dict)
    erased: frozenset[bytes] = frozenset()
    devices: dict[str, tuple[DeviceRecord, ...]] = field(default_factory=dict)

    def participant(self, address: bytes) -> Participant:
        try:
            return self.participants[address]
        except KeyError:
            raise UnknownParticipant(address.hex()) from None

    def record(self, id: bytes) -> EvidenceRecord:
        try:
            return self.evidence[id]
        except KeyError:
            raise NotFound(f"evidence {id.hex()}") from None

    def is_erased(self, id: bytes) -> bool:
        return id in self.erased


@dataclass(frozen=True)
class EvidenceHandle:
    """Metadata plus the locator of the creating ISP's off-chain store."""

    record: EvidenceRecord
    erased: bool
    locator: str

    def to_json_dict(self) -> dict:
        return {
            "record": self.record.to_json_dict(),
            "erased": self.erased,
            "locator": self.locator,
        }


def locator_for(record: EvidenceRecord) -> str:
    return f"evdb://{record.creator.hex()}"


class PermissionMatrix:
    """Role/operation/ownership-relation permission rules.

    `decide` returns None when allowed, otherwise the denial error class.
    `is_creator` and `is_owner` describe the caller's relation to the record
    being operated on (both False for record-free operations).
    """

    def __init__(self, config: ChainConfig) -> None:
        self.config = config

    def decide(
        self,
        role: Role,
        op: TxKind,
        is_creator: bool = False,
        is_owner: bool = False,
    ) -> type[ChainError] | None:
        if op is TxKind.CREATE:
            return None if role is Role.ISP else PermissionDenied
        if op is TxKind.ERASE:
            return None if (role is Role.ISP and is_creator) else PermissionDenied
        if op is TxKind.TRANSFER:
            if not is_owner:
                return PermissionDenied
            if role is Role.PROSECUTOR and not self.config.allow_prosecutor_transfer:
                return TerminalOwner
            return None
        if op is TxKind.ACCESS:
            return None if is_owner else PermissionDenied
        if op is TxKind.DEVICE_REGISTER:
            return None if role is Role.ISP else PermissionDenied
        if op is TxKind.DEVICE_VERIFY:
            return None
        return PermissionDenied

    def require(self, role: Role, op: TxKind, is_creator: bool = False, is_owner: bool = False) -> None:
        denial = self.decide(role, op, is_creator=is_creator, is_owner=is_owner)
        if denial is not None:
            raise denial(f"{role.value} may not {op.value} (creator={is_creator}, owner={is_owner})")


def _current_owner(record: EvidenceRecord) -> bytes:
    return record.own


def _check_create(state: WorldState, tx: Transaction) -> None:
    rec = tx.proposal
    assert isinstance(rec, EvidenceRecord)
    submitter = state.participant(tx.submitter)
    PermissionMatrix(state.config).require(submitter.role, TxKind.CREATE)
    if rec.id in state.evidence or rec.id in state.erased:
        raise AlreadyExists(f"evidence {rec.id.hex()}")
    if len(rec.id) != DIGEST_LEN:
        raise IntegrityError("evidence id must be a 32-byte digest")
    if rec.creator != tx.submitter or rec.own != tx.submitter or rec.own_prev != tx.submitter:
        raise IntegrityError("create proposal must name the submitter as creator and first owner")
    if rec.custody_times:
        raise IntegrityError("custody intervals are materialized on chain, not proposed")
    if len(rec.dsc.encode("utf-8")) > MAX_DSC_LEN:
        raise IntegrityError("dsc exceeds 4 KiB")


def _apply_create(state: WorldState, tx: Transaction, block_time: int) -> WorldState:
    rec = tx.proposal
    assert isinstance(rec, EvidenceRecord)
    stored = replace(rec, custody_times=(CustodyInterval(owner=rec.creator, start=block_time),))
    evidence = dict(state.evidence)
    evidence[rec.id] = stored
    return replace(state, evidence=evidence)


def _check_transfer(state: WorldState, tx: Transaction) -> EvidenceRecord:
    rec = tx.proposal
    assert isinstance(rec, EvidenceRecord)
    if state.is_erased(rec.id):
        raise Erased(f"evidence {rec.id.hex()}")
    current = state.evidence.get(rec.id)
    if current is None:
        raise NotFound(f"evidence {rec.id.hex()}")
    submitter = state.participant(tx.submitter)
    matrix = PermissionMatrix(state.config)
    matrix.require(
        submitter.role,
        TxKind.TRANSFER,
        is_creator=current.creator == tx.submitter,
        is_owner=_current_owner(current) == tx.submitter,
    )
    new_owner = rec.own
    if new_owner == tx.submitter:
        raise InvalidTransfer("cannot transfer evidence to oneself")
    if new_owner not in state.participants:
        raise UnknownParticipant(new_owner.hex())
    if state.participants[new_owner].role not in HOLDER_ROLES:
        raise NotAuthorized(f"{state.participants[new_owner].role.value} may not receive evidence")
    if rec.own_prev != tx.submitter:
        raise IntegrityError("transfer proposal must name the submitter as previous owner")
    if rec.creator != current.creator or rec.tm != current.tm or rec.device_type != current.device_type:
        raise IntegrityError("transfer proposal must not alter creator, tm or device_type")
    # The proposal carries the client's view of the custody intervals; a
    # mismatch means it was built against outdated state (and it is what
    # makes a legitimate repeat transfer byte-distinct from a replay).
    if rec.custody_times != current.custody_times:
        raise IntegrityError("stale transfer proposal: custody view is outdated")
    if rec.dsc != current.dsc:
        amended = current.dsc + "\n" + rec.dsc if current.dsc else rec.dsc
        if len(amended.encode("utf-8")) > MAX_DSC_LEN:
            raise IntegrityError("dsc amendment exceeds 4 KiB")
    return current


def _apply_transfer(state: WorldState, tx: Transaction, block_time: int) -> WorldState:
    rec = tx.proposal
    assert isinstance(rec, EvidenceRecord)
    current = state.evidence[rec.id]
    closed = tuple(
        replace(c, end=block_time) if c.end is None else c for c in current.custody_times
    )
    # dsc amendments append; the original text is never overwritten.
    if rec.dsc != current.dsc:
        dsc = current.dsc + "\n" + rec.dsc if current.dsc else rec.dsc
    else:
        dsc = current.dsc
    updated = replace(
        current,
        dsc=dsc,
        own=rec.own,
        own_prev=tx.submitter,
        custody_times=closed + (CustodyInterval(owner=rec.own, start=block_time),),
    )
    evidence = dict(state.evidence)
    evidence[rec.id] = updated
    return replace(state, evidence=evidence)


def _check_erase(state: WorldState, tx: Transaction) -> None:
    rec = tx.proposal
    assert isinstance(rec, EvidenceRecord)
    if rec.id in state.erased:
        raise AlreadyErased(f"evidence {rec.id.hex()}")
    current = state.evidence.get(rec.id)
    if current is None:
        raise NotFound(f"evidence {rec.id.hex()}")
    if rec.custody_times != current.custody_times:
        raise IntegrityError("stale erase proposal: custody view is outdated")
    submitter = state.participant(tx.submitter)
    PermissionMatrix(state.config).require(
        submitter.role,
        TxKind.ERASE,
        is_creator=current.creator == tx.submitter,
        is_owner=_current_owner(current) == tx.submitter,
    )


def _apply_erase(state: WorldState, tx: Transaction, block_time: int) -> WorldState:
    rec = tx.proposal
    assert isinstance(rec, EvidenceRecord)
    current = state.evidence[rec.id]
    closed = tuple(
        replace(c, end=block_time) if c.end is None else c for c in current.custody_times
    )
    evidence = dict(state.evidence)
    evidence[rec.id] = replace(current, custody_times=closed)
    return replace(state, evidence=evidence, erased=state.erased | {rec.id})


def _check_access(state: WorldState, tx: Transaction) -> None:
    rec = tx.proposal
    assert isinstance(rec, EvidenceRecord)
    if rec.id in state.erased:
        raise Erased(f"evidence {rec.id.hex()}")
    current = state.evidence.get(rec.id)
    if current is None:
        raise NotFound(f"evidence {rec.id.hex()}")
    submitter = state.participant(tx.submitter)
    PermissionMatrix(state.config).require(
        submitter.role,
        TxKind.ACCESS,
        is_creator=current.creator == tx.submitter,
        is_owner=_current_owner(current) == tx.submitter,
    )


def _check_device_register(state: WorldState, tx: Transaction) -> None:
    rec = tx.proposal
    assert isinstance(rec, DeviceRecord)
    submitter = state.participant(tx.submitter)
    PermissionMatrix(state.config).require(submitter.role, TxKind.DEVICE_REGISTER)
    if len(rec.firmware_hash) != DIGEST_LEN or len(rec.config_hash) != DIGEST_LEN:
        raise IntegrityError("device state hashes must be 32-byte digests")
    if not rec.device_id:
        raise IntegrityError("device_id must be non-empty")
    if rec.registrar != tx.submitter:
        raise IntegrityError("device registration must name the submitter as registrar")


def _apply_device_register(state: WorldState, tx: Transaction, block_time: int) -> WorldState:
    rec = tx.proposal
    assert isinstance(rec, DeviceRecord)
    stored = replace(rec, registered_at=block_time)
    devices = dict(state.devices)
    devices[rec.device_id] = devices.get(rec.device_id, ()) + (stored,)
    return replace(state, devices=devices)


def _check_device_verify(state: WorldState, tx: Transaction) -> None:
    rec = tx.proposal
    assert isinstance(rec, DeviceRecord)
    state.participant(tx.submitter)
    if rec.device_id not in state.devices:
        raise NotFound(f"device {rec.device_id}")


def check_tx(state: WorldState, tx: Transaction) -> None:
    """Semantic validation of a proposal against a state snapshot.

    Raises a typed ChainError; signature checks live in the ledger layer.
    """
    if tx.kind is TxKind.GENESIS:
        raise IntegrityError("genesis transactions are only valid in the genesis block")
    if len(tx.submitter) != ADDRESS_LEN:
        raise IntegrityError("submitter must be a 20-byte address")
    if tx.kind is TxKind.CREATE:
        _check_create(state, tx)
    elif tx.kind is TxKind.TRANSFER:
        _check_transfer(state, tx)
    elif tx.kind is TxKind.ERASE:
        _check_erase(state, tx)
    elif tx.kind is TxKind.ACCESS:
        _check_access(state, tx)
    elif tx.kind is TxKind.DEVICE_REGISTER:
        _check_device_register(state, tx)
    elif tx.kind is TxKind.DEVICE_VERIFY:
        _check_device_verify(state, tx)
    else:
        raise IntegrityError(f"unknown transaction kind {tx.kind}")


def apply_genesis(state: WorldState, tx: Transaction) -> WorldState:
    payload = tx.proposal
    if not isinstance(payload, GenesisPayload):
        raise IntegrityError("genesis transaction must carry a genesis payload")
    if state.participants:
        raise IntegrityError("genesis already installed")
    participants = {c.subject_address: Participant.from_cert(c) for c in payload.roster}
    if payload.orderer_address not in participants:
        raise IntegrityError("orderer address missing from the genesis roster")
    return replace(
        state,
        participants=participants,
        orderer=payload.orderer_address,
        ca_root_public_key=payload.ca_root_public_key,
        config=payload.chain_config,
    )


def apply_tx(state: WorldState, tx: Transaction, block_time: int) -> WorldState:
    """check_tx + state transition; ACCESS and DEVICE_VERIFY leave state unchanged."""
    check_tx(state, tx)
    if tx.kind is TxKind.CREATE:
        return _apply_create(state, tx, block_time)
    if tx.kind is TxKind.TRANSFER:
        return _apply_transfer(state, tx, block_time)
    if tx.kind is TxKind.ERASE:
        return _apply_erase(state, tx, block_time)
    if tx.kind is TxKind.DEVICE_REGISTER:
        return _apply_device_register(state, tx, block_time)
    return state


# ---------------------------------------------------------------------------
# Client-side operation builders: validate against a snapshot, return the
# signed transaction for submission. The commit path re-validates.
# ---------------------------------------------------------------------------


def create_evidence(
    state: WorldState,
    caller: Participant,
    key: SigningKey,
    id: bytes,
    dsc: str,
    tm: int,
    device_type: str,
) -> Transaction:
    rec = new_evidence_record(id=id, creator=caller.address, dsc=dsc, tm=tm, device_type=device_type)
    tx = sign_transaction(TxKind.CREATE, rec, caller, key)
    check_tx(state, tx)
    return tx


def transfer_ownership(
    state: WorldState,
    caller: Participant,
    key: SigningKey,
    id: bytes,
    new_owner: bytes,
    dsc_amendment: str = "",
) -> Transaction:
    if id in state.erased:
        raise Erased(f"evidence {id.hex()}")
    current = state.evidence.get(id)
    if current is None:
        raise NotFound(f"evidence {id.hex()}")
    rec = replace(
        current,
        dsc=dsc_amendment if dsc_amendment else current.dsc,
        own=new_owner,
        own_prev=caller.address,
    )
    tx = sign_transaction(TxKind.TRANSFER, rec, caller, key)
    check_tx(state, tx)
    return tx


def erase_evidence(state: WorldState, caller: Participant, key: SigningKey, id: bytes) -> Transaction:
    if id in state.erased:
        raise AlreadyErased(f"evidence {id.hex()}")
    current = state.record(id)
    tx = sign_transaction(TxKind.ERASE, current, caller, key)
    check_tx(state, tx)
    return tx


def get_evidence(state: WorldState, caller: Participant, id: bytes) -> EvidenceHandle:
    """Owner-gated retrieval handle; the caller submits the matching ACCESS
    transaction (build_access) so the read lands in the audit trail."""
    if id in state.erased:
        raise Erased(f"evidence {id.hex()}")
    current = state.evidence.get(id)
    if current is None:
        raise NotFound(f"evidence {id.hex()}")
    PermissionMatrix(state.config).require(
        caller.role,
        TxKind.ACCESS,
        is_creator=current.creator == caller.address,
        is_owner=_current_owner(current) == caller.address,
    )
    return EvidenceHandle(record=current, erased=False, locator=locator_for(current))


def build_access(
    state: WorldState,
    caller: Participant,
    key: SigningKey,
    id: bytes,
    at_time: int | None = None,
) -> Transaction:
    current = state.record(id)
    # tm carries the access time so repeated reads stay byte-distinct.
    rec = replace(current, tm=at_time if at_time is not None else current.tm)
    tx = sign_transaction(TxKind.ACCESS, rec, caller, key)
    check_tx(state, tx)
    return tx


def register_device_state(
    state: WorldState,
    caller: Participant,
    key: SigningKey,
    device_id: str,
    firmware_hash: bytes,
    config_hash: bytes,
) -> Transaction:
    rec = DeviceRecord(
        device_id=device_id,
        firmware_hash=firmware_hash,
        config_hash=config_hash,
        registered_at=0,
        registrar=caller.address,
    )
    tx = sign_transaction(TxKind.DEVICE_REGISTER, rec, caller, key)
    check_tx(state, tx)
    return tx


def build_device_verify(
    state: WorldState,
    caller: Participant,
    key: SigningKey,
    device_id: str,
    firmware_hash: bytes,
    config_hash: bytes,
) -> Transaction:
    rec = DeviceRecord(
        device_id=device_id,
        firmware_hash=firmware_hash,
        config_hash=config_hash,
        registered_at=0,
        registrar=caller.address,
    )
    tx = sign_transaction(TxKind.DEVICE_VERIFY, rec, caller, key)
    check_tx(state, tx)
    return tx


def verify_device_state(
    state: WorldState,
    device_id: str,
    firmware_hash: bytes,
    config_hash: bytes,
) -> VerificationResult:
    history = state.devices.get(device_id)
    if not history:
        raise NotFound(f"device {device_id}")
    latest = history[-1]
    if latest.firmware_hash == firmware_hash and latest.config_hash == config_hash:
        return VerificationResult.CURRENT
    for rec in history[:-1]:
        if rec.firmware_hash == firmware_hash and rec.config_hash == config_hash:
            return VerificationResult.HISTORICAL
    return VerificationResult.UNKNOWN


def metadata_access_allowed(state: WorldState, caller: Participant, record: EvidenceRecord) -> bool:
    """Metadata-read policy: open to any enrolled participant by default,
    owner-gated when the chain config says so. Raw payload reads are always
    owner-gated regardless of this policy."""
    from .config import METADATA_OPEN

    if state.config.metadata_access == METADATA_OPEN:
        return caller.address in state.participants
    return record.own == caller.address or record.creator == caller.address
