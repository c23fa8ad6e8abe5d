from __future__ import annotations

import hashlib
import itertools

import pytest

from conftest import commit, make_chain
from custodychain import chaincode
from custodychain.chaincode import PermissionMatrix, VerificationResult
from custodychain.config import ChainConfig
from custodychain.errors import (
    AlreadyErased,
    AlreadyExists,
    Erased,
    IntegrityError,
    InvalidTransfer,
    NotAuthorized,
    NotFound,
    PermissionDenied,
    TerminalOwner,
    UnknownParticipant,
)
from custodychain.identity import Role
from custodychain.records import TxKind


def eid(n: int) -> bytes:
    return hashlib.sha256(f"cc-{n}".encode()).digest()


def seeded(chain, parties, n=0, t=1_000):
    isp, key = parties["isp_a"]
    tx = chaincode.create_evidence(chain.state, isp, key, eid(n), "incident", t, "camera")
    commit(chain, parties, [tx], t)
    return eid(n)


# -- create ---------------------------------------------------------------


def test_create_sets_creator_as_first_owner(chain, parties):
    id = seeded(chain, parties)
    rec = chain.state.record(id)
    isp, _ = parties["isp_a"]
    assert rec.creator == rec.own == rec.own_prev == isp.address
    assert rec.custody_times[0].owner == isp.address
    assert rec.custody_times[0].end is None


def test_create_duplicate_id_rejected(chain, parties):
    id = seeded(chain, parties)
    isp, key = parties["isp_a"]
    with pytest.raises(AlreadyExists):
        chaincode.create_evidence(chain.state, isp, key, id, "again", 2_000, "camera")


def test_create_by_lea_denied(chain, parties):
    lea, key = parties["lea_a"]
    with pytest.raises(PermissionDenied):
        chaincode.create_evidence(chain.state, lea, key, eid(9), "d", 1_000, "tv")


def test_create_on_erased_id_rejected(chain, parties):
    id = seeded(chain, parties)
    isp, key = parties["isp_a"]
    commit(chain, parties, [chaincode.erase_evidence(chain.state, isp, key, id)], 2_000)
    with pytest.raises(AlreadyExists):
        chaincode.create_evidence(chain.state, isp, key, id, "resurrect", 3_000, "camera")


# -- get ------------------------------------------------------------------


def test_get_by_owner_returns_handle(chain, parties):
    id = seeded(chain, parties)
    isp, _ = parties["isp_a"]
    handle = chaincode.get_evidence(chain.state, isp, id)
    assert handle.record.id == id
    assert handle.locator == f"evdb://{isp.address.hex()}"


def test_get_by_previous_owner_denied_after_transfer(chain, parties):
    id = seeded(chain, parties)
    isp, key = parties["isp_a"]
    lea, _ = parties["lea_a"]
    commit(chain, parties, [chaincode.transfer_ownership(chain.state, isp, key, id, lea.address)], 2_000)
    with pytest.raises(PermissionDenied):
        chaincode.get_evidence(chain.state, isp, id)
    assert chaincode.get_evidence(chain.state, lea, id).record.own == lea.address


def test_get_unknown_and_erased(chain, parties):
    isp, key = parties["isp_a"]
    with pytest.raises(NotFound):
        chaincode.get_evidence(chain.state, isp, eid(99))
    id = seeded(chain, parties)
    commit(chain, parties, [chaincode.erase_evidence(chain.state, isp, key, id)], 2_000)
    with pytest.raises(Erased):
        chaincode.get_evidence(chain.state, isp, id)


# -- transfer ---------------------------------------------------------------


def test_transfer_isp_to_lea_updates_owner_fields(chain, parties):
    id = seeded(chain, parties)
    isp, key = parties["isp_a"]
    lea, _ = parties["lea_a"]
    commit(chain, parties, [chaincode.transfer_ownership(chain.state, isp, key, id, lea.address)], 2_000)
    rec = chain.state.record(id)
    assert rec.own == lea.address
    assert rec.own_prev == isp.address


def test_prosecutor_is_terminal_owner(chain, parties):
    id = seeded(chain, parties)
    isp, ikey = parties["isp_a"]
    lea, lkey = parties["lea_a"]
    pros, pkey = parties["pros"]
    commit(chain, parties, [chaincode.transfer_ownership(chain.state, isp, ikey, id, lea.address)], 2_000)
    commit(chain, parties, [chaincode.transfer_ownership(chain.state, lea, lkey, id, pros.address)], 3_000)
    with pytest.raises(TerminalOwner):
        chaincode.transfer_ownership(chain.state, pros, pkey, id, lea.address)


def test_prosecutor_transfer_allowed_when_configured(ca, parties):
    chain = make_chain(ca, parties, ChainConfig(allow_prosecutor_transfer=True))
    id = seeded(chain, parties)
    isp, ikey = parties["isp_a"]
    pros, pkey = parties["pros"]
    lea, _ = parties["lea_a"]
    commit(chain, parties, [chaincode.transfer_ownership(chain.state, isp, ikey, id, pros.address)], 2_000)
    commit(chain, parties, [chaincode.transfer_ownership(chain.state, pros, pkey, id, lea.address)], 3_000)
    assert chain.state.record(id).own == lea.address


def test_transfer_by_non_owner_denied(chain, parties):
    id = seeded(chain, parties)
    isp, ikey = parties["isp_a"]
    lea_a, akey = parties["lea_a"]
    lea_b, bkey = parties["lea_b"]
    commit(chain, parties, [chaincode.transfer_ownership(chain.state, isp, ikey, id, lea_b.address)], 2_000)
    with pytest.raises(PermissionDenied):
        chaincode.transfer_ownership(chain.state, lea_a, akey, id, parties["pros"][0].address)


def test_transfer_to_self_invalid(chain, parties):
    id = seeded(chain, parties)
    isp, key = parties["isp_a"]
    with pytest.raises(InvalidTransfer):
        chaincode.transfer_ownership(chain.state, isp, key, id, isp.address)


def test_transfer_to_unknown_participant(chain, parties):
    id = seeded(chain, parties)
    isp, key = parties["isp_a"]
    with pytest.raises(UnknownParticipant):
        chaincode.transfer_ownership(chain.state, isp, key, id, b"\x77" * 20)


def test_transfer_to_isp_not_authorized(chain, parties):
    id = seeded(chain, parties)
    isp, key = parties["isp_a"]
    other_isp, _ = parties["isp_b"]
    with pytest.raises(NotAuthorized):
        chaincode.transfer_ownership(chain.state, isp, key, id, other_isp.address)


def test_dsc_amendment_appends_never_overwrites(chain, parties):
    id = seeded(chain, parties)
    isp, key = parties["isp_a"]
    lea, _ = parties["lea_a"]
    tx = chaincode.transfer_ownership(chain.state, isp, key, id, lea.address, dsc_amendment="LEA intake note")
    commit(chain, parties, [tx], 2_000)
    assert chain.state.record(id).dsc == "incident\nLEA intake note"


# -- erase --------------------------------------------------------------------


def test_creator_isp_erases_while_lea_owns(chain, parties):
    id = seeded(chain, parties)
    isp, key = parties["isp_a"]
    lea, _ = parties["lea_a"]
    commit(chain, parties, [chaincode.transfer_ownership(chain.state, isp, key, id, lea.address)], 2_000)
    commit(chain, parties, [chaincode.erase_evidence(chain.state, isp, key, id)], 3_000)
    assert chain.state.is_erased(id)


def test_non_creator_cannot_erase(chain, parties):
    id = seeded(chain, parties)
    other_isp, okey = parties["isp_b"]
    pros, pkey = parties["pros"]
    with pytest.raises(PermissionDenied):
        chaincode.erase_evidence(chain.state, other_isp, okey, id)
    with pytest.raises(PermissionDenied):
        chaincode.erase_evidence(chain.state, pros, pkey, id)


def test_metadata_survives_erase(chain, parties):
    id = seeded(chain, parties)
    isp, key = parties["isp_a"]
    commit(chain, parties, [chaincode.erase_evidence(chain.state, isp, key, id)], 2_000)
    rec = chain.state.record(id)  # record still readable
    assert rec.id == id
    assert chain.state.is_erased(id)
    with pytest.raises(AlreadyErased):
        chaincode.erase_evidence(chain.state, isp, key, id)


# -- devices --------------------------------------------------------------------


def fw(n):
    return hashlib.sha256(f"fw-{n}".encode()).digest()


def test_device_registration_history_append_only(chain, parties):
    isp, key = parties["isp_a"]
    commit(chain, parties, [chaincode.register_device_state(chain.state, isp, key, "cam-1", fw(1), fw(2))], 1_000)
    assert len(chain.state.devices["cam-1"]) == 1
    commit(chain, parties, [chaincode.register_device_state(chain.state, isp, key, "cam-1", fw(3), fw(2))], 2_000)
    history = chain.state.devices["cam-1"]
    assert len(history) == 2
    assert history[0].registered_at == 1_000
    assert history[1].registered_at == 2_000


def test_device_registration_by_lea_denied(chain, parties):
    lea, key = parties["lea_a"]
    with pytest.raises(PermissionDenied):
        chaincode.register_device_state(chain.state, lea, key, "cam-1", fw(1), fw(2))


def test_verify_device_state_current_historical_unknown(chain, parties):
    isp, key = parties["isp_a"]
    commit(chain, parties, [chaincode.register_device_state(chain.state, isp, key, "cam-1", fw(1), fw(2))], 1_000)
    commit(chain, parties, [chaincode.register_device_state(chain.state, isp, key, "cam-1", fw(3), fw(4))], 2_000)
    assert chaincode.verify_device_state(chain.state, "cam-1", fw(3), fw(4)) is VerificationResult.CURRENT
    assert chaincode.verify_device_state(chain.state, "cam-1", fw(1), fw(2)) is VerificationResult.HISTORICAL
    assert chaincode.verify_device_state(chain.state, "cam-1", fw(9), fw(9)) is VerificationResult.UNKNOWN
    with pytest.raises(NotFound):
        chaincode.verify_device_state(chain.state, "ghost", fw(1), fw(2))


# -- permission matrix vs table oracle -------------------------------------------


def oracle_decision(role: Role, op: TxKind, is_creator: bool, is_owner: bool, allow_pros: bool):
    """Independent table of the §role rules: ISP-only create/erase (erase only
    by the creator), owner-only get/transfer, prosecutor terminal, ISP-only
    device registration, open device verification."""
    table = {
        TxKind.CREATE: lambda: role is Role.ISP,
        TxKind.ERASE: lambda: role is Role.ISP and is_creator,
        TxKind.ACCESS: lambda: is_owner,
        TxKind.DEVICE_REGISTER: lambda: role is Role.ISP,
        TxKind.DEVICE_VERIFY: lambda: True,
    }
    if op is TxKind.TRANSFER:
        if not is_owner:
            return "PERMISSION_DENIED"
        if role is Role.PROSECUTOR and not allow_pros:
            return "TERMINAL_OWNER"
        return None
    return None if table[op]() else "PERMISSION_DENIED"


def test_permission_matrix_matches_oracle_exhaustively():
    ops = [TxKind.CREATE, TxKind.TRANSFER, TxKind.ERASE, TxKind.ACCESS, TxKind.DEVICE_REGISTER, TxKind.DEVICE_VERIFY]
    mismatches = []
    for allow_pros in (False, True):
        matrix = PermissionMatrix(ChainConfig(allow_prosecutor_transfer=allow_pros))
        for role, op, is_creator, is_owner in itertools.product(
            Role, ops, (False, True), (False, True)
        ):
            got = matrix.decide(role, op, is_creator=is_creator, is_owner=is_owner)
            got_code = None if got is None else got.code
            want = oracle_decision(role, op, is_creator, is_owner, allow_pros)
            if got_code != want:
                mismatches.append((allow_pros, role, op, is_creator, is_owner, got_code, want))
    assert not mismatches, mismatches


def test_chaincode_determinism(chain, parties):
    isp, key = parties["isp_a"]
    tx = chaincode.create_evidence(chain.state, isp, key, eid(7), "d", 1_000, "tv")
    s1 = chaincode.apply_tx(chain.state, tx, 5_000)
    s2 = chaincode.apply_tx(chain.state, tx, 5_000)
    assert s1 == s2
    assert s1.evidence[eid(7)].to_bytes() == s2.evidence[eid(7)].to_bytes()
