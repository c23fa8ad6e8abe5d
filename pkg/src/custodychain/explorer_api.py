"""Query/invoke HTTP service over one node.

Reads are canonical renderings of ledger state; writes relay client-signed
proposals (the server never holds client signing keys, preserving
non-repudiation end to end). Sessions are established by challenge-response:
the client proves possession of its certified key by signing a server nonce.

Metadata reads honor the chain's metadata-access policy; raw payload
retrieval always requires current ownership. Access events are recorded via
client-signed ACCESS transactions through /invoke/access.
"""

from __future__ import annotations

import secrets
import time

from fastapi import Depends, FastAPI, Header, Request
from fastapi.responses import JSONResponse, StreamingResponse
from pydantic import BaseModel

from . import __version__, chaincode, encoding
from .chaincode import metadata_access_allowed
from .errors import ChainError, Erased, NotFound, PermissionDenied
from .identity import Participant, raw_verify, verify as cert_verify
from .node import LocalNode
from .records import Transaction, TxKind

INVOKE_KINDS = {
    "create": TxKind.CREATE,
    "transfer": TxKind.TRANSFER,
    "erase": TxKind.ERASE,
    "register_device": TxKind.DEVICE_REGISTER,
    "access": TxKind.ACCESS,
    "verify_device": TxKind.DEVICE_VERIFY,
}

_STATUS = {"NOT_FOUND": 404, "ERASED": 410}


def _status_for(code: str) -> int:
    return _STATUS.get(code, 403)


def _hex(value: str, what: str) -> bytes:
    try:
        return bytes.fromhex(value)
    except ValueError:
        raise NotFound(f"{what} {value!r} is not valid hex") from None


class ChallengeBody(BaseModel):
    address: str


class LoginBody(BaseModel):
    address: str
    challenge: str
    signature: str


class InvokeBody(BaseModel):
    transaction: str  # base64 canonical transaction bytes


class SessionManager:
    """Challenge-response login tokens bound to one participant each."""

    def __init__(self, ttl_s: int = 3600) -> None:
        self.ttl_s = ttl_s
        self.challenges: dict[str, tuple[bytes, float]] = {}
        self.tokens: dict[str, tuple[bytes, float]] = {}

    def new_challenge(self, address: bytes) -> str:
        nonce = secrets.token_hex(32)
        self.challenges[nonce] = (address, time.time() + self.ttl_s)
        return nonce

    def redeem(self, address: bytes, challenge: str) -> bool:
        entry = self.challenges.pop(challenge, None)
        return entry is not None and entry[0] == address and entry[1] >= time.time()

    def issue(self, address: bytes) -> tuple[str, int]:
        token = secrets.token_hex(16)
        expires = time.time() + self.ttl_s
        self.tokens[token] = (address, expires)
        return token, int(expires)

    def resolve(self, token: str) -> bytes | None:
        entry = self.tokens.get(token)
        if entry is None or entry[1] < time.time():
            self.tokens.pop(token, None)
            return None
        return entry[0]


def create_app(node: LocalNode, session_ttl_s: int | None = None) -> FastAPI:
    app = FastAPI(title="custodychain explorer", version=__version__)
    sessions = SessionManager(ttl_s=session_ttl_s or int(node.config.get("session_ttl_s", 3600)))
    app.state.node = node
    app.state.sessions = sessions

    def require_session(authorization: str | None = Header(default=None)) -> Participant:
        if not authorization or not authorization.startswith("Bearer "):
            raise _Unauthorized("missing bearer token")
        address = sessions.resolve(authorization.removeprefix("Bearer "))
        if address is None:
            raise _Unauthorized("invalid or expired token")
        participant = node.state.participants.get(address)
        if participant is None:
            raise _Unauthorized("session participant not in the chain roster")
        return participant

    class _Unauthorized(Exception):
        def __init__(self, detail: str) -> None:
            self.detail = detail

    @app.exception_handler(_Unauthorized)
    async def _unauthorized(_req: Request, exc: _Unauthorized):
        return JSONResponse(status_code=401, content={"code": "UNAUTHORIZED", "detail": exc.detail})

    @app.exception_handler(ChainError)
    async def _chain_error(_req: Request, exc: ChainError):
        return JSONResponse(status_code=_status_for(exc.code), content={"code": exc.code, "detail": str(exc)})

    # -- sessions -------------------------------------------------------------

    @app.post("/session/challenge")
    def session_challenge(body: ChallengeBody):
        address = _hex(body.address, "participant")
        if address not in node.state.participants:
            raise NotFound(f"participant {body.address}")
        return {"challenge": sessions.new_challenge(address)}

    @app.post("/session/login")
    def session_login(body: LoginBody):
        address = _hex(body.address, "participant")
        participant = node.state.participants.get(address)
        if participant is None:
            raise NotFound(f"participant {body.address}")
        if not sessions.redeem(address, body.challenge):
            raise PermissionDenied("unknown or expired challenge")
        signature = encoding.from_b64(body.signature)
        if not cert_verify(
            participant.cert,
            _hex(body.challenge, "challenge"),
            signature,
            node.state.ca_root_public_key,
        ):
            raise PermissionDenied("challenge signature does not verify")
        token, expires_at = sessions.issue(address)
        return {"token": token, "expires_at": expires_at, "role": participant.role.value}

    # -- reads ------------------------------------------------------------------

    @app.get("/blocks/latest")
    def latest_block(_p: Participant = Depends(require_session)):
        return node.latest_block().to_json_dict(node.hash_name)

    @app.get("/blocks/{height}")
    def block(height: int, _p: Participant = Depends(require_session)):
        return node.block(height).to_json_dict(node.hash_name)

    @app.get("/tx/{tx_id}")
    def transaction(tx_id: str, _p: Participant = Depends(require_session)):
        tx, height = node.transaction(_hex(tx_id, "tx"))
        return {"height": height, "tx": tx.to_json_dict(node.hash_name)}

    @app.get("/evidence/{id}")
    def evidence(id: str, p: Participant = Depends(require_session)):
        handle = node.evidence_handle(_hex(id, "evidence"))
        if not metadata_access_allowed(node.state, p, handle.record):
            raise PermissionDenied("metadata access denied by chain policy")
        return handle.to_json_dict()

    @app.get("/evidence/{id}/trail")
    def trail(id: str, p: Participant = Depends(require_session)):
        record = node.state.record(_hex(id, "evidence"))
        if not metadata_access_allowed(node.state, p, record):
            raise PermissionDenied("metadata access denied by chain policy")
        return {
            "id": id,
            "erased": node.state.is_erased(record.id),
            "trail": [c.to_json_dict() for c in record.custody_times],
        }

    @app.get("/evidence/{id}/payload")
    def payload(id: str, p: Participant = Depends(require_session)):
        eid = _hex(id, "evidence")
        record = node.state.record(eid)
        if node.state.is_erased(eid):
            raise Erased(f"evidence {id}")
        if record.own != p.address:
            raise PermissionDenied("payload retrieval requires current ownership")
        handle, meta = node.store_for(record.creator).open_payload(eid)

        def stream():
            with handle:
                while chunk := handle.read(64 * 1024):
                    yield chunk

        return StreamingResponse(
            stream(),
            media_type="application/octet-stream",
            headers={"X-Evidence-Id": meta["id"], "X-Evidence-Nonce": meta["nonce"]},
        )

    @app.get("/devices/{device_id}")
    def device(device_id: str, _p: Participant = Depends(require_session)):
        history = node.device_history(device_id)
        return {"device_id": device_id, "history": [d.to_json_dict() for d in history]}

    @app.get("/chain/verify")
    def chain_verify(_p: Participant = Depends(require_session)):
        return node.verify().to_json_dict()

    @app.get("/participants")
    def participants(_p: Participant = Depends(require_session)):
        return {
            "participants": [
                {"address": a.hex(), "role": pt.role.value}
                for a, pt in sorted(node.state.participants.items())
            ],
            "orderer": node.state.orderer.hex(),
        }

    # -- invoke -------------------------------------------------------------------

    @app.post("/invoke/{op}")
    def invoke(op: str, body: InvokeBody, p: Participant = Depends(require_session)):
        kind = INVOKE_KINDS.get(op)
        if kind is None:
            return JSONResponse(status_code=400, content={"code": "BAD_REQUEST", "detail": f"unknown op {op!r}"})
        try:
            tx = Transaction.from_bytes(encoding.from_b64(body.transaction))
        except Exception as exc:
            return JSONResponse(status_code=400, content={"code": "BAD_REQUEST", "detail": f"malformed transaction: {exc}"})
        if tx.kind is not kind:
            return JSONResponse(
                status_code=400,
                content={"code": "BAD_REQUEST", "detail": f"transaction kind {tx.kind.value} does not match op {op!r}"},
            )
        if tx.submitter != p.address:
            raise PermissionDenied("transaction submitter must match the session participant")
        if not raw_verify(p.public_key, tx.signing_bytes(), tx.submitter_signature):
            raise PermissionDenied("transaction signature does not verify")
        tx_id, height = node.submit(tx)
        return {"tx_id": tx_id.hex(), "height": height}

    return app
