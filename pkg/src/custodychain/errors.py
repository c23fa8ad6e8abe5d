"""Exception hierarchy with stable machine-readable reason codes.

The codes surface unchanged through the chaincode, the HTTP API (403/404
bodies) and the CLI (stderr JSON), so a denial can always be traced to the
rule that produced it.
"""

from __future__ import annotations


class ChainError(Exception):
    """Base error; `code` is the stable machine-readable identifier."""

    code = "CHAIN_ERROR"

    def __init__(self, message: str = "") -> None:
        super().__init__(message or self.code)


class PermissionDenied(ChainError):
    code = "PERMISSION_DENIED"


class NotFound(ChainError):
    code = "NOT_FOUND"


class AlreadyExists(ChainError):
    code = "ALREADY_EXISTS"


class Erased(ChainError):
    code = "ERASED"


class AlreadyErased(ChainError):
    code = "ALREADY_ERASED"


class UnknownParticipant(ChainError):
    code = "UNKNOWN_PARTICIPANT"


class NotAuthorized(ChainError):
    code = "NOT_AUTHORIZED"


class InvalidTransfer(ChainError):
    code = "INVALID_TRANSFER"


class TerminalOwner(ChainError):
    code = "TERMINAL_OWNER"


class InvalidEvidence(ChainError):
    code = "INVALID_EVIDENCE"


class IntegrityError(ChainError):
    code = "INTEGRITY_ERROR"


class SpecError(ChainError):
    code = "SPEC_ERROR"


class RejectReason:
    """Block rejection reason codes."""

    HEIGHT = "HEIGHT"
    LINKAGE = "LINKAGE"
    MERKLE = "MERKLE"
    PROPOSER = "PROPOSER"
    SIGNATURE = "SIGNATURE"
    SEMANTICS = "SEMANTICS"
    ENCODING = "ENCODING"


class BlockRejected(ChainError):
    code = "BLOCK_REJECTED"

    def __init__(self, reason: str, message: str = "") -> None:
        super().__init__(f"{reason}: {message}" if message else reason)
        self.reason = reason


class ReplayError(ChainError):
    code = "REPLAY_ERROR"

    def __init__(self, height: int, message: str = "") -> None:
        super().__init__(f"height {height}: {message}")
        self.height = height
