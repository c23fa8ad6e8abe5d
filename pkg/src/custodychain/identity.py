"""Certificate authority, participant identities and signing primitives.

A single root CA issues one certificate per participant. Certificates bind a
20-byte address (truncated hash of the raw Ed25519 public key) to a role and
a validity window; the issuer signature covers the canonical serialization of
all other fields. Everything here is an immutable value safe to share across
threads; enrollment is serialized through one CA context.
"""

from __future__ import annotations

import enum
import hashlib
import os
import time
from dataclasses import dataclass
from pathlib import Path

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from . import encoding
from .config import ADDRESS_LEN, digest

PUBLIC_KEY_LEN = 32
SIGNATURE_LEN = 64
DEFAULT_CERT_LIFETIME = 10 * 365 * 24 * 3600


class Role(enum.Enum):
    ISP = "ISP"
    LEA = "LEA"
    PROSECUTOR = "PROSECUTOR"


class SigningKey:
    """Ed25519 signing key; deterministic signatures over canonical bytes."""

    def __init__(self, private: Ed25519PrivateKey) -> None:
        self._private = private

    @classmethod
    def generate(cls, seed: bytes | None = None) -> "SigningKey":
        if seed is None:
            seed = os.urandom(32)
        if len(seed) != 32:
            raise ValueError("signing-key seed must be 32 bytes")
        return cls(Ed25519PrivateKey.from_private_bytes(seed))

    @classmethod
    def from_bytes(cls, raw: bytes) -> "SigningKey":
        return cls(Ed25519PrivateKey.from_private_bytes(raw))

    def to_bytes(self) -> bytes:
        from cryptography.hazmat.primitives import serialization

        return self._private.private_bytes(
            serialization.Encoding.Raw,
            serialization.PrivateFormat.Raw,
            serialization.NoEncryption(),
        )

    def public_bytes(self) -> bytes:
        from cryptography.hazmat.primitives import serialization

        return self._private.public_key().public_bytes(
            serialization.Encoding.Raw, serialization.PublicFormat.Raw
        )

    def sign(self, message: bytes) -> bytes:
        return self._private.sign(message)


def raw_verify(public_key: bytes, message: bytes, signature: bytes) -> bool:
    """Signature check against a raw 32-byte key; malformed input yields False."""
    try:
        Ed25519PublicKey.from_public_bytes(public_key).verify(signature, message)
        return True
    except (InvalidSignature, ValueError, TypeError):
        return False


def address_from_public_key(public_key: bytes, hash_name: str = "sha256") -> bytes:
    return digest(hash_name, public_key)[:ADDRESS_LEN]


@dataclass(frozen=True)
class Certificate:
    subject_address: bytes
    subject_role: Role
    subject_public_key: bytes
    issued_at: int
    expires_at: int
    issuer_signature: bytes

    def signing_bytes(self) -> bytes:
        return encoding.pack_fields(
            encoding.pack_bytes(self.subject_address),
            encoding.pack_str(self.subject_role.value),
            encoding.pack_bytes(self.subject_public_key),
            encoding.pack_u64(self.issued_at),
            encoding.pack_u64(self.expires_at),
        )

    def to_bytes(self) -> bytes:
        return self.signing_bytes() + encoding.pack_bytes(self.issuer_signature)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Certificate":
        r = encoding.Reader(data)
        cert = cls(
            subject_address=r.bytes(),
            subject_role=Role(r.str()),
            subject_public_key=r.bytes(),
            issued_at=r.u64(),
            expires_at=r.u64(),
            issuer_signature=r.bytes(),
        )
        r.expect_end()
        return cert

    def to_b64(self) -> str:
        return encoding.to_b64(self.to_bytes())

    def verify(self, ca_public_key: bytes, at_time: int | None = None) -> bool:
        """True iff the issuer signature checks out, the address matches the
        key, and the validity window covers `at_time` (default: now)."""
        if at_time is None:
            at_time = int(time.time())
        if self.issued_at >= self.expires_at:
            return False
        if not self.issued_at <= at_time < self.expires_at:
            return False
        if len(self.subject_address) != ADDRESS_LEN:
            return False
        return raw_verify(ca_public_key, self.signing_bytes(), self.issuer_signature)


@dataclass(frozen=True)
class Participant:
    address: bytes
    role: Role
    public_key: bytes
    cert: Certificate

    @classmethod
    def from_cert(cls, cert: Certificate) -> "Participant":
        return cls(
            address=cert.subject_address,
            role=cert.subject_role,
            public_key=cert.subject_public_key,
            cert=cert,
        )


def verify(
    cert: Certificate,
    message: bytes,
    signature: bytes,
    ca_public_key: bytes,
    at_time: int | None = None,
) -> bool:
    """Full verification contract: the certificate must chain to the CA root
    and be in-validity, and the signature must verify under the certified key.
    Malformed signature bytes return False rather than raising."""
    if not cert.verify(ca_public_key, at_time=at_time):
        return False
    return raw_verify(cert.subject_public_key, message, signature)


class CAContext:
    """Root certificate authority.

    With a seed, the root key and every enrollment key derive from a
    deterministic stream, so a fixed seed reproduces the same identities;
    without one, keys come from the OS RNG.
    """

    def __init__(
        self,
        seed: bytes | str | int | None = None,
        hash_name: str = "sha256",
        cert_lifetime: int = DEFAULT_CERT_LIFETIME,
        clock=None,
    ) -> None:
        self.hash_name = hash_name
        self.cert_lifetime = cert_lifetime
        self._clock = clock or (lambda: int(time.time()))
        self._counter = 0
        if seed is None:
            self._stream_key = None
            root_seed = os.urandom(32)
        else:
            if isinstance(seed, int):
                seed = str(seed)
            if isinstance(seed, str):
                seed = seed.encode("utf-8")
            self._stream_key = hashlib.sha256(b"custodychain-ca" + seed).digest()
            root_seed = self._next_seed()
        self._root_key = SigningKey.generate(root_seed)

    @classmethod
    def from_key(cls, root_key: SigningKey, hash_name: str = "sha256", clock=None) -> "CAContext":
        """Rebuild a CA context around a persisted root key."""
        ca = cls(hash_name=hash_name, clock=clock)
        ca._root_key = root_key
        return ca

    def _next_seed(self) -> bytes:
        if self._stream_key is None:
            return os.urandom(32)
        out = hashlib.sha256(self._stream_key + self._counter.to_bytes(8, "big")).digest()
        self._counter += 1
        return out

    @property
    def root_public_key(self) -> bytes:
        return self._root_key.public_bytes()

    @property
    def root_signing_key(self) -> SigningKey:
        return self._root_key

    def sign(self, message: bytes) -> bytes:
        """Root-key signature; used for certificates and the genesis anchor."""
        return self._root_key.sign(message)

    def issue(self, public_key: bytes, role: Role, issued_at: int | None = None) -> Certificate:
        if issued_at is None:
            issued_at = self._clock()
        unsigned = Certificate(
            subject_address=address_from_public_key(public_key, self.hash_name),
            subject_role=role,
            subject_public_key=public_key,
            issued_at=issued_at,
            expires_at=issued_at + self.cert_lifetime,
            issuer_signature=b"",
        )
        return Certificate(
            subject_address=unsigned.subject_address,
            subject_role=role,
            subject_public_key=public_key,
            issued_at=unsigned.issued_at,
            expires_at=unsigned.expires_at,
            issuer_signature=self.sign(unsigned.signing_bytes()),
        )

    def enroll(self, role: Role) -> tuple[Participant, SigningKey]:
        key = SigningKey.generate(self._next_seed())
        cert = self.issue(key.public_bytes(), role)
        return Participant.from_cert(cert), key


def ca_init(
    seed: bytes | str | int | None = None,
    hash_name: str = "sha256",
    cert_lifetime: int = DEFAULT_CERT_LIFETIME,
    clock=None,
) -> CAContext:
    """Create a root CA context; a fixed seed reproduces the same root key."""
    return CAContext(seed=seed, hash_name=hash_name, cert_lifetime=cert_lifetime, clock=clock)


def sign(signing_key: SigningKey, message: bytes) -> bytes:
    return signing_key.sign(message)


def save_cert(cert: Certificate, path: Path, text: bool = False) -> None:
    data = cert.to_bytes()
    path.write_bytes(cert.to_b64().encode("ascii") + b"\n" if text else data)


def load_cert(path: Path) -> Certificate:
    return Certificate.from_bytes(encoding.load_binary_or_b64(path.read_bytes()))


def save_key(key: SigningKey, path: Path, text: bool = False) -> None:
    data = key.to_bytes()
    path.write_bytes(encoding.to_b64(data).encode("ascii") + b"\n" if text else data)
    os.chmod(path, 0o600)


def load_key(path: Path) -> SigningKey:
    return SigningKey.from_bytes(encoding.load_binary_or_b64(path.read_bytes()))
