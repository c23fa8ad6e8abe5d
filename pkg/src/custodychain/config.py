"""Chain-wide configuration and the named-hash registry.

`ChainConfig` holds the knobs that change consensus semantics; it is embedded
in the genesis payload so every node replays with identical rules. Hash
choices are by name so ids, merkle roots and block hashes all use one
configured 256-bit function.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from . import encoding

DIGEST_LEN = 32
ADDRESS_LEN = 20
NONCE_LEN = 32
ZERO_DIGEST = b"\x00" * DIGEST_LEN

MAX_DSC_LEN = 4096
DEFAULT_PAYLOAD_CAP = 1 << 30  # 1 GiB

_HASHES = {
    "sha256": hashlib.sha256,
    "sha3_256": hashlib.sha3_256,
    "blake2b_256": lambda data=b"": hashlib.blake2b(data, digest_size=32),
}

METADATA_OPEN = "open"
METADATA_OWNER = "owner"


def hash_names() -> list[str]:
    return sorted(_HASHES)


def new_hasher(name: str):
    """Incremental hasher for the named 256-bit function."""
    try:
        return _HASHES[name]()
    except KeyError:
        raise ValueError(f"unknown hash function {name!r}; known: {hash_names()}") from None


def digest(name: str, data: bytes) -> bytes:
    h = new_hasher(name)
    h.update(data)
    return h.digest()


@dataclass(frozen=True)
class ChainConfig:
    """Consensus-relevant settings, fixed at genesis."""

    hash_name: str = "sha256"
    allow_prosecutor_transfer: bool = False
    metadata_access: str = METADATA_OPEN
    payload_cap: int = DEFAULT_PAYLOAD_CAP

    def __post_init__(self) -> None:
        new_hasher(self.hash_name)
        if self.metadata_access not in (METADATA_OPEN, METADATA_OWNER):
            raise ValueError(f"metadata_access must be 'open' or 'owner', got {self.metadata_access!r}")
        if self.payload_cap <= 0:
            raise ValueError("payload_cap must be positive")

    def digest(self, data: bytes) -> bytes:
        return digest(self.hash_name, data)

    def to_bytes(self) -> bytes:
        return encoding.pack_fields(
            encoding.pack_str(self.hash_name),
            encoding.pack_u64(1 if self.allow_prosecutor_transfer else 0),
            encoding.pack_str(self.metadata_access),
            encoding.pack_u64(self.payload_cap),
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "ChainConfig":
        r = encoding.Reader(data)
        cfg = cls(
            hash_name=r.str(),
            allow_prosecutor_transfer=r.u64() == 1,
            metadata_access=r.str(),
            payload_cap=r.u64(),
        )
        r.expect_end()
        return cfg

    def to_json_dict(self) -> dict:
        return {
            "hash_name": self.hash_name,
            "allow_prosecutor_transfer": self.allow_prosecutor_transfer,
            "metadata_access": self.metadata_access,
            "payload_cap": self.payload_cap,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "ChainConfig":
        return cls(
            hash_name=data.get("hash_name", "sha256"),
            allow_prosecutor_transfer=bool(data.get("allow_prosecutor_transfer", False)),
            metadata_access=data.get("metadata_access", METADATA_OPEN),
            payload_cap=int(data.get("payload_cap", DEFAULT_PAYLOAD_CAP)),
        )
