"""Canonical byte serialization shared by every signed or hashed structure.

Every structure is encoded as a concatenation of length-prefixed fields in
declared field order: a 4-byte big-endian length followed by the field bytes.
Integers are 8-byte big-endian unsigned payloads, strings UTF-8. The same
layout is used verbatim for file exports, so signatures and digests are
stable across processes and platforms.
"""

from __future__ import annotations

import base64
import struct

_LEN = struct.Struct(">I")
_U64 = struct.Struct(">Q")

MAX_FIELD_LEN = 1 << 31


class DecodeError(ValueError):
    """Raised when canonical bytes are malformed or truncated."""


def pack_bytes(value: bytes) -> bytes:
    if len(value) >= MAX_FIELD_LEN:
        raise ValueError("field too long for canonical encoding")
    return _LEN.pack(len(value)) + value


def pack_u64(value: int) -> bytes:
    return pack_bytes(_U64.pack(value))


def pack_str(value: str) -> bytes:
    return pack_bytes(value.encode("utf-8"))


def pack_fields(*fields: bytes) -> bytes:
    """Concatenate already length-prefixed fields."""
    return b"".join(fields)


def pack_list(items: list[bytes]) -> bytes:
    """Encode a list as one field: element count, then each element nested."""
    body = _LEN.pack(len(items)) + b"".join(pack_bytes(i) for i in items)
    return pack_bytes(body)


class Reader:
    """Sequential decoder for canonical bytes; raises DecodeError on truncation."""

    def __init__(self, data: bytes) -> None:
        self._data = data
        self._pos = 0

    def bytes(self) -> bytes:
        if self._pos + 4 > len(self._data):
            raise DecodeError("truncated length prefix")
        (n,) = _LEN.unpack_from(self._data, self._pos)
        self._pos += 4
        if self._pos + n > len(self._data):
            raise DecodeError("truncated field")
        out = self._data[self._pos : self._pos + n]
        self._pos += n
        return out

    def u64(self) -> int:
        raw = self.bytes()
        if len(raw) != 8:
            raise DecodeError("u64 field must be 8 bytes")
        return _U64.unpack(raw)[0]

    def str(self) -> str:
        try:
            return self.bytes().decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DecodeError("invalid UTF-8 in string field") from exc

    def list(self) -> list[bytes]:
        sub = Reader(self.bytes())
        if sub._pos + 4 > len(sub._data):
            raise DecodeError("truncated list count")
        (n,) = _LEN.unpack_from(sub._data, sub._pos)
        sub._pos += 4
        items = [sub.bytes() for _ in range(n)]
        sub.expect_end()
        return items

    def expect_end(self) -> None:
        if self._pos != len(self._data):
            raise DecodeError("trailing bytes after canonical structure")

    @property
    def exhausted(self) -> bool:
        return self._pos == len(self._data)


def to_b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def from_b64(text: str) -> bytes:
    return base64.b64decode(text.encode("ascii"), validate=True)


def load_binary_or_b64(raw: bytes) -> bytes:
    """Decode a file that may hold either raw canonical bytes or their base64 text."""
    stripped = raw.strip()
    if stripped and all(32 < b < 127 for b in stripped):
        try:
            return base64.b64decode(stripped, validate=True)
        except Exception:
            pass
    return raw
