"""Canonical encodings shared by every on-disk and on-wire format."""

import base64
import binascii
import json
import struct
from typing import Any

from .errors import Malformed


def canonical_json(obj: Any) -> bytes:
    """Sorted keys, no insignificant whitespace, UTF-8."""
    return json.dumps(
        obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False
    ).encode("utf-8")


def parse_json(data: bytes | str) -> Any:
    try:
        return json.loads(data)
    except (ValueError, UnicodeDecodeError) as exc:
        raise Malformed(f"invalid JSON: {exc}") from None


def b64u(data: bytes) -> str:
    return base64.urlsafe_b64encode(data).rstrip(b"=").decode("ascii")


def unb64u(text: Any) -> bytes:
    """Strict unpadded base64url; non-canonical encodings are rejected."""
    if not isinstance(text, str):
        raise Malformed("expected base64url string")
    try:
        raw = base64.urlsafe_b64decode(text + "=" * (-len(text) % 4))
    except (binascii.Error, ValueError):
        raise Malformed("invalid base64url") from None
    if b64u(raw) != text:
        raise Malformed("non-canonical base64url")
    return raw


class Writer:
    """Length-prefixed binary records (u32 big-endian lengths)."""

    def __init__(self) -> None:
        self._parts: list[bytes] = []

    def u32(self, value: int) -> "Writer":
        self._parts.append(struct.pack(">I", value))
        return self

    def raw(self, data: bytes) -> "Writer":
        self._parts.append(data)
        return self

    def put(self, data: bytes) -> "Writer":
        return self.u32(len(data)).raw(data)

    def text(self, value: str) -> "Writer":
        return self.put(value.encode("utf-8"))

    def getvalue(self) -> bytes:
        return b"".join(self._parts)


class Reader:
    def __init__(self, data: bytes) -> None:
        self._data = memoryview(data)
        self._pos = 0

    def raw(self, n: int) -> bytes:
        if n < 0 or self._pos + n > len(self._data):
            raise Malformed("truncated input")
        out = bytes(self._data[self._pos:self._pos + n])
        self._pos += n
        return out

    def u32(self) -> int:
        return struct.unpack(">I", self.raw(4))[0]

    def get(self) -> bytes:
        return self.raw(self.u32())

    def text(self) -> str:
        try:
            return self.get().decode("utf-8")
        except UnicodeDecodeError:
            raise Malformed("invalid UTF-8") from None

    def done(self) -> None:
        if self._pos != len(self._data):
            raise Malformed("trailing bytes")
