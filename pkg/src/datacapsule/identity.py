"""Actor identities: an Ed25519 signing key and an X25519 key-agreement key.

Keystore files are canonical JSON holding raw private key bytes. They are
protected by file permissions only (written 0600).
"""

from __future__ import annotations

import os
import random
from dataclasses import dataclass
from pathlib import Path

from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey
from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PrivateKey
from cryptography.hazmat.primitives.serialization import (
    Encoding,
    NoEncryption,
    PrivateFormat,
    PublicFormat,
)

from ._canonical import b64u, canonical_json, parse_json, unb64u
from .errors import Malformed
from .registry import DidDocument, did_for_key, format_timestamp, utc_now

_RAW = (Encoding.Raw, PublicFormat.Raw)


def _raw_private(key) -> bytes:
    return key.private_bytes(Encoding.Raw, PrivateFormat.Raw, NoEncryption())


@dataclass(frozen=True, eq=False)
class Identity:
    name: str
    signing: Ed25519PrivateKey
    agreement: X25519PrivateKey

    @classmethod
    def generate(cls, name: str, rng: random.Random | None = None) -> "Identity":
        if rng is None:
            return cls(name, Ed25519PrivateKey.generate(), X25519PrivateKey.generate())
        return cls(
            name,
            Ed25519PrivateKey.from_private_bytes(rng.randbytes(32)),
            X25519PrivateKey.from_private_bytes(rng.randbytes(32)),
        )

    @property
    def signing_public(self) -> bytes:
        return self.signing.public_key().public_bytes(*_RAW)

    @property
    def agreement_public(self) -> bytes:
        return self.agreement.public_key().public_bytes(*_RAW)

    @property
    def did(self) -> str:
        return did_for_key(self.signing_public)

    def ddo(self, created_at: str | None = None) -> DidDocument:
        return DidDocument(
            did=self.did,
            signing_key=self.signing_public,
            agreement_key=self.agreement_public,
            created_at=created_at or format_timestamp(utc_now()),
        )

    def sign(self, message: bytes) -> bytes:
        return self.signing.sign(message)

    def to_json(self) -> dict:
        return {
            "agreement_private": b64u(_raw_private(self.agreement)),
            "did": self.did,
            "name": self.name,
            "signing_private": b64u(_raw_private(self.signing)),
        }

    @classmethod
    def from_json(cls, obj) -> "Identity":
        if not isinstance(obj, dict) or set(obj) != {"agreement_private", "did", "name",
                                                     "signing_private"}:
            raise Malformed("not a keystore entry")
        try:
            ident = cls(
                obj["name"],
                Ed25519PrivateKey.from_private_bytes(unb64u(obj["signing_private"])),
                X25519PrivateKey.from_private_bytes(unb64u(obj["agreement_private"])),
            )
        except ValueError as exc:
            raise Malformed(f"bad private key: {exc}") from None
        if ident.did != obj["did"]:
            raise Malformed("keystore did does not match its signing key")
        return ident

    def save(self, path: str | os.PathLike) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd = os.open(path, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o600)
        with os.fdopen(fd, "wb") as fh:
            fh.write(canonical_json(self.to_json()) + b"\n")
        return path

    @classmethod
    def load(cls, path: str | os.PathLike) -> "Identity":
        return cls.from_json(parse_json(Path(path).read_bytes()))
