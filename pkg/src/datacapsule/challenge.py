"""Per-recipient, per-capsule challenges.

A challenge is a fresh 32-byte nonce ``n``. Its attribute
``"challenge:" + hex(SHA-256(n))`` goes into the recipient's ABE key and
into the capsule policy, while ``n`` itself is sealed in that recipient's
key slot, so only the holder of the slot's private key can show that the
key belongs to this capsule.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass

from .abe import UserKey
from .errors import MalformedKey
from .lsss import RESERVED_PREFIX
from .registry import DidDocument

NONCE_BYTES = 32


def challenge_attribute(nonce: bytes) -> str:
    return RESERVED_PREFIX + hashlib.sha256(nonce).hexdigest()


@dataclass(frozen=True)
class Challenge:
    nonce: bytes
    recipient_did: str

    @property
    def attribute(self) -> str:
        return challenge_attribute(self.nonce)


def generate_challenge(recipient: DidDocument, rng: random.Random | None = None) -> Challenge:
    rng = rng or random.SystemRandom()
    return Challenge(rng.randbytes(NONCE_BYTES), recipient.did)


def key_challenge(key: UserKey) -> str:
    found = [a for a in key.attributes if a.startswith(RESERVED_PREFIX)]
    if len(found) != 1:
        raise MalformedKey(f"key carries {len(found)} challenge attributes, expected exactly 1")
    return found[0]


def validate_challenge(key: UserKey, nonce: bytes) -> bool:
    return key_challenge(key) == challenge_attribute(nonce)
