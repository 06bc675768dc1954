"""The Data Capsule container.

A capsule has three parts:

``dc``
    metadata: format version, algorithm identifiers, the registry it was
    built against, the hash of the service provider's published policy,
    and the creator's DID. Its canonical JSON is the AEAD associated data.
``payload``
    the ABE ciphertext, and an AES-256-GCM encryption of the presentation
    and policy under ``HKDF-SHA256(GT bytes, info="DC-DEM-v1")``.
``key_slots``
    one per recipient: the recipient's ABE key and challenge nonce, sealed
    to the recipient's X25519 key.

Serialized capsules are canonical JSON (sorted keys, no whitespace,
unpadded base64url for bytes); deserialization rejects anything that does
not re-serialize to the same bytes.
"""

from __future__ import annotations

import datetime as dt
import hashlib
import random
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Any, NamedTuple

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PrivateKey, X25519PublicKey
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.kdf.hkdf import HKDF
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

from . import lsss
from ._canonical import Reader, Writer, b64u, canonical_json, parse_json, unb64u
from .abe import Ciphertext, PublicParams, UserKey, dec
from .challenge import NONCE_BYTES, key_challenge, validate_challenge
from .errors import (
    AeadFailure,
    ChallengeMismatch,
    EmptyKeySlots,
    Malformed,
    MalformedKey,
    NotYetReleased,
    PolicyHashMismatch,
    SuiteMismatch,
    UnknownSuite,
    NoSlotForRecipient,
    UnknownVersion,
    UnsealFailure,
)
from .pairing import get_suite

DC_VERSION = "1.0"
SUPPORTED_VERSIONS = frozenset({DC_VERSION})
AEAD_ID = "AES-256-GCM"
KDF_ID = "HKDF-SHA256"
SIGNATURE_ID = "Ed25519"
SLOT_ID = "X25519-HKDF-SHA256-AES-256-GCM"
DEM_CONTEXT = b"DC-DEM-v1"
SLOT_CONTEXT = b"DC-SLOT-v1"
RELEASE_PREFIX = "release:"
FILE_SUFFIX = ".dcap"

_RAW = (Encoding.Raw, PublicFormat.Raw)


def _rng(rng):
    return rng if rng is not None else random.SystemRandom()


@dataclass(frozen=True)
class CapsuleMetadata:
    registry_ref: str
    policy_hash: bytes
    creator_did: str
    abe_suite: str = "bls12-381"
    aead: str = AEAD_ID
    kdf: str = KDF_ID
    signature: str = SIGNATURE_ID
    slot: str = SLOT_ID
    dc_version: str = DC_VERSION

    def validate(self) -> None:
        if self.dc_version not in SUPPORTED_VERSIONS:
            raise UnknownVersion(f"unsupported capsule version {self.dc_version!r}")
        get_suite(self.abe_suite)
        for name, got, want in (("aead", self.aead, AEAD_ID), ("kdf", self.kdf, KDF_ID),
                                ("signature", self.signature, SIGNATURE_ID),
                                ("slot", self.slot, SLOT_ID)):
            if got != want:
                raise UnknownSuite(f"unsupported {name} suite {got!r}")
        if len(self.policy_hash) != 32:
            raise Malformed("policy hash must be 32 bytes")

    def to_json(self) -> dict:
        return {
            "creator_did": self.creator_did,
            "dc_version": self.dc_version,
            "policy_hash": b64u(self.policy_hash),
            "registry_ref": self.registry_ref,
            "suites": {
                "abe": self.abe_suite,
                "aead": self.aead,
                "kdf": self.kdf,
                "signature": self.signature,
                "slot": self.slot,
            },
        }

    def associated_data(self) -> bytes:
        return canonical_json(self.to_json())

    @classmethod
    def from_json(cls, obj: Any) -> "CapsuleMetadata":
        if isinstance(obj, dict) and "dc_version" in obj and obj["dc_version"] not in SUPPORTED_VERSIONS:
            raise UnknownVersion(f"unsupported capsule version {obj['dc_version']!r}")
        obj = _exact(obj, {"creator_did", "dc_version", "policy_hash", "registry_ref", "suites"}, "dc")
        suites = _exact(obj["suites"], {"abe", "aead", "kdf", "signature", "slot"}, "dc.suites")
        strings = [obj["creator_did"], obj["dc_version"], obj["registry_ref"], *suites.values()]
        if not all(isinstance(s, str) for s in strings):
            raise Malformed("metadata fields must be strings")
        meta = cls(
            registry_ref=obj["registry_ref"],
            policy_hash=unb64u(obj["policy_hash"]),
            creator_did=obj["creator_did"],
            abe_suite=suites["abe"],
            aead=suites["aead"],
            kdf=suites["kdf"],
            signature=suites["signature"],
            slot=suites["slot"],
            dc_version=obj["dc_version"],
        )
        meta.validate()
        return meta


@dataclass(frozen=True)
class KeySlot:
    recipient_did: str
    sealed: bytes

    def to_json(self) -> dict:
        return {"recipient": self.recipient_did, "sealed": b64u(self.sealed)}

    @classmethod
    def from_json(cls, obj: Any) -> "KeySlot":
        obj = _exact(obj, {"recipient", "sealed"}, "key slot")
        if not isinstance(obj["recipient"], str) or not obj["recipient"]:
            raise Malformed("slot recipient must be a nonempty string")
        return cls(obj["recipient"], unb64u(obj["sealed"]))


@dataclass(frozen=True)
class EncryptedPayload:
    abe_ciphertext: Ciphertext
    nonce: bytes
    ciphertext: bytes

    def to_json(self) -> dict:
        return {
            "abe_ct": b64u(self.abe_ciphertext.to_bytes()),
            "ciphertext": b64u(self.ciphertext),
            "nonce": b64u(self.nonce),
        }

    @classmethod
    def from_json(cls, obj: Any) -> "EncryptedPayload":
        obj = _exact(obj, {"abe_ct", "ciphertext", "nonce"}, "payload")
        nonce = unb64u(obj["nonce"])
        if len(nonce) != 12:
            raise Malformed("AEAD nonce must be 12 bytes")
        return cls(Ciphertext.from_bytes(unb64u(obj["abe_ct"])), nonce, unb64u(obj["ciphertext"]))


@dataclass(frozen=True)
class Capsule:
    metadata: CapsuleMetadata
    payload: EncryptedPayload
    key_slots: tuple[KeySlot, ...]

    @property
    def recipients(self) -> list[str]:
        return [slot.recipient_did for slot in self.key_slots]

    def slot_for(self, did: str) -> KeySlot:
        for slot in self.key_slots:
            if slot.recipient_did == did:
                return slot
        raise NoSlotForRecipient(f"capsule has no key slot for {did}")

    def to_json(self) -> dict:
        return {
            "dc": self.metadata.to_json(),
            "key_slots": [s.to_json() for s in self.key_slots],
            "payload": self.payload.to_json(),
        }

    def __eq__(self, other):
        return isinstance(other, Capsule) and serialize(self) == serialize(other)

    def __hash__(self):
        return hash(serialize(self))


class Opened(NamedTuple):
    vp_bytes: bytes
    policy_bytes: bytes


def _exact(obj: Any, keys: set[str], what: str) -> dict:
    if not isinstance(obj, dict) or set(obj) != keys:
        raise Malformed(f"{what} must have exactly the keys {sorted(keys)}")
    return obj


# key slots

def _slot_key(shared: bytes, eph_pub: bytes, recipient_pub: bytes, did: str) -> bytes:
    info = SLOT_CONTEXT + eph_pub + recipient_pub + did.encode("utf-8")
    return HKDF(hashes.SHA256(), 32, salt=None, info=info).derive(shared)


def seal_slot(recipient_did: str, recipient_agreement_key: bytes, key: UserKey, nonce: bytes,
              rng: random.Random | None = None) -> KeySlot:
    """Encrypt (key, nonce) to the recipient's X25519 public key."""
    if len(nonce) != NONCE_BYTES:
        raise ValueError("challenge nonce must be 32 bytes")
    if rng is None:
        eph = X25519PrivateKey.generate()
        aead_nonce = random.SystemRandom().randbytes(12)
    else:
        eph = X25519PrivateKey.from_private_bytes(rng.randbytes(32))
        aead_nonce = rng.randbytes(12)
    eph_pub = eph.public_key().public_bytes(*_RAW)
    shared = eph.exchange(X25519PublicKey.from_public_bytes(recipient_agreement_key))
    k = _slot_key(shared, eph_pub, recipient_agreement_key, recipient_did)
    plaintext = Writer().put(key.to_bytes()).raw(nonce).getvalue()
    ct = AESGCM(k).encrypt(aead_nonce, plaintext, recipient_did.encode("utf-8"))
    return KeySlot(recipient_did, eph_pub + aead_nonce + ct)


def unseal_slot(slot: KeySlot, agreement_private: X25519PrivateKey) -> tuple[UserKey, bytes]:
    blob = slot.sealed
    if len(blob) < 32 + 12 + 16:
        raise UnsealFailure("sealed slot is too short")
    eph_pub, aead_nonce, ct = blob[:32], blob[32:44], blob[44:]
    my_pub = agreement_private.public_key().public_bytes(*_RAW)
    try:
        shared = agreement_private.exchange(X25519PublicKey.from_public_bytes(eph_pub))
        k = _slot_key(shared, eph_pub, my_pub, slot.recipient_did)
        plaintext = AESGCM(k).decrypt(aead_nonce, ct, slot.recipient_did.encode("utf-8"))
    except (InvalidTag, ValueError):
        raise UnsealFailure("key slot does not open with this private key") from None
    try:
        r = Reader(plaintext)
        key = UserKey.from_bytes(r.get())
        nonce = r.raw(NONCE_BYTES)
        r.done()
    except Malformed as exc:
        raise UnsealFailure(f"sealed slot content is malformed: {exc}") from None
    return key, nonce


# DEM

def dem_key(suite, kem_element) -> bytes:
    return HKDF(hashes.SHA256(), 32, salt=None, info=DEM_CONTEXT).derive(
        suite.gt_to_bytes(kem_element)
    )


def _pack(vp_bytes: bytes, policy_bytes: bytes) -> bytes:
    return Writer().put(vp_bytes).put(policy_bytes).getvalue()


def _unpack(data: bytes) -> Opened:
    r = Reader(data)
    vp, policy = r.get(), r.get()
    r.done()
    return Opened(vp, policy)


def seal(
    metadata: CapsuleMetadata,
    vp_bytes: bytes,
    policy_bytes: bytes,
    abe_ct: Ciphertext,
    kem_element,
    key_slots: Sequence[KeySlot],
    rng: random.Random | None = None,
) -> Capsule:
    key_slots = tuple(key_slots)
    if not key_slots:
        raise EmptyKeySlots("a capsule needs at least one key slot")
    if len({s.recipient_did for s in key_slots}) != len(key_slots):
        raise ValueError("at most one key slot per recipient")
    metadata.validate()
    if metadata.abe_suite != abe_ct.suite.id:
        raise SuiteMismatch(f"metadata names {metadata.abe_suite}, ciphertext uses {abe_ct.suite.id}")
    if hashlib.sha256(policy_bytes).digest() != metadata.policy_hash:
        raise PolicyHashMismatch("policy bytes do not match the metadata policy hash")
    nonce = _rng(rng).randbytes(12)
    ct = AESGCM(dem_key(abe_ct.suite, kem_element)).encrypt(
        nonce, _pack(vp_bytes, policy_bytes), metadata.associated_data()
    )
    return Capsule(metadata, EncryptedPayload(abe_ct, nonce, ct), key_slots)


def release_dates(attributes) -> dict[str, dt.date | None]:
    """Release attributes mapped to their dates (None when unparseable)."""
    out: dict[str, dt.date | None] = {}
    for attr in attributes:
        if attr.startswith(RELEASE_PREFIX):
            try:
                out[attr] = dt.date.fromisoformat(attr[len(RELEASE_PREFIX):])
            except ValueError:
                out[attr] = None
    return out


def _today(now: dt.datetime | dt.date | None) -> dt.date:
    if now is None:
        return dt.datetime.now(dt.timezone.utc).date()
    if isinstance(now, dt.datetime):
        if now.tzinfo is not None:
            now = now.astimezone(dt.timezone.utc)
        return now.date()
    return now


def check_release(structure: lsss.LsssStructure, key: UserKey,
                  now: dt.datetime | dt.date | None) -> None:
    """Raise NotYetReleased unless the key satisfies ``structure`` using only
    release attributes whose date has been reached.

    This gate is enforced by the library, not by the cryptography.
    """
    today = _today(now)
    pending = {a for a, when in release_dates(key.attributes).items() if when is None or when > today}
    if not pending:
        return
    if lsss.satisfying_rows(structure, key.attributes - pending) is None:
        dates = ", ".join(sorted(a[len(RELEASE_PREFIX):] for a in pending))
        raise NotYetReleased(f"capsule is not released before {dates}")


def open(
    capsule: Capsule,
    recipient_did: str,
    agreement_private: X25519PrivateKey,
    pk: PublicParams,
    now: dt.datetime | dt.date | None = None,
) -> Opened:
    """Recover (vp_bytes, policy_bytes); fail closed at the first bad stage.

    Stages: slot lookup, unseal, challenge, ABE decryption, release date,
    AEAD, policy hash.
    """
    meta = capsule.metadata
    if meta.abe_suite != pk.suite.id:
        raise SuiteMismatch(f"capsule uses {meta.abe_suite}, public parameters use {pk.suite.id}")
    slot = capsule.slot_for(recipient_did)
    key, nonce = unseal_slot(slot, agreement_private)
    try:
        ok = validate_challenge(key, nonce)
    except MalformedKey as exc:
        raise ChallengeMismatch(str(exc)) from None
    if not ok:
        raise ChallengeMismatch("slot nonce does not match the key's challenge attribute")
    ct = capsule.payload.abe_ciphertext
    if key_challenge(key) not in ct.structure.rho:
        raise ChallengeMismatch("key's challenge is not part of this capsule's policy")
    kem = dec(pk, ct, key)
    check_release(ct.structure, key, now)
    try:
        plaintext = AESGCM(dem_key(pk.suite, kem)).decrypt(
            capsule.payload.nonce, capsule.payload.ciphertext, meta.associated_data()
        )
    except InvalidTag:
        raise AeadFailure("payload failed authentication") from None
    try:
        opened = _unpack(plaintext)
    except Malformed as exc:
        raise AeadFailure(f"payload framing is invalid: {exc}") from None
    if hashlib.sha256(opened.policy_bytes).digest() != meta.policy_hash:
        raise PolicyHashMismatch("decrypted policy does not match the metadata policy hash")
    return opened


open_capsule = open


def serialize(capsule: Capsule) -> bytes:
    return canonical_json(capsule.to_json())


def deserialize(data: bytes) -> Capsule:
    obj = parse_json(data)
    if isinstance(obj, dict) and isinstance(obj.get("dc"), dict):
        version = obj["dc"].get("dc_version")
        if version is not None and version not in SUPPORTED_VERSIONS:
            raise UnknownVersion(f"unsupported capsule version {version!r}")
    obj = _exact(obj, {"dc", "key_slots", "payload"}, "capsule")
    try:
        meta = CapsuleMetadata.from_json(obj["dc"])
    except UnknownSuite as exc:
        raise Malformed(str(exc)) from None
    if not isinstance(obj["key_slots"], list) or not obj["key_slots"]:
        raise Malformed("key_slots must be a nonempty list")
    slots = tuple(KeySlot.from_json(s) for s in obj["key_slots"])
    if len({s.recipient_did for s in slots}) != len(slots):
        raise Malformed("duplicate key slot recipient")
    payload = EncryptedPayload.from_json(obj["payload"])
    if payload.abe_ciphertext.suite.id != meta.abe_suite:
        raise Malformed("ciphertext suite differs from metadata")
    capsule = Capsule(meta, payload, slots)
    if serialize(capsule) != bytes(data):
        raise Malformed("capsule is not in canonical form")
    return capsule
