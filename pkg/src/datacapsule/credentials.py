"""Verifiable credentials and presentations as signed canonical JSON.

A credential is signed by its issuer over the canonical JSON of every
field except ``signature``; a presentation is signed the same way by its
holder and embeds the credentials verbatim. Claims are a flat map of
string to string. Signatures are Ed25519, which is deterministic, so a
given credential always serializes to the same bytes.
"""

from __future__ import annotations

import random
import uuid
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from typing import Any

from cryptography.exceptions import InvalidSignature

from ._canonical import b64u, canonical_json, parse_json, unb64u
from .errors import (
    EmptyClaims,
    EmptyCredentialList,
    InvalidEmbeddedCredential,
    Malformed,
)
from .identity import Identity
from .registry import SIGNING_SCHEME, Ledger, format_timestamp, parse_timestamp, utc_now

VC_TYPE = "VerifiableCredential"
VP_TYPE = "VerifiablePresentation"


def _new_id(rng) -> str:
    raw = rng.randbytes(16) if rng is not None else None
    return "urn:uuid:" + str(uuid.UUID(bytes=raw, version=4) if raw else uuid.uuid4())


def _signature_json(sig: bytes) -> dict:
    return {"scheme": SIGNING_SCHEME, "value": b64u(sig)}


def _read_signature(obj: Any) -> bytes:
    if not isinstance(obj, dict) or set(obj) != {"scheme", "value"}:
        raise Malformed("signature must be {scheme, value}")
    if obj["scheme"] != SIGNING_SCHEME:
        raise Malformed(f"unsupported signature scheme {obj['scheme']!r}")
    sig = unb64u(obj["value"])
    if len(sig) != 64:
        raise Malformed("signature must be 64 bytes")
    return sig


def _fields(obj: Any, keys: set[str], what: str) -> dict:
    if not isinstance(obj, dict) or set(obj) != keys:
        raise Malformed(f"{what} must have exactly the keys {sorted(keys)}")
    for key in keys - {"claims", "credentials", "signature"}:
        if not isinstance(obj[key], str):
            raise Malformed(f"{what}.{key} must be a string")
    return obj


def _check_claims(claims: Mapping[str, str]) -> dict[str, str]:
    claims = dict(claims)
    if not claims:
        raise EmptyClaims("a credential needs at least one claim")
    for k, v in claims.items():
        if not isinstance(k, str) or not k or not isinstance(v, str):
            raise Malformed("claims map nonempty string names to string values")
    return claims


def _verify_sig(registry: Ledger, did: str, sig: bytes, message: bytes, role: str,
                failures: list[str]) -> None:
    ddo = registry.lookup(did)
    if ddo is None:
        failures.append(f"unresolvable {role}")
        return
    try:
        ddo.signing_public_key().verify(sig, message)
    except InvalidSignature:
        failures.append(f"bad {role} signature")


@dataclass(frozen=True)
class VerifiableCredential:
    id: str
    issuer: str
    subject: str
    claims: Mapping[str, str]
    issued_at: str
    signature: bytes

    def unsigned_json(self) -> dict:
        return {
            "claims": dict(self.claims),
            "id": self.id,
            "issued_at": self.issued_at,
            "issuer": self.issuer,
            "subject": self.subject,
            "type": VC_TYPE,
        }

    def signing_input(self) -> bytes:
        return canonical_json(self.unsigned_json())

    def to_json(self) -> dict:
        return {**self.unsigned_json(), "signature": _signature_json(self.signature)}

    def to_bytes(self) -> bytes:
        return canonical_json(self.to_json())

    @classmethod
    def from_json(cls, obj: Any) -> "VerifiableCredential":
        obj = _fields(obj, {"claims", "id", "issued_at", "issuer", "signature", "subject", "type"},
                      "credential")
        if obj["type"] != VC_TYPE:
            raise Malformed(f"not a {VC_TYPE}")
        if not isinstance(obj["claims"], dict):
            raise Malformed("claims must be an object")
        try:
            claims = _check_claims(obj["claims"])
        except EmptyClaims:
            raise Malformed("credential has no claims") from None
        parse_timestamp(obj["issued_at"])
        return cls(obj["id"], obj["issuer"], obj["subject"], claims, obj["issued_at"],
                   _read_signature(obj["signature"]))

    @classmethod
    def from_bytes(cls, data: bytes) -> "VerifiableCredential":
        vc = cls.from_json(parse_json(data))
        if vc.to_bytes() != bytes(data):
            raise Malformed("credential is not in canonical form")
        return vc


@dataclass(frozen=True)
class VerifiablePresentation:
    id: str
    holder: str
    credentials: tuple[VerifiableCredential, ...]
    created_at: str
    signature: bytes

    def unsigned_json(self) -> dict:
        return {
            "created_at": self.created_at,
            "credentials": [vc.to_json() for vc in self.credentials],
            "holder": self.holder,
            "id": self.id,
            "type": VP_TYPE,
        }

    def signing_input(self) -> bytes:
        return canonical_json(self.unsigned_json())

    def to_json(self) -> dict:
        return {**self.unsigned_json(), "signature": _signature_json(self.signature)}

    def to_bytes(self) -> bytes:
        return canonical_json(self.to_json())

    @property
    def claims(self) -> dict[str, str]:
        """All claims merged in credential order (later credentials win)."""
        merged: dict[str, str] = {}
        for vc in self.credentials:
            merged.update(vc.claims)
        return merged

    @classmethod
    def from_json(cls, obj: Any) -> "VerifiablePresentation":
        obj = _fields(obj, {"created_at", "credentials", "holder", "id", "signature", "type"},
                      "presentation")
        if obj["type"] != VP_TYPE:
            raise Malformed(f"not a {VP_TYPE}")
        if not isinstance(obj["credentials"], list) or not obj["credentials"]:
            raise Malformed("a presentation embeds at least one credential")
        parse_timestamp(obj["created_at"])
        return cls(obj["id"], obj["holder"],
                   tuple(VerifiableCredential.from_json(c) for c in obj["credentials"]),
                   obj["created_at"], _read_signature(obj["signature"]))

    @classmethod
    def from_bytes(cls, data: bytes) -> "VerifiablePresentation":
        vp = cls.from_json(parse_json(data))
        if vp.to_bytes() != bytes(data):
            raise Malformed("presentation is not in canonical form")
        return vp


def issue_credential(
    issuer: Identity,
    issuer_did: str,
    subject_did: str,
    claims: Mapping[str, str],
    *,
    issued_at: str | None = None,
    rng: random.Random | None = None,
) -> VerifiableCredential:
    claims = _check_claims(claims)
    draft = VerifiableCredential(
        _new_id(rng), issuer_did, subject_did, claims,
        issued_at or format_timestamp(utc_now()), b"",
    )
    return VerifiableCredential(**{**draft.__dict__, "signature": issuer.sign(draft.signing_input())})


def verify_credential(vc: VerifiableCredential | bytes, registry: Ledger) -> list[str]:
    """Failures found in ``vc``; an empty list means it verifies."""
    if not isinstance(vc, VerifiableCredential):
        try:
            vc = VerifiableCredential.from_bytes(vc)
        except Malformed as exc:
            return [f"malformed credential: {exc}"]
    failures: list[str] = []
    _verify_sig(registry, vc.issuer, vc.signature, vc.signing_input(), "issuer", failures)
    return failures


def build_presentation(
    holder: Identity,
    holder_did: str,
    vcs: Sequence[VerifiableCredential],
    *,
    registry: Ledger | None = None,
    created_at: str | None = None,
    rng: random.Random | None = None,
) -> VerifiablePresentation:
    """Holder-signed presentation over ``vcs``.

    With a ``registry`` every credential is verified first and the first
    bad one raises InvalidEmbeddedCredential.
    """
    vcs = tuple(vcs)
    if not vcs:
        raise EmptyCredentialList("a presentation needs at least one credential")
    if registry is not None:
        for n, vc in enumerate(vcs):
            problems = verify_credential(vc, registry)
            if problems:
                raise InvalidEmbeddedCredential(f"credential {n}: {'; '.join(problems)}")
    draft = VerifiablePresentation(
        _new_id(rng), holder_did, vcs, created_at or format_timestamp(utc_now()), b"",
    )
    return VerifiablePresentation(
        **{**draft.__dict__, "signature": holder.sign(draft.signing_input())}
    )


def verify_presentation(vp: VerifiablePresentation | bytes, registry: Ledger) -> list[str]:
    """Every failure found in ``vp`` (holder first, then each credential)."""
    if not isinstance(vp, VerifiablePresentation):
        try:
            vp = VerifiablePresentation.from_bytes(vp)
        except Malformed as exc:
            return [f"malformed presentation: {exc}"]
    failures: list[str] = []
    _verify_sig(registry, vp.holder, vp.signature, vp.signing_input(), "holder", failures)
    for n, vc in enumerate(vp.credentials):
        failures.extend(f"credential {n}: {f}" for f in verify_credential(vc, registry))
    return failures
