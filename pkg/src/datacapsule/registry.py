"""Simulated decentralized registry: DID documents and published policies.

The registry is a single append-only file of newline-delimited canonical
JSON records, each linked to its predecessor by SHA-256::

    {"kind": ..., "payload": {...}, "prev_hash": b64u, "record_hash": b64u,
     "seq": 1, "timestamp": "2027-04-15T09:00:00Z"}

``record_hash`` covers the canonical JSON of every other field. Appends
hold an exclusive ``flock`` on the file and are fsynced before the
in-memory view advances; readers only consume complete lines, so a record
becomes visible once it is fully on disk.
"""

from __future__ import annotations

import datetime as dt
import fcntl
import hashlib
import os
import threading
from collections.abc import Callable, Iterable
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PublicKey
from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PublicKey

from ._canonical import b64u, canonical_json, parse_json, unb64u
from .errors import (
    DuplicateDid,
    InvalidDdo,
    LedgerCorrupted,
    Malformed,
    MalformedPolicy,
    PolicyError,
    UnknownPublisher,
)

DID_PREFIX = "did:dc:"
SIGNING_SCHEME = "Ed25519"
AGREEMENT_SCHEME = "X25519"
GENESIS_HASH = bytes(32)

DID_REGISTRATION = "did_registration"
POLICY_PUBLICATION = "policy_publication"
KINDS = (DID_REGISTRATION, POLICY_PUBLICATION)

TIMESTAMP_FORMAT = "%Y-%m-%dT%H:%M:%SZ"


def did_for_key(signing_public: bytes) -> str:
    return DID_PREFIX + hashlib.sha256(signing_public).digest()[:16].hex()


def format_timestamp(when: dt.datetime) -> str:
    if when.tzinfo is not None:
        when = when.astimezone(dt.timezone.utc).replace(tzinfo=None)
    return when.strftime(TIMESTAMP_FORMAT)


def parse_timestamp(text: str) -> dt.datetime:
    try:
        when = dt.datetime.strptime(text, TIMESTAMP_FORMAT)
    except (TypeError, ValueError):
        raise Malformed(f"bad timestamp {text!r}") from None
    return when.replace(tzinfo=dt.timezone.utc)


def utc_now() -> dt.datetime:
    return dt.datetime.now(dt.timezone.utc).replace(microsecond=0)


def _exact_keys(obj: Any, keys: set[str], what: str) -> dict:
    if not isinstance(obj, dict) or set(obj) != keys:
        raise Malformed(f"{what} must be an object with keys {sorted(keys)}")
    return obj


def _string(obj: dict, key: str) -> str:
    value = obj[key]
    if not isinstance(value, str):
        raise Malformed(f"{key} must be a string")
    return value


@dataclass(frozen=True)
class DidDocument:
    did: str
    signing_key: bytes
    agreement_key: bytes
    created_at: str
    signing_scheme: str = SIGNING_SCHEME
    agreement_scheme: str = AGREEMENT_SCHEME

    def validate(self) -> None:
        if self.signing_scheme != SIGNING_SCHEME or self.agreement_scheme != AGREEMENT_SCHEME:
            raise InvalidDdo(f"unsupported key schemes {self.signing_scheme}/{self.agreement_scheme}")
        if len(self.signing_key) != 32 or len(self.agreement_key) != 32:
            raise InvalidDdo("public keys must be 32 bytes")
        try:
            Ed25519PublicKey.from_public_bytes(self.signing_key)
            X25519PublicKey.from_public_bytes(self.agreement_key)
        except ValueError as exc:
            raise InvalidDdo(f"invalid public key: {exc}") from None
        if self.did != did_for_key(self.signing_key):
            raise InvalidDdo(f"{self.did} does not match the hash of its signing key")
        try:
            parse_timestamp(self.created_at)
        except Malformed:
            raise InvalidDdo(f"bad created_at {self.created_at!r}") from None

    def signing_public_key(self) -> Ed25519PublicKey:
        return Ed25519PublicKey.from_public_bytes(self.signing_key)

    def agreement_public_key(self) -> X25519PublicKey:
        return X25519PublicKey.from_public_bytes(self.agreement_key)

    def to_json(self) -> dict:
        return {
            "agreement_key": {"scheme": self.agreement_scheme, "key": b64u(self.agreement_key)},
            "created_at": self.created_at,
            "did": self.did,
            "signing_key": {"scheme": self.signing_scheme, "key": b64u(self.signing_key)},
        }

    @classmethod
    def from_json(cls, obj: Any) -> "DidDocument":
        obj = _exact_keys(obj, {"agreement_key", "created_at", "did", "signing_key"}, "DDO")
        sk = _exact_keys(obj["signing_key"], {"scheme", "key"}, "signing_key")
        ak = _exact_keys(obj["agreement_key"], {"scheme", "key"}, "agreement_key")
        return cls(
            did=_string(obj, "did"),
            signing_key=unb64u(sk["key"]),
            agreement_key=unb64u(ak["key"]),
            created_at=_string(obj, "created_at"),
            signing_scheme=_string(sk, "scheme"),
            agreement_scheme=_string(ak, "scheme"),
        )


def policy_hash(doc_bytes: bytes) -> bytes:
    return hashlib.sha256(doc_bytes).digest()


@dataclass(frozen=True)
class RegistryRecord:
    seq: int
    timestamp: str
    kind: str
    payload: dict = field(hash=False)
    prev_hash: bytes
    record_hash: bytes

    def body(self) -> dict:
        return {
            "kind": self.kind,
            "payload": self.payload,
            "prev_hash": b64u(self.prev_hash),
            "seq": self.seq,
            "timestamp": self.timestamp,
        }

    def compute_hash(self) -> bytes:
        return hashlib.sha256(canonical_json(self.body())).digest()

    def to_json(self) -> dict:
        return {**self.body(), "record_hash": b64u(self.record_hash)}

    def to_line(self) -> bytes:
        return canonical_json(self.to_json()) + b"\n"

    @classmethod
    def create(cls, seq: int, timestamp: str, kind: str, payload: dict, prev_hash: bytes):
        draft = cls(seq, timestamp, kind, payload, prev_hash, b"")
        return cls(seq, timestamp, kind, payload, prev_hash, draft.compute_hash())

    @classmethod
    def from_json(cls, obj: Any) -> "RegistryRecord":
        obj = _exact_keys(obj, {"kind", "payload", "prev_hash", "record_hash", "seq", "timestamp"},
                          "record")
        seq = obj["seq"]
        if type(seq) is not int or seq < 1:
            raise Malformed("seq must be a positive integer")
        kind = _string(obj, "kind")
        if kind not in KINDS:
            raise Malformed(f"unknown record kind {kind!r}")
        if not isinstance(obj["payload"], dict):
            raise Malformed("payload must be an object")
        prev, rec = unb64u(obj["prev_hash"]), unb64u(obj["record_hash"])
        if len(prev) != 32 or len(rec) != 32:
            raise Malformed("hashes must be 32 bytes")
        parse_timestamp(_string(obj, "timestamp"))
        return cls(seq, obj["timestamp"], kind, obj["payload"], prev, rec)

    @classmethod
    def from_line(cls, line: bytes) -> "RegistryRecord":
        record = cls.from_json(parse_json(line.rstrip(b"\n")))
        if record.to_line() not in (line, line + b"\n"):
            raise Malformed("record is not in canonical form")
        return record

    # typed views of the payload
    @property
    def ddo(self) -> DidDocument:
        return DidDocument.from_json(self.payload["ddo"])

    @property
    def publisher(self) -> str:
        return self.payload["publisher"]

    @property
    def policy(self) -> tuple[bytes, bytes]:
        return unb64u(self.payload["document"]), unb64u(self.payload["policy_hash"])


def _check_payload(record: RegistryRecord) -> None:
    p = record.payload
    if record.kind == DID_REGISTRATION:
        _exact_keys(p, {"ddo"}, "did_registration payload")
        record.ddo.validate()
    else:
        _exact_keys(p, {"publisher", "document", "policy_hash"}, "policy_publication payload")
        _string(p, "publisher")
        doc, digest = record.policy
        if policy_hash(doc) != digest:
            raise Malformed("policy_hash does not match the document")


def verify_chain(records: Iterable[RegistryRecord | bytes]) -> int | None:
    """1-based position of the first record that breaks the chain, else None.

    Accepts parsed records or raw ledger lines. A record is bad if it does
    not parse canonically, its seq is out of order, its prev_hash does not
    match its predecessor, its record_hash does not match its content, or
    its payload is not well formed for its kind.
    """
    prev = GENESIS_HASH
    for pos, item in enumerate(records, start=1):
        try:
            record = item if isinstance(item, RegistryRecord) else RegistryRecord.from_line(item)
            _check_payload(record)
        except (Malformed, InvalidDdo, KeyError, TypeError):
            return pos
        if record.seq != pos or record.prev_hash != prev or record.compute_hash() != record.record_hash:
            return pos
        prev = record.record_hash
    return None


def read_lines(path: str | os.PathLike) -> list[bytes]:
    """Complete lines of a ledger file; a partially written tail is ignored."""
    data = Path(path).read_bytes()
    end = data.rfind(b"\n") + 1
    return data[:end].splitlines(keepends=True)


def read_records(path: str | os.PathLike) -> list[RegistryRecord]:
    return [RegistryRecord.from_line(line) for line in read_lines(path)]


def verify_file(path: str | os.PathLike) -> int | None:
    return verify_chain(read_lines(path))


class Ledger:
    """The registry handle shared by every actor.

    ``Ledger()`` keeps records in memory only; ``Ledger(path)`` persists
    them and picks up records appended by other handles or processes on
    every read. ``clock`` supplies record timestamps.
    """

    def __init__(self, path: str | os.PathLike | None = None, *,
                 clock: Callable[[], dt.datetime] = utc_now):
        self.path = Path(path) if path is not None else None
        self.clock = clock
        self._lock = threading.RLock()
        self._records: list[RegistryRecord] = []
        self._dids: dict[str, DidDocument] = {}
        self._policies: dict[str, tuple[bytes, bytes]] = {}
        self._offset = 0
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.touch(exist_ok=True)
            self.refresh()

    @classmethod
    def replay(cls, records: Iterable[RegistryRecord]) -> "Ledger":
        ledger = cls()
        for record in records:
            ledger._ingest(record)
        return ledger

    @property
    def records(self) -> tuple[RegistryRecord, ...]:
        self.refresh()
        return tuple(self._records)

    @property
    def head_hash(self) -> bytes:
        self.refresh()
        return self._records[-1].record_hash if self._records else GENESIS_HASH

    @property
    def identity(self) -> str:
        """Registry reference carried in capsule metadata."""
        if self.path is None:
            return "memory:" + self._genesis_tag()
        return "file:" + self.path.name + "#" + self._genesis_tag()

    def _genesis_tag(self) -> str:
        recs = self.records
        return b64u(recs[0].record_hash) if recs else "empty"

    def __len__(self) -> int:
        return len(self.records)

    def state(self) -> dict:
        """In-memory state as plain values, for replay comparisons."""
        self.refresh()
        return {
            "dids": {d: doc.to_json() for d, doc in sorted(self._dids.items())},
            "policies": {d: (b64u(doc), b64u(h)) for d, (doc, h) in sorted(self._policies.items())},
            "head": b64u(self.head_hash),
        }

    # reads
    def lookup(self, did: str) -> DidDocument | None:
        self.refresh()
        return self._dids.get(did)

    def fetch_policy(self, publisher_did: str) -> tuple[bytes, bytes] | None:
        self.refresh()
        return self._policies.get(publisher_did)

    def verify(self) -> int | None:
        if self.path is not None:
            return verify_file(self.path)
        return verify_chain(self._records)

    # writes
    def register_did(self, ddo: DidDocument) -> int:
        ddo.validate()
        with self._writing():
            if ddo.did in self._dids:
                raise DuplicateDid(f"{ddo.did} is already registered")
            return self._append(DID_REGISTRATION, {"ddo": ddo.to_json()}).seq

    def publish_policy(self, publisher_did: str, doc_bytes: bytes) -> bytes:
        from .policy import parse_policy

        try:
            parse_policy(doc_bytes)
        except PolicyError as exc:
            raise MalformedPolicy(f"{exc.code}: {exc}") from None
        digest = policy_hash(doc_bytes)
        with self._writing():
            if publisher_did not in self._dids:
                raise UnknownPublisher(f"{publisher_did} is not registered")
            self._append(POLICY_PUBLICATION, {
                "publisher": publisher_did,
                "document": b64u(doc_bytes),
                "policy_hash": b64u(digest),
            })
        return digest

    # internals
    def _writing(self):
        return _WriteGuard(self)

    def _append(self, kind: str, payload: dict) -> RegistryRecord:
        prev = self._records[-1].record_hash if self._records else GENESIS_HASH
        record = RegistryRecord.create(
            len(self._records) + 1, format_timestamp(self.clock()), kind, payload, prev
        )
        if self.path is not None:
            line = record.to_line()
            fd = os.open(self.path, os.O_WRONLY | os.O_APPEND)
            try:
                os.write(fd, line)
                os.fsync(fd)
            finally:
                os.close(fd)
            self._offset += len(line)
        self._ingest(record)
        return record

    def _ingest(self, record: RegistryRecord) -> None:
        expected = len(self._records) + 1
        prev = self._records[-1].record_hash if self._records else GENESIS_HASH
        try:
            _check_payload(record)
        except (Malformed, InvalidDdo, KeyError, TypeError) as exc:
            raise LedgerCorrupted(record.seq, str(exc)) from None
        if record.seq != expected or record.prev_hash != prev or record.compute_hash() != record.record_hash:
            raise LedgerCorrupted(expected, "broken hash chain")
        self._records.append(record)
        if record.kind == DID_REGISTRATION:
            ddo = record.ddo
            if ddo.did in self._dids:
                raise LedgerCorrupted(record.seq, f"{ddo.did} registered twice")
            self._dids[ddo.did] = ddo
        else:
            if record.publisher not in self._dids:
                raise LedgerCorrupted(record.seq, "policy from unregistered publisher")
            self._policies[record.publisher] = record.policy

    def refresh(self) -> None:
        """Ingest records appended to the file since the last read."""
        if self.path is None:
            return
        with self._lock:
            size = self.path.stat().st_size
            if size == self._offset:
                return
            with open(self.path, "rb") as fh:
                fh.seek(self._offset)
                chunk = fh.read()
            end = chunk.rfind(b"\n") + 1
            for line in chunk[:end].splitlines(keepends=True):
                try:
                    record = RegistryRecord.from_line(line)
                except Malformed as exc:
                    raise LedgerCorrupted(len(self._records) + 1, str(exc)) from None
                self._ingest(record)
            self._offset += end


class _WriteGuard:
    """Thread lock plus exclusive file lock, with a refresh once acquired."""

    def __init__(self, ledger: Ledger):
        self.ledger = ledger
        self._fh = None

    def __enter__(self):
        self.ledger._lock.acquire()
        try:
            if self.ledger.path is not None:
                self._fh = open(self.ledger.path, "rb")
                fcntl.flock(self._fh, fcntl.LOCK_EX)
            self.ledger.refresh()
        except BaseException:
            self.__exit__(None, None, None)
            raise
        return self

    def __exit__(self, *exc):
        if self._fh is not None:
            fcntl.flock(self._fh, fcntl.LOCK_UN)
            self._fh.close()
            self._fh = None
        self.ledger._lock.release()
        return False
