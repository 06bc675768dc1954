"""Data owner and service provider actors running the capsule exchange.

The exchange has eleven steps:

1. the service provider registers its DIDs
2. and publishes its access policy;
3. the data owner opens a session (form navigation),
4. plans one or more capsules,
5. runs the recipient ceremony with the provider,
6. mints a challenge-bound ABE key per capsule and recipient,
7. produces a presentation per capsule,
8. fetches the provider's policy from the registry,
9. encrypts and seals each capsule,
10. transfers the capsules;
11. the provider opens them.

Steps 1 and 2 are actor methods; :func:`run_exchange` drives 3 to 11,
one step at a time across all planned capsules, and records every event
in a :class:`Transcript`.
"""

from __future__ import annotations

import datetime as dt
import hashlib
import random
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

from . import abe, capsule as capsule_mod, lsss
from ._canonical import canonical_json, parse_json
from .abe import MasterKey, PublicParams, UserKey
from .capsule import Capsule, CapsuleMetadata, Opened
from .challenge import Challenge, challenge_attribute, generate_challenge, validate_challenge
from .credentials import VerifiableCredential, build_presentation, verify_presentation
from .errors import (
    ChallengeRecipientMismatch,
    DataCapsuleError,
    EmptyRecipientList,
    ExchangeError,
    Malformed,
    PolicyNotFound,
    ProtocolError,
    UnresolvableRecipient,
)
from .identity import Identity
from .lsss import AccessFormula
from .policy import parse_policy
from .registry import Ledger, format_timestamp, utc_now

__all__ = [
    "CapsulePlan", "Challenge", "DataOwnerActor", "ExchangeResult", "ServiceProviderActor",
    "Transcript", "build_capsule", "ceremony_request_recipients", "generate_challenge",
    "mint_recipient_key", "run_exchange", "validate_challenge",
]


# transcript

@dataclass
class Transcript:
    events: list[dict] = field(default_factory=list)

    def emit(self, step: int, actor: str, event: str, **detail) -> None:
        self.events.append({"step": step, "actor": actor, "event": event, "detail": detail})

    def __len__(self) -> int:
        return len(self.events)

    def steps(self) -> list[int]:
        return [e["step"] for e in self.events]

    def to_ndjson(self) -> bytes:
        return b"".join(canonical_json(e) + b"\n" for e in self.events)

    @classmethod
    def from_ndjson(cls, data: bytes) -> "Transcript":
        events = []
        for line in data.splitlines():
            event = parse_json(line)
            if not isinstance(event, dict) or set(event) != {"step", "actor", "event", "detail"}:
                raise Malformed("transcript events are {step, actor, event, detail}")
            events.append(event)
        return cls(events)


def check_order(transcript: Transcript) -> bool:
    """True when steps are within 1..11 and never go backwards."""
    steps = transcript.steps()
    return all(1 <= s <= 11 for s in steps) and all(a <= b for a, b in zip(steps, steps[1:]))


def _digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


# actors

class ServiceProviderActor:
    """A service provider with optional departments, each its own DID.

    ``recipients()`` is the provider's answer in the ceremony: the
    department DIDs if there are any, otherwise its own.
    """

    def __init__(self, identity: Identity, registry: Ledger, *,
                 departments: Mapping[str, Identity] | None = None):
        self.identity = identity
        self.registry = registry
        self.departments = dict(departments or {})
        self.policy_bytes: bytes | None = None
        self.inbox: list[Capsule] = []
        self._keys = {identity.did: identity}
        self._keys.update({d.did: d for d in self.departments.values()})

    @property
    def did(self) -> str:
        return self.identity.did

    @property
    def name(self) -> str:
        return self.identity.name

    def department_did(self, name: str) -> str:
        return self.departments[name].did

    def onboard(self, created_at: str, transcript: Transcript | None = None) -> None:
        """Step 1: register the provider's DID and each department's."""
        for ident in (self.identity, *self.departments.values()):
            seq = self.registry.register_did(ident.ddo(created_at))
            if transcript is not None:
                transcript.emit(1, self.name, "register_did", did=ident.did, name=ident.name, seq=seq)

    def publish(self, policy_bytes: bytes, transcript: Transcript | None = None,
                publisher: str | None = None) -> bytes:
        """Step 2: publish an access policy under ``publisher`` (default: own DID)."""
        publisher = publisher or self.did
        digest = self.registry.publish_policy(publisher, policy_bytes)
        self.policy_bytes = policy_bytes
        if transcript is not None:
            transcript.emit(2, self.name, "publish_policy", publisher=publisher,
                            policy_hash=digest.hex())
        return digest

    def recipients(self) -> list[str]:
        if self.departments:
            return [d.did for d in self.departments.values()]
        return [self.did]

    def receive(self, capsule: Capsule) -> None:
        self.inbox.append(capsule)

    def identity_for(self, did: str) -> Identity | None:
        return self._keys.get(did)

    def open(self, capsule: Capsule, did: str, pk: PublicParams,
             now: dt.datetime | dt.date | None = None) -> Opened:
        ident = self._keys.get(did)
        if ident is None:
            raise ProtocolError(f"{self.name} holds no keys for {did}")
        return capsule_mod.open(capsule, did, ident.agreement, pk, now)


@dataclass(frozen=True)
class CapsulePlan:
    """One capsule to build.

    ``recipients`` maps each recipient DID to the attributes its key gets
    (the challenge attribute is added on top). ``policy_from`` is the DID
    whose published policy governs the capsule (default: the provider).
    """

    name: str
    credential_ids: tuple[str, ...]
    recipients: Mapping[str, frozenset[str]]
    policy_from: str | None = None


class DataOwnerActor:
    """A data owner acting as its own ABE authority.

    Holds the ABE master key; it is used for key minting only and never
    leaves the actor.
    """

    def __init__(self, identity: Identity, registry: Ledger, pk: PublicParams, msk: MasterKey,
                 wallet: Sequence[VerifiableCredential] = (), *, rng: random.Random | None = None,
                 clock=None):
        self.identity = identity
        self.registry = registry
        self.pk = pk
        self._msk = msk
        self.wallet = list(wallet)
        self.rng = rng or random.SystemRandom()
        self.clock = clock
        self.session: dict = {}

    @property
    def did(self) -> str:
        return self.identity.did

    @property
    def name(self) -> str:
        return self.identity.name

    def _now(self) -> str:
        return format_timestamp(self.clock() if self.clock else utc_now())

    def credential(self, vc_id: str) -> VerifiableCredential:
        for vc in self.wallet:
            if vc.id == vc_id:
                return vc
        raise ProtocolError(f"no credential {vc_id} in the wallet")

    def __repr__(self) -> str:
        return f"DataOwnerActor({self.name!r}, did={self.did!r})"


def ceremony_request_recipients(do: DataOwnerActor, sp: ServiceProviderActor,
                                transcript: Transcript | None = None) -> list[str]:
    """Step 5: ask the provider for its consuming DIDs and resolve each one."""
    if do.registry.lookup(sp.did) is None:
        raise UnresolvableRecipient(f"service provider {sp.did} is not registered")
    dids = list(sp.recipients())
    if transcript is not None:
        transcript.emit(5, sp.name, "provide_recipients", recipients=dids)
    if not dids:
        raise EmptyRecipientList("the service provider named no recipients")
    for did in dids:
        if do.registry.lookup(did) is None:
            raise UnresolvableRecipient(f"{did} does not resolve in the registry")
        if transcript is not None:
            transcript.emit(5, do.name, "resolve_recipient", did=did)
    do.session["recipients"] = dids
    return dids


def mint_recipient_key(do: DataOwnerActor, recipient_did: str, extra_attrs,
                       challenge: Challenge) -> tuple[UserKey, Challenge]:
    """Step 6: a key for ``extra_attrs`` plus the recipient's challenge attribute."""
    if do.registry.lookup(recipient_did) is None:
        raise UnresolvableRecipient(f"{recipient_did} does not resolve in the registry")
    if challenge.recipient_did != recipient_did:
        raise ChallengeRecipientMismatch(
            f"challenge was generated for {challenge.recipient_did}, not {recipient_did}"
        )
    attrs = frozenset(extra_attrs) | {challenge.attribute}
    key = abe.generate_keys(do.pk, do._msk, attrs, do.rng, recipient_did=recipient_did)
    return key, challenge


def encryption_formula(policy: AccessFormula, challenges: Sequence[Challenge]) -> AccessFormula:
    """policy AND (c_1 OR ... OR c_m) over the recipients' challenge attributes."""
    clause = lsss.disjoin(*(lsss.challenge_leaf(c.attribute) for c in challenges))
    return lsss.And(policy, clause)


def build_capsule(
    pk: PublicParams,
    creator_did: str,
    registry_ref: str,
    vp_bytes: bytes,
    policy_bytes: bytes,
    slots_for: Sequence[tuple[str, bytes, UserKey, Challenge]],
    rng: random.Random | None = None,
) -> Capsule:
    """Encrypt under the policy AND the challenge clause, then seal.

    ``slots_for`` lists (recipient did, recipient X25519 public key, minted
    key, challenge) for every recipient.
    """
    if not slots_for:
        raise EmptyRecipientList("a capsule needs at least one recipient")
    formula = encryption_formula(parse_policy(policy_bytes).formula, [s[3] for s in slots_for])
    ct, kem = abe.encrypt(pk, lsss.compile(formula, pk.suite.order), rng)
    slots = [capsule_mod.seal_slot(did, agreement, key, ch.nonce, rng)
             for did, agreement, key, ch in slots_for]
    meta = CapsuleMetadata(
        registry_ref=registry_ref,
        policy_hash=hashlib.sha256(policy_bytes).digest(),
        creator_did=creator_did,
        abe_suite=pk.suite.id,
    )
    return capsule_mod.seal(meta, vp_bytes, policy_bytes, ct, kem, slots, rng)


@dataclass
class ExchangeResult:
    capsules: dict[str, Capsule]
    transcript: Transcript
    outcomes: dict[tuple[str, str], str]

    def __iter__(self):
        # unpacks as (capsules, transcript)
        return iter((list(self.capsules.values()), self.transcript))


def _step(n: int):
    def wrap(fn):
        def run(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except ExchangeError:
                raise
            except DataCapsuleError as exc:
                raise ExchangeError(n, exc) from exc
        return run
    return wrap


def run_exchange(
    do: DataOwnerActor,
    sp: ServiceProviderActor,
    registry: Ledger,
    capsule_plans: Sequence[CapsulePlan],
    *,
    transcript: Transcript | None = None,
    now: dt.datetime | dt.date | None = None,
) -> ExchangeResult:
    """Run steps 3 to 11. Failures in 3 to 10 raise ExchangeError; outcomes
    of step 11 (one per capsule and slot) are recorded, not raised."""
    tr = transcript if transcript is not None else Transcript()
    rng = do.rng
    plans = list(capsule_plans)

    @_step(3)
    def open_session():
        if registry.lookup(sp.did) is None:
            raise UnresolvableRecipient(f"service provider {sp.did} is not registered")
        do.session = {"sp": sp.did}
        tr.emit(3, do.name, "open_session", sp=sp.did)

    @_step(4)
    def plan():
        if not plans:
            raise ProtocolError("nothing to send: no capsule plans")
        do.session["plans"] = [p.name for p in plans]
        tr.emit(4, do.name, "plan_capsules", capsules=[p.name for p in plans])

    @_step(5)
    def ceremony():
        dids = ceremony_request_recipients(do, sp, tr)
        for p in plans:
            if not p.recipients:
                raise EmptyRecipientList(f"capsule {p.name} has no recipients")
            stray = sorted(set(p.recipients) - set(dids))
            if stray:
                raise UnresolvableRecipient(
                    f"capsule {p.name} targets {stray[0]}, which the provider did not name"
                )

    @_step(6)
    def mint():
        minted = {}
        for p in plans:
            entries = []
            for did in p.recipients:
                challenge = generate_challenge(registry.lookup(did), rng)
                key, challenge = mint_recipient_key(do, did, p.recipients[did], challenge)
                entries.append((did, registry.lookup(did).agreement_key, key, challenge))
                tr.emit(6, do.name, "mint_key", capsule=p.name, recipient=did,
                        attributes=sorted(key.attributes))
            minted[p.name] = entries
        return minted

    @_step(7)
    def present():
        vps = {}
        for p in plans:
            vcs = [do.credential(i) for i in p.credential_ids]
            vp = build_presentation(do.identity, do.did, vcs, registry=registry,
                                    created_at=do._now(), rng=rng)
            vps[p.name] = vp.to_bytes()
            tr.emit(7, do.name, "produce_vp", capsule=p.name, vp=vp.id, credentials=len(vcs))
        return vps

    @_step(8)
    def fetch():
        policies = {}
        for p in plans:
            publisher = p.policy_from or sp.did
            found = registry.fetch_policy(publisher)
            if found is None:
                raise PolicyNotFound(f"{publisher} has no published policy")
            policies[p.name] = found[0]
            tr.emit(8, do.name, "fetch_policy", capsule=p.name, publisher=publisher,
                    policy_hash=found[1].hex())
        return policies

    @_step(9)
    def encrypt(minted, vps, policies):
        built = {}
        for p in plans:
            cap = build_capsule(do.pk, do.did, registry.identity, vps[p.name], policies[p.name],
                                minted[p.name], rng)
            built[p.name] = cap
            tr.emit(9, do.name, "seal_capsule", capsule=p.name,
                    digest=_digest(capsule_mod.serialize(cap)), slots=cap.recipients)
        return built

    @_step(10)
    def transfer(built):
        for name, cap in built.items():
            data = capsule_mod.serialize(cap)
            tr.emit(10, do.name, "transfer", capsule=name, bytes=len(data))
            sp.receive(capsule_mod.deserialize(data))
            tr.emit(10, sp.name, "receive", capsule=name, digest=_digest(data))

    open_session()
    plan()
    ceremony()
    minted = mint()
    vps = present()
    policies = fetch()
    built = encrypt(minted, vps, policies)
    transfer(built)

    # step 11
    outcomes: dict[tuple[str, str], str] = {}
    for name, cap in built.items():
        for did in cap.recipients:
            outcomes[(name, did)] = attempt_open(sp, cap, did, do.pk, registry, tr,
                                                 capsule_name=name, now=now)
    return ExchangeResult(built, tr, outcomes)


def attempt_open(sp: ServiceProviderActor, cap: Capsule, did: str, pk: PublicParams,
                 registry: Ledger, tr: Transcript | None, *, capsule_name: str,
                 now: dt.datetime | dt.date | None = None) -> str:
    """Step 11 for one slot: "ok" or the stable error code."""
    detail = {"capsule": capsule_name, "recipient": did}
    if now is not None:
        detail["at"] = now.isoformat()
    try:
        opened = sp.open(cap, did, pk, now)
    except DataCapsuleError as exc:
        result = exc.code
        detail.update(result=result, stage=exc.stage)
    else:
        problems = verify_presentation(opened.vp_bytes, registry)
        result = "ok" if not problems else "InvalidPresentation"
        detail.update(result=result, vp_failures=problems)
    if tr is not None:
        tr.emit(11, sp.name, "open_capsule", **detail)
    return result


def msk_fingerprints(do: DataOwnerActor) -> list[bytes]:
    """Byte strings whose presence would indicate a leaked master key."""
    return [do._msk.to_bytes(), do.pk.suite.g1_to_bytes(do._msk.g1_alpha)]


__all__ += ["attempt_open", "challenge_attribute", "check_order", "encryption_formula",
            "msk_fingerprints"]
