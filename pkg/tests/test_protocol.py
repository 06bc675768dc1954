import dataclasses
import datetime as dt
import hashlib
import random
import re

import pytest

from datacapsule import abe, capsule as capsule_mod
from datacapsule._canonical import b64u
from datacapsule.challenge import Challenge, challenge_attribute, generate_challenge, validate_challenge
from datacapsule.credentials import issue_credential
from datacapsule.demo import EXPECTED, run_tax_demo
from datacapsule.errors import (
    ChallengeRecipientMismatch, EmptyRecipientList, ExchangeError, MalformedKey, PolicyNotFound,
    UnresolvableRecipient, UnsealFailure,
)
from datacapsule.identity import Identity
from datacapsule.lsss import Leaf, conjoin
from datacapsule.policy import render_policy
from datacapsule.protocol import (
    CapsulePlan, DataOwnerActor, ServiceProviderActor, Transcript, check_order,
    ceremony_request_recipients, mint_recipient_key, msk_fingerprints, run_exchange,
)
from datacapsule.registry import Ledger

from conftest import GOLDEN

WHEN = "2027-04-15T09:00:00Z"
NOW = dt.datetime(2027, 4, 15, 9, 0, tzinfo=dt.timezone.utc)


class Scene:
    """Issuer, citizen, and a provider with two departments, ready for step 3."""

    def __init__(self, authority, *, publish=True, seed=3):
        self.rng = random.Random(seed)
        self.registry = Ledger(clock=lambda: NOW)
        ids = {n: Identity.generate(n, self.rng) for n in ("issuer", "citizen", "agency", "front", "audit")}
        self.ids = ids
        for n in ("issuer", "citizen"):
            self.registry.register_did(ids[n].ddo(WHEN))
        self.sp = ServiceProviderActor(ids["agency"], self.registry,
                                       departments={"front": ids["front"], "audit": ids["audit"]})
        self.tr = Transcript()
        self.sp.onboard(WHEN, self.tr)
        self.policy = render_policy(conjoin(Leaf("dept:tax"), Leaf("role:clerk")), "p")
        if publish:
            self.sp.publish(self.policy, self.tr)
        self.vc = issue_credential(ids["issuer"], ids["issuer"].did, ids["citizen"].did,
                                   {"given_name": "Ada", "family_name": "Lovelace",
                                    "home_address": "12 St James's Square"},
                                   issued_at=WHEN, rng=self.rng)
        pk, msk = authority
        self.do = DataOwnerActor(ids["citizen"], self.registry, pk, msk, [self.vc],
                                 rng=self.rng, clock=lambda: NOW)

    def plan(self, **kw):
        front = self.ids["front"].did
        return CapsulePlan("c1", (self.vc.id,), kw.pop("recipients", {front: {"dept:tax", "role:clerk"}}), **kw)

    def run(self, plans=None):
        return run_exchange(self.do, self.sp, self.registry, plans or [self.plan()],
                            transcript=self.tr, now=NOW)


@pytest.fixture
def scene(authority):
    return Scene(authority)


def test_ceremony_accepts_both_departments(scene):
    dids = ceremony_request_recipients(scene.do, scene.sp, Transcript())
    assert dids == [scene.ids["front"].did, scene.ids["audit"].did]


def test_ceremony_rejects_unregistered(scene):
    scene.sp.departments["ghost"] = Identity.generate("ghost", scene.rng)
    with pytest.raises(UnresolvableRecipient):
        ceremony_request_recipients(scene.do, scene.sp)


def test_empty_recipient_list_produces_nothing(scene):
    scene.sp.recipients = lambda: []
    with pytest.raises(ExchangeError) as err:
        scene.run()
    assert err.value.step == 5 and isinstance(err.value.cause, EmptyRecipientList)
    assert scene.sp.inbox == []
    assert 9 not in scene.tr.steps()


def test_generate_challenge(scene):
    ddo = scene.registry.lookup(scene.ids["front"].did)
    a, b = generate_challenge(ddo, scene.rng), generate_challenge(ddo, scene.rng)
    assert a.nonce != b.nonce and a.attribute != b.attribute
    assert re.fullmatch(r"challenge:[0-9a-f]{64}", a.attribute)
    assert a.attribute == "challenge:" + hashlib.sha256(a.nonce).hexdigest()
    assert a.recipient_did == ddo.did


def test_mint_recipient_key(scene):
    front, audit = scene.ids["front"].did, scene.ids["audit"].did
    ch = generate_challenge(scene.registry.lookup(front), scene.rng)
    key, same = mint_recipient_key(scene.do, front, {"dept:tax"}, ch)
    assert key.attributes == {"dept:tax", ch.attribute}
    assert same is ch and key.recipient_did == front
    with pytest.raises(ChallengeRecipientMismatch):
        mint_recipient_key(scene.do, audit, {"dept:tax"}, ch)
    stranger = Identity.generate("x", scene.rng).did
    with pytest.raises(UnresolvableRecipient):
        mint_recipient_key(scene.do, stranger, {"dept:tax"}, Challenge(bytes(32), stranger))


def test_validate_challenge(scene):
    front = scene.ids["front"].did
    ch = generate_challenge(scene.registry.lookup(front), scene.rng)
    key, _ = mint_recipient_key(scene.do, front, {"dept:tax"}, ch)
    assert validate_challenge(key, ch.nonce)
    flipped = bytes([ch.nonce[0] ^ 1]) + ch.nonce[1:]
    assert not validate_challenge(key, flipped)
    pk, msk = scene.do.pk, scene.do._msk
    with pytest.raises(MalformedKey):
        validate_challenge(abe.generate_keys(pk, msk, {"dept:tax"}), ch.nonce)
    two = abe.generate_keys(pk, msk, {ch.attribute, challenge_attribute(flipped)})
    with pytest.raises(MalformedKey):
        validate_challenge(two, ch.nonce)


def test_exchange_minted_key_opens(scene):
    result = scene.run()
    front = scene.ids["front"].did
    assert result.outcomes == {("c1", front): "ok"}
    assert [c.recipients for c in scene.sp.inbox] == [[front]]
    caps, tr = result
    assert caps == list(result.capsules.values()) and tr is scene.tr


def test_policy_not_found_at_step_8(authority):
    scene = Scene(authority, publish=False)
    with pytest.raises(ExchangeError) as err:
        scene.run()
    assert err.value.step == 8 and isinstance(err.value.cause, PolicyNotFound)
    assert err.value.code == "PolicyNotFound"
    assert scene.sp.inbox == []


def test_plan_targeting_unnamed_recipient(scene):
    citizen = scene.ids["citizen"].did
    with pytest.raises(ExchangeError) as err:
        scene.run([scene.plan(recipients={citizen: {"dept:tax"}})])
    assert err.value.step == 5


def test_transcript_order(scene):
    scene.run()
    tr = scene.tr
    assert check_order(tr)
    assert sorted(set(tr.steps())) == list(range(1, 12))
    assert Transcript.from_ndjson(tr.to_ndjson()).to_ndjson() == tr.to_ndjson()
    # injected fault: a step out of order is caught
    broken = Transcript(list(tr.events))
    broken.events[0], broken.events[-1] = broken.events[-1], broken.events[0]
    assert not check_order(broken)


def test_tax_scenario_outcomes():
    # in memory: same outcomes, though the registry reference differs from the golden run
    result = run_tax_demo()
    assert tuple(result.outcomes) == EXPECTED
    assert check_order(result.transcript)


def test_tax_scenario_files(tmp_path):
    result = run_tax_demo(tmp_path)
    assert result.ok
    for name in ("personal-data.dcap", "financial-data.dcap", "ledger.ndjson", "transcript.ndjson"):
        assert (tmp_path / name).read_bytes() == (GOLDEN / name).read_bytes(), name
    assert result.transcript.to_ndjson() == (GOLDEN / "transcript.ndjson").read_bytes()


def test_msk_never_leaves_the_owner(scene):
    result = scene.run()
    blobs = [capsule_mod.serialize(c) for c in result.capsules.values()]
    blobs.append(scene.tr.to_ndjson())
    blobs.extend(r.to_line() for r in scene.registry.records)
    everything = b"\n".join(blobs)
    for fp in msk_fingerprints(scene.do):
        for form in (fp, b64u(fp).encode(), fp.hex().encode()):
            assert form not in everything
    # the slots' plaintexts do not carry it either
    for cap in result.capsules.values():
        for slot in cap.key_slots:
            key, _ = capsule_mod.unseal_slot(slot, scene.sp.identity_for(slot.recipient_did).agreement)
            assert all(fp not in key.to_bytes() for fp in msk_fingerprints(scene.do))


def test_non_recipients_fail_at_unseal(scene):
    audit = scene.ids["audit"].did
    front = scene.ids["front"].did
    plan = scene.plan(recipients={front: {"dept:tax", "role:clerk"}, audit: {"dept:tax"}})
    result = scene.run([plan])
    cap = result.capsules["c1"]
    outsiders = [scene.ids[n] for n in ("issuer", "citizen", "agency")]
    for slot in cap.key_slots:
        for who in outsiders:
            with pytest.raises(UnsealFailure):
                capsule_mod.open(cap, slot.recipient_did, who.agreement, scene.do.pk, NOW)
    # planned recipients only succeed when their attributes satisfy the policy
    assert result.outcomes == {("c1", front): "ok", ("c1", audit): "NotAuthorized"}


def test_exchange_result_retains_transfer_bytes(scene):
    result = scene.run()
    received = scene.sp.inbox[0]
    assert capsule_mod.serialize(received) == capsule_mod.serialize(result.capsules["c1"])
    assert dataclasses.asdict(received.metadata)["creator_did"] == scene.do.did
