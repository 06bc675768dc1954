"""The tax-filing scenario.

A citizen files a return with a tax agency that has two departments. The
filing is split into two capsules:

* personal data (name and address), readable by the front office at once;
* financial data, readable only by the audit department, and only from
  the release date on.

Everything, key generation included, is driven by one seeded generator and
a fixed clock, so a given seed always yields the same ledger, capsules and
transcript.
"""

from __future__ import annotations

import datetime as dt
import random
from dataclasses import dataclass
from pathlib import Path

from . import abe, capsule as capsule_mod
from .credentials import issue_credential
from .errors import ProtocolError
from .identity import Identity
from .lsss import Leaf, conjoin
from .policy import render_policy
from .protocol import (
    CapsulePlan,
    DataOwnerActor,
    ServiceProviderActor,
    Transcript,
    attempt_open,
    run_exchange,
)
from .registry import Ledger, format_timestamp

FILING_TIME = dt.datetime(2027, 4, 15, 9, 0, 0, tzinfo=dt.timezone.utc)
RELEASE_DATE = dt.date(2027, 6, 1)
RELEASE_ATTR = f"release:{RELEASE_DATE.isoformat()}"
DEFAULT_SEED = 1

FRONT_ATTRS = frozenset({"dept:tax", "role:front-office"})
AUDIT_ATTRS = frozenset({"dept:tax", "dept:audit", RELEASE_ATTR})

FRONT_POLICY = render_policy(
    conjoin(Leaf("dept:tax"), Leaf("role:front-office")),
    "urn:dc:tax-agency:front-office", "1.0", "Personal data for the front office",
)
AUDIT_POLICY = render_policy(
    conjoin(Leaf("dept:audit"), Leaf(RELEASE_ATTR)),
    "urn:dc:tax-agency:audit", "1.0", "Financial data for audit, from the release date",
)

PERSONAL_CLAIMS = {
    "given_name": "Ada",
    "family_name": "Lovelace",
    "home_address": "12 St James's Square, London",
}
FINANCIAL_CLAIMS = {
    "tax_year": "2026",
    "gross_income": "84000.00",
    "currency": "GBP",
}

# (capsule, department, clock) for the four checks the scenario makes
EXPECTED = (
    ("personal-data", "front-office", "filing", "ok"),
    ("financial-data", "front-office", "filing", "NotAuthorized"),
    ("financial-data", "audit", "filing", "NotYetReleased"),
    ("financial-data", "audit", "release", "ok"),
)


@dataclass
class DemoResult:
    outcomes: list[tuple[str, str, str, str]]
    transcript: Transcript
    workdir: Path | None
    pk: abe.PublicParams | None = None
    provider: ServiceProviderActor | None = None

    @property
    def ok(self) -> bool:
        return tuple(self.outcomes) == EXPECTED


def run_tax_demo(workdir: str | Path | None = None, seed: int = DEFAULT_SEED) -> DemoResult:
    """Run the scenario; with ``workdir`` the ledger, capsules and
    transcript are written there (it must not already hold a ledger),
    together with the public parameters and the department keystores."""
    rng = random.Random(seed)
    clock = lambda: FILING_TIME  # noqa: E731
    created = format_timestamp(FILING_TIME)
    if workdir is not None:
        workdir = Path(workdir)
        ledger_path = workdir / "ledger.ndjson"
        if ledger_path.exists() and ledger_path.stat().st_size:
            raise ProtocolError(f"{workdir} is not clean: {ledger_path.name} already exists")
        registry = Ledger(ledger_path, clock=clock)
    else:
        registry = Ledger(clock=clock)

    civil = Identity.generate("civil-registry", rng)
    employer = Identity.generate("employer", rng)
    citizen = Identity.generate("citizen", rng)
    agency = Identity.generate("tax-agency", rng)
    departments = {
        "front-office": Identity.generate("tax-front-office", rng),
        "audit": Identity.generate("tax-audit", rng),
    }
    for ident in (civil, employer, citizen):
        registry.register_did(ident.ddo(created))

    tr = Transcript()
    sp = ServiceProviderActor(agency, registry, departments=departments)
    sp.onboard(created, tr)
    front, audit = sp.department_did("front-office"), sp.department_did("audit")
    sp.publish(FRONT_POLICY, tr, publisher=front)
    sp.publish(AUDIT_POLICY, tr, publisher=audit)

    personal = issue_credential(civil, civil.did, citizen.did, PERSONAL_CLAIMS,
                                issued_at=created, rng=rng)
    financial = issue_credential(employer, employer.did, citizen.did, FINANCIAL_CLAIMS,
                                 issued_at=created, rng=rng)
    pk, msk = abe.setup(rng=rng)
    do = DataOwnerActor(citizen, registry, pk, msk, [personal, financial], rng=rng, clock=clock)

    plans = [
        CapsulePlan("personal-data", (personal.id,), {front: FRONT_ATTRS}, policy_from=front),
        CapsulePlan("financial-data", (financial.id,),
                    {front: FRONT_ATTRS, audit: AUDIT_ATTRS}, policy_from=audit),
    ]
    result = run_exchange(do, sp, registry, plans, transcript=tr, now=FILING_TIME)
    names = {front: "front-office", audit: "audit"}
    outcomes = [(cap, names[did], "filing", res) for (cap, did), res in result.outcomes.items()]

    release_time = dt.datetime.combine(RELEASE_DATE, dt.time(9, 0), tzinfo=dt.timezone.utc)
    res = attempt_open(sp, result.capsules["financial-data"], audit, pk, registry, tr,
                       capsule_name="financial-data", now=release_time)
    outcomes.append(("financial-data", "audit", "release", res))

    if workdir is not None:
        for name, cap in result.capsules.items():
            (workdir / f"{name}{capsule_mod.FILE_SUFFIX}").write_bytes(capsule_mod.serialize(cap))
        (workdir / "transcript.ndjson").write_bytes(tr.to_ndjson())
        # same layout as a CLI home, so `dcap --home <dir> capsule open` works
        (workdir / "authority").mkdir(exist_ok=True)
        (workdir / "authority" / "public.bin").write_bytes(pk.to_bytes())
        for ident in departments.values():
            ident.save(workdir / "identities" / f"{ident.name}.json")
    return DemoResult(outcomes, tr, workdir, pk, sp)
