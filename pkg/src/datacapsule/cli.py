"""``dcap``: command-line front end.

State lives under a home directory (``--home``, else ``$DC_HOME``, else
``~/.datacapsule``)::

    ledger.ndjson           registry
    identities/<name>.json  keystore entries (mode 0600)
    authority/public.bin    ABE public parameters
    authority/master.bin    ABE master key (mode 0600)

Exit status is 0 on success, 1 on a domain error (the stable error code is
printed), 2 on a usage error.
"""

from __future__ import annotations

import argparse
import datetime as dt
import os
import random
import sys
import tempfile
from pathlib import Path

from . import abe, capsule as capsule_mod
from ._canonical import canonical_json, parse_json
from .credentials import (
    VerifiableCredential,
    VerifiablePresentation,
    build_presentation,
    issue_credential,
    verify_presentation,
)
from .errors import DataCapsuleError, PolicyNotFound, UnresolvableRecipient, UnsealFailure
from .identity import Identity
from .pairing import DEFAULT_SUITE, get_suite
from .protocol import DataOwnerActor, build_capsule, generate_challenge, mint_recipient_key
from .registry import DidDocument, Ledger, format_timestamp, read_lines, utc_now, verify_chain

NOT_FOUND = "not-found"


class CliError(Exception):
    """A failure outside the library's error hierarchy (files, arguments)."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


class Context:
    def __init__(self, args):
        home = args.home or os.environ.get("DC_HOME") or Path.home() / ".datacapsule"
        self.home = Path(home)
        self.format = args.format
        self.seed = args.seed
        self.suite = get_suite(args.suite)
        self.out = sys.stdout

    def rng(self, *purpose: str) -> random.Random | None:
        """A generator for one purpose, or None (system randomness) unseeded.

        Each invocation is a new process, so a bare ``Random(seed)`` would
        hand every command the same stream; mixing in the purpose keeps,
        say, two seeded ``identity new`` calls from colliding.
        """
        if self.seed is None:
            return None
        return random.Random("/".join((str(self.seed), *purpose)))

    def did(self, value: str) -> str:
        """A DID given either literally or as a local identity name."""
        return value if value.startswith("did:") else self.identity(value).did

    @property
    def ledger_path(self) -> Path:
        return self.home / "ledger.ndjson"

    def ledger(self, create: bool = False) -> Ledger:
        if not create and not self.ledger_path.exists():
            raise CliError("NoLedger", f"no registry at {self.ledger_path}; run 'dcap registry init'")
        return Ledger(self.ledger_path)

    def identity_path(self, name: str) -> Path:
        if not name or "/" in name or name.startswith("."):
            raise CliError("BadIdentityName", f"invalid identity name {name!r}")
        return self.home / "identities" / f"{name}.json"

    def identity(self, name: str) -> Identity:
        path = self.identity_path(name)
        if not path.exists():
            raise CliError("UnknownIdentity", f"no identity {name!r} in {path.parent}")
        return Identity.load(path)

    def authority(self, create: bool = False):
        pub, master = self.home / "authority" / "public.bin", self.home / "authority" / "master.bin"
        if pub.exists() and master.exists():
            return (abe.PublicParams.from_bytes(pub.read_bytes()),
                    abe.MasterKey.from_bytes(master.read_bytes()))
        if not create:
            raise CliError("NoAuthority", f"no ABE authority under {pub.parent}")
        pk, msk = abe.setup(self.suite.id, self.rng("authority"))
        pub.parent.mkdir(parents=True, exist_ok=True)
        pub.write_bytes(pk.to_bytes())
        fd = os.open(master, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o600)
        with os.fdopen(fd, "wb") as fh:
            fh.write(msk.to_bytes())
        return pk, msk

    def public_params(self, path: str | None) -> abe.PublicParams:
        if path:
            return abe.PublicParams.from_bytes(_read(path))
        pub = self.home / "authority" / "public.bin"
        if not pub.exists():
            raise CliError("NoAuthority", f"no public parameters at {pub}; pass --pk")
        return abe.PublicParams.from_bytes(pub.read_bytes())

    def emit(self, result: dict, human: str | None = None) -> None:
        if self.format == "json":
            self.out.write(canonical_json(result).decode("utf-8") + "\n")
        else:
            if human is None:
                human = "\n".join(f"{k}: {_human(v)}" for k, v in result.items())
            self.out.write(human + ("" if human.endswith("\n") else "\n"))


def _human(value) -> str:
    if isinstance(value, (list, tuple)):
        return ", ".join(str(v) for v in value) if value else "(none)"
    if isinstance(value, dict):
        return canonical_json(value).decode("utf-8")
    return str(value)


def _read(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise CliError("FileError", f"{path}: {exc.strerror}") from None


def _write(path: str | Path, data: bytes) -> None:
    try:
        Path(path).write_bytes(data)
    except OSError as exc:
        raise CliError("FileError", f"{path}: {exc.strerror}") from None


def _parse_now(text: str | None) -> dt.datetime:
    if text is None:
        return utc_now()
    try:
        when = dt.datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError:
        raise CliError("BadTime", f"not an ISO-8601 time: {text!r}") from None
    return when if when.tzinfo else when.replace(tzinfo=dt.timezone.utc)


# registry

def cmd_registry_init(ctx: Context, args) -> None:
    ctx.home.mkdir(parents=True, exist_ok=True)
    ledger = ctx.ledger(create=True)
    ctx.emit({"ledger": str(ctx.ledger_path), "records": len(ledger)})


def cmd_registry_register(ctx: Context, args) -> None:
    ledger = ctx.ledger()
    if args.ddo:
        ddo = DidDocument.from_json(parse_json(_read(args.ddo)))
    else:
        ddo = ctx.identity(args.identity).ddo(format_timestamp(utc_now()))
    seq = ledger.register_did(ddo)
    record = ledger.records[seq - 1]
    ctx.emit(record.to_json() if ctx.format == "json" else {"did": ddo.did, "seq": seq})


def cmd_registry_publish(ctx: Context, args) -> None:
    ledger = ctx.ledger()
    did = ctx.did(args.did) if args.did else ctx.identity(args.identity).did
    digest = ledger.publish_policy(did, _read(args.policy))
    record = ledger.records[-1]
    ctx.emit(record.to_json() if ctx.format == "json" else
             {"publisher": did, "policy_hash": digest.hex(), "seq": record.seq})


def cmd_registry_lookup(ctx: Context, args) -> None:
    ddo = ctx.ledger().lookup(ctx.did(args.did))
    if ddo is None:
        ctx.emit({"did": args.did, "result": NOT_FOUND}, NOT_FOUND)
    else:
        ctx.emit({"did": args.did, "result": "found", "ddo": ddo.to_json()},
                 canonical_json(ddo.to_json()).decode("utf-8"))


def cmd_registry_fetch(ctx: Context, args) -> None:
    found = ctx.ledger().fetch_policy(ctx.did(args.did))
    if found is None:
        ctx.emit({"did": args.did, "result": NOT_FOUND}, NOT_FOUND)
        return
    doc, digest = found
    if args.out:
        _write(args.out, doc)
    ctx.emit({"did": args.did, "result": "found", "policy_hash": digest.hex(),
              "policy": doc.decode("utf-8")},
             f"policy_hash: {digest.hex()}" if args.out else doc.decode("utf-8"))


def cmd_registry_verify(ctx: Context, args) -> int:
    if not ctx.ledger_path.exists():
        raise CliError("NoLedger", f"no registry at {ctx.ledger_path}")
    lines = read_lines(ctx.ledger_path)
    bad = verify_chain(lines)
    if bad is None:
        ctx.emit({"result": "ok", "records": len(lines)}, f"ok ({len(lines)} records)")
        return 0
    ctx.emit({"result": "corrupt", "first_bad_seq": bad, "error": "LedgerCorrupted"},
             f"error: LedgerCorrupted: first bad record is {bad}")
    return 1


# identities and credentials

def cmd_identity_new(ctx: Context, args) -> None:
    path = ctx.identity_path(args.name)
    if path.exists():
        raise CliError("IdentityExists", f"identity {args.name!r} already exists")
    ident = Identity.generate(args.name, ctx.rng("identity", args.name))
    ident.save(path)
    result = {"name": args.name, "did": ident.did, "keystore": str(path)}
    if args.register:
        result["seq"] = ctx.ledger().register_did(ident.ddo(format_timestamp(utc_now())))
    ctx.emit(result)


def cmd_identity_show(ctx: Context, args) -> None:
    ident = ctx.identity(args.name)
    ctx.emit({"name": ident.name, "did": ident.did,
              "ddo": ident.ddo("1970-01-01T00:00:00Z").to_json()}, ident.did)


def _claims(pairs: list[str]) -> dict[str, str]:
    claims = {}
    for pair in pairs:
        name, sep, value = pair.partition("=")
        if not sep or not name:
            raise CliError("BadClaim", f"claims are NAME=VALUE, got {pair!r}")
        claims[name] = value
    return claims


def cmd_credential_issue(ctx: Context, args) -> None:
    issuer = ctx.identity(args.issuer)
    vc = issue_credential(issuer, issuer.did, ctx.did(args.subject), _claims(args.claim or []),
                          rng=ctx.rng("credential", args.issuer, args.out))
    _write(args.out, vc.to_bytes())
    ctx.emit({"id": vc.id, "issuer": vc.issuer, "subject": vc.subject, "out": args.out})


def cmd_credential_present(ctx: Context, args) -> None:
    holder = ctx.identity(args.holder)
    vcs = [VerifiableCredential.from_bytes(_read(p)) for p in args.vc]
    vp = build_presentation(holder, holder.did, vcs, registry=ctx.ledger(),
                            rng=ctx.rng("presentation", args.holder, args.out))
    _write(args.out, vp.to_bytes())
    ctx.emit({"id": vp.id, "holder": vp.holder, "credentials": len(vcs), "out": args.out})


def cmd_credential_verify(ctx: Context, args) -> int:
    failures = verify_presentation(_read(args.vp), ctx.ledger())
    ctx.emit({"result": "ok" if not failures else "invalid", "failures": failures},
             "ok" if not failures else "\n".join(f"failure: {f}" for f in failures))
    return 0 if not failures else 1


# capsules

def _recipient_attrs(ctx: Context, args) -> dict[str, frozenset[str]]:
    attrs: dict[str, frozenset[str]] = {}
    for spec in args.attrs or []:
        did, sep, rest = spec.partition("=")
        if not sep:
            raise CliError("BadAttrs", f"--attrs takes DID=attr1,attr2, got {spec!r}")
        attrs[ctx.did(did)] = frozenset(a for a in rest.split(",") if a)
    recipients = list(dict.fromkeys(ctx.did(r) for r in args.recipients or []))
    for did in attrs:
        if did not in recipients:
            recipients.append(did)
    if not recipients:
        raise CliError("NoRecipients", "name at least one recipient with --recipients")
    missing = [d for d in recipients if not attrs.get(d)]
    if missing:
        raise CliError("BadAttrs", f"no --attrs given for {missing[0]}")
    return {d: attrs[d] for d in recipients}


def cmd_capsule_create(ctx: Context, args) -> None:
    ledger = ctx.ledger()
    creator = ctx.identity(args.creator)
    if args.policy:
        policy_bytes = _read(args.policy)
    else:
        publisher = ctx.did(args.policy_from)
        found = ledger.fetch_policy(publisher)
        if found is None:
            raise PolicyNotFound(f"{publisher} has no published policy")
        policy_bytes = found[0]
    vp_bytes = _read(args.vp)
    VerifiablePresentation.from_bytes(vp_bytes)
    pk, msk = ctx.authority(create=True)
    rng = ctx.rng("capsule", args.creator, args.out)
    do = DataOwnerActor(creator, ledger, pk, msk, rng=rng)
    entries = []
    for did, attrs in _recipient_attrs(ctx, args).items():
        ddo = ledger.lookup(did)
        if ddo is None:
            raise UnresolvableRecipient(f"{did} does not resolve in the registry")
        key, challenge = mint_recipient_key(do, did, attrs, generate_challenge(ddo, rng))
        entries.append((did, ddo.agreement_key, key, challenge))
    cap = build_capsule(pk, creator.did, ledger.identity, vp_bytes, policy_bytes, entries, rng)
    out = args.out
    if not out.endswith(capsule_mod.FILE_SUFFIX):
        out += capsule_mod.FILE_SUFFIX
    _write(out, capsule_mod.serialize(cap))
    ctx.emit({"out": out, "recipients": cap.recipients,
              "policy_hash": cap.metadata.policy_hash.hex()})


def _pick_slot(cap, ident: Identity) -> str:
    """The identity's own slot, else the first slot it can unseal."""
    if ident.did in cap.recipients:
        return ident.did
    for slot in cap.key_slots:
        try:
            capsule_mod.unseal_slot(slot, ident.agreement)
        except UnsealFailure:
            continue
        return slot.recipient_did
    raise UnsealFailure(f"no key slot opens with identity {ident.name!r}")


def cmd_capsule_open(ctx: Context, args) -> None:
    ident = ctx.identity(args.identity)
    cap = capsule_mod.deserialize(_read(args.capsule))
    pk = ctx.public_params(args.pk)
    did = ctx.did(args.slot) if args.slot else _pick_slot(cap, ident)
    opened = capsule_mod.open(cap, did, ident.agreement, pk, _parse_now(args.now))
    if args.vp_out:
        _write(args.vp_out, opened.vp_bytes)
    if args.policy_out:
        _write(args.policy_out, opened.policy_bytes)
    vp_text = opened.vp_bytes.decode("utf-8", "replace")
    policy_text = opened.policy_bytes.decode("utf-8", "replace")
    ctx.emit({"result": "ok", "vp": vp_text, "policy": policy_text},
             f"--- presentation ---\n{vp_text}\n--- policy ---\n{policy_text}")


def cmd_capsule_inspect(ctx: Context, args) -> None:
    cap = capsule_mod.deserialize(_read(args.capsule))
    ct = cap.payload.abe_ciphertext
    info = {
        "metadata": cap.metadata.to_json(),
        "recipients": cap.recipients,
        "abe_rows": ct.structure.rows,
        "abe_attributes": sorted(set(ct.structure.rho)),
        "payload_bytes": len(cap.payload.ciphertext),
    }
    m = cap.metadata
    human = "\n".join([
        f"dc_version: {m.dc_version}",
        f"suites: abe={m.abe_suite} aead={m.aead} kdf={m.kdf} signature={m.signature} slot={m.slot}",
        f"registry: {m.registry_ref}",
        f"creator: {m.creator_did}",
        f"policy_hash: {m.policy_hash.hex()}",
        f"recipients: {_human(cap.recipients)}",
        f"policy attributes: {_human(info['abe_attributes'])}",
    ])
    ctx.emit(info, human)


# demo

def cmd_demo_tax(ctx: Context, args) -> int:
    from .demo import DEFAULT_SEED, EXPECTED, run_tax_demo

    seed = ctx.seed if ctx.seed is not None else DEFAULT_SEED
    if args.dir:
        result = run_tax_demo(args.dir, seed)
    else:
        with tempfile.TemporaryDirectory(prefix="dc-demo-") as tmp:
            result = run_tax_demo(tmp, seed)
    if args.trace:
        ctx.out.write(result.transcript.to_ndjson().decode("utf-8"))
        return 0 if result.ok else 1
    rows = [{"capsule": c, "recipient": r, "clock": t, "result": res}
            for c, r, t, res in result.outcomes]
    human = "\n".join(f"{c:<15} {r:<13} {t:<8} {res}" for c, r, t, res in result.outcomes)
    ctx.emit({"outcomes": rows, "expected": result.ok, "events": len(result.transcript)},
             human + f"\n{'all outcomes as expected' if result.ok else 'UNEXPECTED OUTCOMES'}")
    return 0 if tuple(result.outcomes) == EXPECTED else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dcap", description="Data Capsule toolkit")
    p.add_argument("--home", help="state directory (default $DC_HOME or ~/.datacapsule)")
    p.add_argument("--format", choices=("human", "json"), default="human")
    p.add_argument("--seed", type=int, help="deterministic randomness (tests and demos only)")
    p.add_argument("--suite", default=DEFAULT_SUITE, help="pairing suite id")
    sub = p.add_subparsers(dest="command", required=True)

    reg = sub.add_parser("registry", help="ledger administration").add_subparsers(
        dest="action", required=True)
    reg.add_parser("init").set_defaults(fn=cmd_registry_init)
    r = reg.add_parser("register-did")
    g = r.add_mutually_exclusive_group(required=True)
    g.add_argument("--identity")
    g.add_argument("--ddo", help="DID document JSON file")
    r.set_defaults(fn=cmd_registry_register)
    r = reg.add_parser("publish-policy")
    g = r.add_mutually_exclusive_group(required=True)
    g.add_argument("--identity")
    g.add_argument("--did")
    r.add_argument("--policy", required=True, help="XACML policy file")
    r.set_defaults(fn=cmd_registry_publish)
    r = reg.add_parser("lookup")
    r.add_argument("did")
    r.set_defaults(fn=cmd_registry_lookup)
    r = reg.add_parser("fetch-policy")
    r.add_argument("did")
    r.add_argument("--out")
    r.set_defaults(fn=cmd_registry_fetch)
    reg.add_parser("verify").set_defaults(fn=cmd_registry_verify)

    ids = sub.add_parser("identity", help="keystore entries").add_subparsers(
        dest="action", required=True)
    r = ids.add_parser("new")
    r.add_argument("name")
    r.add_argument("--register", action="store_true", help="also register the DID")
    r.set_defaults(fn=cmd_identity_new)
    r = ids.add_parser("show")
    r.add_argument("name")
    r.set_defaults(fn=cmd_identity_show)

    cred = sub.add_parser("credential", help="credentials and presentations").add_subparsers(
        dest="action", required=True)
    r = cred.add_parser("issue")
    r.add_argument("--issuer", required=True)
    r.add_argument("--subject", required=True)
    r.add_argument("--claim", action="append", metavar="NAME=VALUE")
    r.add_argument("--out", required=True)
    r.set_defaults(fn=cmd_credential_issue)
    r = cred.add_parser("present")
    r.add_argument("--holder", required=True)
    r.add_argument("--vc", action="append", required=True)
    r.add_argument("--out", required=True)
    r.set_defaults(fn=cmd_credential_present)
    r = cred.add_parser("verify")
    r.add_argument("vp")
    r.set_defaults(fn=cmd_credential_verify)

    cap = sub.add_parser("capsule", help="create, open and inspect capsules").add_subparsers(
        dest="action", required=True)
    r = cap.add_parser("create")
    r.add_argument("--vp", required=True)
    r.add_argument("--creator", required=True, help="data owner identity")
    r.add_argument("--recipients", nargs="+", metavar="DID")
    r.add_argument("--attrs", action="append", metavar="DID=ATTR[,ATTR...]")
    g = r.add_mutually_exclusive_group(required=True)
    g.add_argument("--policy-from", metavar="DID")
    g.add_argument("--policy")
    r.add_argument("--out", required=True)
    r.set_defaults(fn=cmd_capsule_create)
    r = cap.add_parser("open")
    r.add_argument("--capsule", required=True)
    r.add_argument("--identity", required=True)
    r.add_argument("--slot", metavar="DID", help="key slot to use (default: the identity's)")
    r.add_argument("--pk", help="ABE public parameters (default: the home authority)")
    r.add_argument("--now", help="ISO-8601 clock for release checks")
    r.add_argument("--vp-out")
    r.add_argument("--policy-out")
    r.set_defaults(fn=cmd_capsule_open)
    r = cap.add_parser("inspect")
    r.add_argument("--capsule", required=True)
    r.set_defaults(fn=cmd_capsule_inspect)

    demo = sub.add_parser("demo", help="scripted scenarios").add_subparsers(
        dest="action", required=True)
    r = demo.add_parser("tax")
    r.add_argument("--dir", help="write artifacts here instead of a temporary directory")
    r.add_argument("--trace", action="store_true", help="print the protocol transcript")
    r.set_defaults(fn=cmd_demo_tax)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    ctx = None
    try:
        ctx = Context(args)
        status = args.fn(ctx, args)
        return 0 if status is None else status
    except (DataCapsuleError, CliError) as exc:
        code = exc.code
        stage = getattr(exc, "stage", None)
        if args.format == "json":
            payload = {"error": code, "message": str(exc)}
            if stage:
                payload["stage"] = stage
            sys.stdout.write(canonical_json(payload).decode("utf-8") + "\n")
        else:
            where = f" (stage {stage})" if stage else ""
            sys.stderr.write(f"error: {code}{where}: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
