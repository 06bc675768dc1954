import json
import os
import subprocess
import sys

import pytest

from datacapsule.cli import main
from datacapsule.lsss import And, Leaf
from datacapsule.policy import render_policy

from conftest import GOLDEN


class Cli:
    def __init__(self, home, capsys):
        self.home, self.capsys = home, capsys

    def __call__(self, *argv, json_mode=False, seed=7):
        pre = ["--home", str(self.home), "--seed", str(seed)]
        if json_mode:
            pre += ["--format", "json"]
        code = main(pre + [str(a) for a in argv])
        out, err = self.capsys.readouterr()
        return code, out, err

    def json(self, *argv):
        code, out, _ = self(*argv, json_mode=True)
        return code, json.loads(out)


@pytest.fixture
def cli(tmp_path, capsys):
    return Cli(tmp_path / "home", capsys)


@pytest.fixture
def world(cli, tmp_path):
    """A registry with a provider, an issuer and a citizen, plus a signed VP."""
    cli("registry", "init")
    for name in ("sp", "issuer", "citizen", "stranger"):
        assert cli("identity", "new", name, "--register")[0] == 0
    policy = tmp_path / "policy.xml"
    policy.write_bytes(render_policy(And(Leaf("dept:tax"), Leaf("role:clerk")), "p"))
    assert cli("registry", "publish-policy", "--identity", "sp", "--policy", policy)[0] == 0
    vc, vp = tmp_path / "vc.json", tmp_path / "vp.json"
    assert cli("credential", "issue", "--issuer", "issuer", "--subject", "citizen",
               "--claim", "given_name=Ada", "--claim", "home_address=London", "--out", vc)[0] == 0
    assert cli("credential", "present", "--holder", "citizen", "--vc", vc, "--out", vp)[0] == 0
    return {"policy": policy, "vc": vc, "vp": vp, "dir": tmp_path,
            "sp": cli.json("identity", "show", "sp")[1]["did"]}


def create(cli, world, attrs="dept:tax,role:clerk", out="c"):
    return cli("capsule", "create", "--vp", world["vp"], "--creator", "citizen",
               "--recipients", "sp", "--attrs", f"sp={attrs}", "--policy-from", "sp",
               "--out", world["dir"] / out)


def test_init_then_verify(cli):
    assert cli("registry", "init")[0] == 0
    code, out, _ = cli("registry", "verify")
    assert code == 0 and out.startswith("ok")


def test_lookup_unknown_is_not_an_error(cli):
    cli("registry", "init")
    code, out, _ = cli("registry", "lookup", "did:dc:deadbeef" + "0" * 24)
    assert (code, out) == (0, "not-found\n")


def test_identity_names_resolve_to_distinct_dids(cli, world):
    dids = {cli.json("identity", "show", n)[1]["did"] for n in ("sp", "issuer", "citizen", "stranger")}
    assert len(dids) == 4
    code, obj = cli.json("registry", "lookup", "sp")
    assert obj["result"] == "found" and obj["ddo"]["did"] == world["sp"]


def test_seeded_identities_are_reproducible(tmp_path, capsys):
    dids = []
    for run in ("a", "b"):
        c = Cli(tmp_path / run, capsys)
        c("registry", "init")
        c("identity", "new", "x")
        dids.append(c.json("identity", "show", "x")[1]["did"])
    assert dids[0] == dids[1]


def test_create_open_roundtrip(cli, world):
    assert create(cli, world)[0] == 0
    cap = world["dir"] / "c.dcap"
    code, obj = cli.json("capsule", "open", "--capsule", cap, "--identity", "sp",
                         "--vp-out", world["dir"] / "vp-out.json",
                         "--policy-out", world["dir"] / "policy-out.xml")
    assert code == 0 and obj["result"] == "ok"
    assert (world["dir"] / "vp-out.json").read_bytes() == world["vp"].read_bytes()
    assert (world["dir"] / "policy-out.xml").read_bytes() == world["policy"].read_bytes()
    code, obj = cli.json("credential", "verify", world["dir"] / "vp-out.json")
    assert (code, obj["failures"]) == (0, [])


def test_open_with_wrong_identity(cli, world):
    create(cli, world)
    code, out, err = cli("capsule", "open", "--capsule", world["dir"] / "c.dcap",
                         "--identity", "stranger")
    assert code == 1 and "UnsealFailure" in err and out == ""
    # naming the slot explicitly fails the same way
    code, obj = cli.json("capsule", "open", "--capsule", world["dir"] / "c.dcap",
                         "--identity", "stranger", "--slot", "sp")
    assert (code, obj["error"], obj["stage"]) == (1, "UnsealFailure", "unseal")


def test_open_unauthorized_prints_no_plaintext(cli, world):
    create(cli, world, attrs="dept:tax")
    code, out, err = cli("capsule", "open", "--capsule", world["dir"] / "c.dcap", "--identity", "sp")
    assert code == 1 and out == "" and "NotAuthorized" in err


def test_inspect_needs_no_keys(cli, world, tmp_path):
    create(cli, world)
    cap = world["dir"] / "c.dcap"
    empty_home = Cli(tmp_path / "elsewhere", cli.capsys)
    code, obj = empty_home.json("capsule", "inspect", "--capsule", cap)
    assert code == 0
    assert obj["recipients"] == [world["sp"]]
    assert obj["metadata"]["dc_version"] == "1.0"


TABLE = [
    # (argv, exit code, error code)
    (["registry", "publish-policy", "--identity", "sp", "--policy", "{bad}"], 1, "MalformedPolicy"),
    (["registry", "register-did", "--identity", "sp"], 1, "DuplicateDid"),
    (["registry", "publish-policy", "--did", "did:dc:" + "0" * 32, "--policy", "{policy}"], 1,
     "UnknownPublisher"),
    (["registry", "fetch-policy", "issuer"], 0, None),
    (["identity", "new", "sp"], 1, "IdentityExists"),
    (["identity", "show", "nobody"], 1, "UnknownIdentity"),
    (["credential", "issue", "--issuer", "issuer", "--subject", "citizen", "--out", "{dir}/x"], 1,
     "EmptyClaims"),
    (["credential", "issue", "--issuer", "issuer", "--subject", "citizen", "--claim", "novalue",
      "--out", "{dir}/x"], 1, "BadClaim"),
    (["credential", "verify", "{policy}"], 1, None),
    (["capsule", "create", "--vp", "{vp}", "--creator", "citizen", "--recipients", "sp",
      "--attrs", "sp=a", "--policy-from", "issuer", "--out", "{dir}/x"], 1, "PolicyNotFound"),
    (["capsule", "create", "--vp", "{vp}", "--creator", "citizen", "--recipients",
      "did:dc:" + "1" * 32, "--attrs", "did:dc:" + "1" * 32 + "=a", "--policy", "{policy}",
      "--out", "{dir}/x"], 1, "UnresolvableRecipient"),
    (["capsule", "create", "--vp", "{vp}", "--creator", "citizen", "--recipients", "sp",
      "--policy", "{policy}", "--out", "{dir}/x"], 1, "BadAttrs"),
    (["capsule", "inspect", "--capsule", "{policy}"], 1, "Malformed"),
    (["capsule", "inspect", "--capsule", "{dir}/missing.dcap"], 1, "FileError"),
    (["capsule", "open", "--capsule", "{dir}/c.dcap", "--identity", "sp", "--now", "yesterday"], 1,
     "BadTime"),
]


@pytest.mark.parametrize("argv,status,error", TABLE, ids=[" ".join(t[0][:2]) + f"-{t[2]}" for t in TABLE])
def test_exit_code_table(cli, world, argv, status, error):
    bad = world["dir"] / "bad.xml"
    bad.write_bytes(b"<Policy")
    create(cli, world)
    subs = {"{bad}": str(bad), "{policy}": str(world["policy"]), "{vp}": str(world["vp"]),
            "{dir}": str(world["dir"])}
    argv = [_fill(a, subs) for a in argv]
    code, out, _ = cli(*argv, json_mode=True)
    assert code == status
    obj = json.loads(out.splitlines()[0]) if out.strip() else {}
    if error:
        assert obj["error"] == error


def _fill(arg, subs):
    for k, v in subs.items():
        arg = arg.replace(k, v)
    return arg


@pytest.mark.parametrize("argv", [[], ["registry"], ["capsule", "open"], ["bogus"],
                                  ["--format", "xml", "registry", "init"]])
def test_usage_errors_exit_2(cli, argv):
    with pytest.raises(SystemExit) as err:
        main(argv)
    assert err.value.code == 2


def test_json_mode_is_canonical(cli, world):
    create(cli, world)
    commands = [
        ["registry", "verify"], ["registry", "lookup", "sp"], ["registry", "fetch-policy", "sp"],
        ["identity", "show", "sp"], ["credential", "verify", world["vp"]],
        ["capsule", "inspect", "--capsule", world["dir"] / "c.dcap"],
        ["capsule", "open", "--capsule", world["dir"] / "c.dcap", "--identity", "sp"],
    ]
    for argv in commands:
        code, out, _ = cli(*argv, json_mode=True)
        assert code == 0
        obj = json.loads(out)
        assert out == json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False) + "\n"


def test_tampered_ledger_fails_verify(cli, world):
    path = cli.home / "ledger.ndjson"
    lines = path.read_bytes().splitlines(keepends=True)
    lines[1], lines[2] = lines[2], lines[1]
    path.write_bytes(b"".join(lines))
    code, obj = cli.json("registry", "verify")
    assert (code, obj["first_bad_seq"], obj["error"]) == (1, 2, "LedgerCorrupted")


def test_demo_tax(cli, tmp_path):
    code, out, _ = cli("demo", "tax", seed=1)
    assert code == 0 and "all outcomes as expected" in out
    code, out, _ = cli("demo", "tax", "--trace", seed=1)
    assert code == 0 and out.encode() == (GOLDEN / "transcript.ndjson").read_bytes()


def test_demo_rerun_in_fresh_directories(cli, tmp_path):
    for d in ("one", "two"):
        assert cli("demo", "tax", "--dir", tmp_path / d, seed=1)[0] == 0
    for name in ("personal-data.dcap", "financial-data.dcap", "ledger.ndjson", "transcript.ndjson"):
        assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()
    # the same directory again is refused
    code, _, err = cli("demo", "tax", "--dir", tmp_path / "one", seed=1)
    assert code == 1 and "ProtocolError" in err


def test_demo_directory_is_a_cli_home(cli, tmp_path):
    cli("demo", "tax", "--dir", tmp_path / "d", seed=1)
    home = Cli(tmp_path / "d", cli.capsys)
    code, obj = home.json("capsule", "open", "--capsule", tmp_path / "d" / "personal-data.dcap",
                          "--identity", "tax-front-office")
    assert code == 0 and "Lovelace" in obj["vp"]
    code, obj = home.json("capsule", "open", "--capsule", tmp_path / "d" / "financial-data.dcap",
                          "--identity", "tax-audit", "--now", "2027-06-01T00:00:00Z")
    assert code == 0 and "gross_income" in obj["vp"]


def test_console_entry_point(tmp_path):
    env = {**os.environ, "DC_HOME": str(tmp_path / "h")}
    proc = subprocess.run([sys.executable, "-m", "datacapsule", "registry", "init"],
                          capture_output=True, text=True, env=env)
    assert proc.returncode == 0 and (tmp_path / "h" / "ledger.ndjson").exists()
