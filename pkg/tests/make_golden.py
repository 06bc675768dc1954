"""Regenerate the golden fixtures in tests/golden.

Run only after a deliberate format change, then review the diff:

    python tests/make_golden.py
"""

import shutil
import sys
import tempfile
from pathlib import Path

from datacapsule.demo import run_tax_demo
from datacapsule.lsss import And, Leaf, Or
from datacapsule.policy import render_policy

GOLDEN = Path(__file__).parent / "golden"

# a formula exercising nesting, both gates and escaping
POLICY_FORMULA = Or(And(Leaf("dept:tax"), Leaf("role:front-office")),
                    And(Leaf("dept:audit"), Leaf('clearance:"high" & <up>')))


def main() -> int:
    GOLDEN.mkdir(exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        result = run_tax_demo(tmp, seed=1)
        if not result.ok:
            print("demo outcomes changed:", result.outcomes, file=sys.stderr)
            return 1
        for name in ("personal-data.dcap", "financial-data.dcap", "ledger.ndjson",
                     "transcript.ndjson"):
            shutil.copy(Path(tmp) / name, GOLDEN / name)
        shutil.copy(Path(tmp) / "authority" / "public.bin", GOLDEN / "public.bin")
        first = (Path(tmp) / "ledger.ndjson").read_bytes().splitlines(keepends=True)[0]
        (GOLDEN / "ledger-record.json").write_bytes(first)
    (GOLDEN / "policy.xml").write_bytes(render_policy(POLICY_FORMULA, "urn:dc:golden", "1.0",
                                                      description="golden rendering"))
    for path in sorted(GOLDEN.iterdir()):
        print(f"{path.stat().st_size:>8}  {path.name}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
