#!/usr/bin/env python3
"""Compiled kernels against their pure-Python fallbacks.

    python benchmarks/bench_kernels.py [--repeat N] [--json]

GF(p) kernels: the Cython ``_gf_ext`` against ``_gf_py`` on LSSS matrices
of growing size. Pairings: RELIC's shared-final-exponentiation product,
the same product one pairing at a time, and py_ecc. Then ABE encrypt and
decrypt per backend.
"""

from __future__ import annotations

import argparse
import json
import random
import statistics
import time

from datacapsule import abe, lsss
from datacapsule._kernels import _gf_py
from datacapsule.lsss import Leaf, conjoin, disjoin
from datacapsule.pairing import PairingSuite, register_suite
from datacapsule.pairing._fields import R
from datacapsule.pairing._pure import PureBackend

try:
    from datacapsule._kernels import _gf_ext
except ImportError:
    _gf_ext = None
try:
    from datacapsule.pairing._relic import RelicBackend
except ImportError:
    RelicBackend = None


def timeit(fn, repeat):
    fn()
    runs = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        runs.append(time.perf_counter() - t)
    return statistics.median(runs)


def and_chain(n):
    return conjoin(*(Leaf(f"a{i}") for i in range(n)))


def or_of_ands(n):
    # 2n rows, 2 columns
    return disjoin(*(conjoin(Leaf(f"a{i}"), Leaf(f"b{i}")) for i in range(n)))


def bench_gf(repeat):
    rng = random.Random(1)
    kernels = [("python", _gf_py)] + ([("cython", _gf_ext)] if _gf_ext else [])
    for label, build in (("and-chain", and_chain), ("or-of-ands", or_of_ands)):
        for n in (4, 16, 64):
            s = lsss.compile(build(n), R)
            m = [list(r) for r in s.matrix]
            v = [rng.randrange(R) for _ in range(s.width)]
            case = f"{label} {len(m)}x{s.width}"
            for name, mod in kernels:
                yield "solve_left", case, name, timeit(lambda: mod.solve_left(m, s.width, R), repeat)
                yield "matvec", case, name, timeit(lambda: mod.matvec(m, v, R), repeat)


def backends():
    if RelicBackend is not None:
        yield "relic", RelicBackend()
    yield "py_ecc", PureBackend()


def bench_pairing(repeat):
    rng = random.Random(2)
    for name, be in backends():
        suite = register_suite(PairingSuite(f"bench-{name}", be), check=False)
        reps = repeat if name == "relic" else max(1, repeat // 20)
        for k in (2, 5, 9):
            pairs = [(be.g1_mul(suite.g1, suite.random_scalar(rng)),
                      be.g2_mul(suite.g2, suite.random_scalar(rng))) for _ in range(k)]
            if name == "relic":
                if be.multi_pairing:
                    yield "pair_product", f"{k} pairs", "relic-multi", timeit(lambda: be.pair_product(pairs), reps)
                yield "pair_product", f"{k} pairs", "relic-seq", timeit(lambda: be.pair_product_sequential(pairs), reps)
            else:
                yield "pair_product", f"{k} pairs", name, timeit(lambda: be.pair_product(pairs), reps)

        pk, msk = abe.setup(suite.id, random.Random(3))
        for leaves in (1, 4):
            structure = lsss.compile(and_chain(leaves), R)
            ct, _ = abe.encrypt(pk, structure, rng)
            key = abe.generate_keys(pk, msk, {f"a{i}" for i in range(leaves)}, rng)
            case = f"{leaves}-leaf AND"
            yield "abe.encrypt", case, name, timeit(lambda: abe.encrypt(pk, structure, rng), reps)
            yield "abe.dec", case, name, timeit(lambda: abe.dec(pk, ct, key), reps)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=40)
    ap.add_argument("--json", action="store_true", help="one JSON object per line")
    ap.add_argument("--only", choices=("gf", "pairing"))
    args = ap.parse_args(argv)

    rows = []
    if args.only != "pairing":
        rows += bench_gf(args.repeat)
    if args.only != "gf":
        rows += bench_pairing(args.repeat)

    if args.json:
        for op, case, impl, sec in rows:
            print(json.dumps({"op": op, "case": case, "impl": impl, "seconds": sec}))
        return 0
    # relative: time over the first implementation listed for that case
    print(f"{'op':<14}{'case':<22}{'impl':<13}{'time':>12}{'relative':>10}")
    baseline = {}
    for op, case, impl, sec in rows:
        ref = baseline.setdefault((op, case), sec)
        print(f"{op:<14}{case:<22}{impl:<13}{sec * 1e3:>9.3f} ms{sec / ref:>10.2f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
