"""Compiled BLS12-381 backend on RELIC (through petrelic)."""

import glob
import hashlib
import os

import petrelic
from petrelic.bindings import _FFI
from petrelic.multiplicative.pairing import G1, G2, GT, G1Element, G2Element, GTElement
from py_ecc.bls.hash_to_curve import hash_to_G1
from py_ecc.optimized_bls12_381 import normalize

from ..errors import Malformed
from ._fields import FP_BYTES, R

_W = FP_BYTES


def _bind_multi_pairing():
    """The compiled shared-final-exponentiation kernel, or None."""
    if os.environ.get("DATACAPSULE_PURE_KERNELS") == "1":
        return None
    try:
        from .._kernels import _pairing_ext
    except ImportError:
        return None
    libdir = os.path.join(os.path.dirname(os.path.dirname(petrelic.__file__)), "petrelic.libs")
    candidates = glob.glob(os.path.join(libdir, "librelic*.so*"))
    if not candidates:
        return None
    try:
        _pairing_ext.bind(candidates[0])
    except OSError:
        return None
    return _pairing_ext


def _addr(elem) -> int:
    return int(_FFI.cast("uintptr_t", elem.pt))


class RelicBackend:
    name = "relic"

    def __init__(self):
        self._kernel = _bind_multi_pairing()
        self._g1_size = _FFI.sizeof("g1_t")
        self._g2_size = _FFI.sizeof("g2_t")
        self.g1_gen = G1.generator()
        self.g2_gen = G2.generator()
        self._g1_zero = G1.neutral_element()
        self._g2_zero = G2.neutral_element()

    def g1_mul(self, a, k):
        return a ** (k % R)

    g2_mul = g1_mul

    def g1_add(self, a, c):
        return a * c

    g2_add = g1_add

    def g1_neg(self, a):
        return a.inverse()

    g2_neg = g1_neg

    def g1_eq(self, a, c):
        return a == c

    g2_eq = g1_eq

    def pair(self, p, q):
        return p.pair(q)

    @property
    def multi_pairing(self) -> bool:
        return self._kernel is not None

    def pair_product(self, pairs):
        if self._kernel is not None and pairs:
            out = GTElement()
            self._kernel.multi_pairing(
                _addr(out),
                [_addr(p) for p, _ in pairs],
                [_addr(q) for _, q in pairs],
                self._g1_size,
                self._g2_size,
            )
            return out
        return self.pair_product_sequential(pairs)

    def pair_product_sequential(self, pairs):
        acc = None
        for p, q in pairs:
            e = p.pair(q)
            acc = e if acc is None else acc * e
        return acc if acc is not None else GT.unity()

    def gt_mul(self, x, y):
        return x * y

    def gt_inv(self, x):
        return x.inverse()

    def gt_pow(self, x, k):
        return x ** (k % R)

    def gt_one(self):
        return GT.unity()

    def gt_eq(self, x, y):
        return x == y

    def g1_affine(self, a):
        if a.is_neutral_element():
            return None
        raw = a.to_binary(compressed=False)
        return (int.from_bytes(raw[1:1 + _W], "big"), int.from_bytes(raw[1 + _W:], "big"))

    def g1_from_affine(self, aff):
        if aff is None:
            return G1.neutral_element()
        pt = G1Element.from_binary(b"\x04" + aff[0].to_bytes(_W, "big") + aff[1].to_bytes(_W, "big"))
        if not pt.is_valid():
            raise Malformed("G1 point outside the prime-order subgroup")
        return pt

    def g2_affine(self, a):
        if a.is_neutral_element():
            return None
        raw = a.to_binary(compressed=False)
        v = [int.from_bytes(raw[1 + i * _W:1 + (i + 1) * _W], "big") for i in range(4)]
        return ((v[0], v[1]), (v[2], v[3]))

    def g2_from_affine(self, aff):
        if aff is None:
            return G2.neutral_element()
        (x0, x1), (y0, y1) = aff
        raw = b"\x04" + b"".join(c.to_bytes(_W, "big") for c in (x0, x1, y0, y1))
        pt = G2Element.from_binary(raw)
        if not pt.is_valid():
            raise Malformed("G2 point outside the prime-order subgroup")
        return pt

    def gt_coeffs(self, x):
        raw = x.to_binary(compressed=False)
        return [int.from_bytes(raw[i:i + _W], "big") for i in range(0, len(raw), _W)]

    def gt_from_coeffs(self, coeffs):
        x = GTElement.from_binary(b"".join(c.to_bytes(_W, "big") for c in coeffs))
        if not x.is_valid():
            raise Malformed("GT element outside the order-r subgroup")
        return x

    def hash_to_g1(self, msg: bytes, dst: bytes):
        x, y = normalize(hash_to_G1(msg, dst, hashlib.sha256))
        return self.g1_from_affine((x.n, y.n))
