"""Pure-Python BLS12-381 backend on top of py_ecc (slow, dependency-light).

py_ecc's optimal ate pairing differs from the conventional one by a fixed
exponent: e_pyecc(P, Q) ** -3 == e(P, Q). Results are normalized so both
backends agree bit-for-bit on GT.
"""

import hashlib

from py_ecc.bls.hash_to_curve import hash_to_G1
from py_ecc.optimized_bls12_381 import (
    FQ,
    FQ2,
    FQ12,
    G1,
    G2,
    Z1,
    Z2,
    add,
    b,
    b2,
    curve_order,
    eq,
    final_exponentiate,
    is_inf,
    is_on_curve,
    multiply,
    neg,
    normalize,
    pairing,
)

from ..errors import Malformed
from ._fields import P


def _fix(x):
    inv = x.inv()
    return inv * inv * inv


class PureBackend:
    name = "python"

    def __init__(self):
        self.g1_gen = G1
        self.g2_gen = G2

    # group operations
    def g1_mul(self, a, k):
        return multiply(a, k % curve_order)

    g2_mul = g1_mul

    def g1_add(self, a, c):
        return add(a, c)

    g2_add = g1_add

    def g1_neg(self, a):
        return neg(a)

    g2_neg = g1_neg

    def g1_eq(self, a, c):
        return eq(a, c)

    g2_eq = g1_eq

    def pair(self, p, q):
        if is_inf(p) or is_inf(q):
            return FQ12.one()
        return _fix(pairing(q, p))

    def pair_product(self, pairs):
        acc = FQ12.one()
        for p, q in pairs:
            if not (is_inf(p) or is_inf(q)):
                acc = acc * pairing(q, p, final_exponentiate=False)
        return _fix(final_exponentiate(acc))

    def gt_mul(self, x, y):
        return x * y

    def gt_inv(self, x):
        return x.inv()

    def gt_pow(self, x, k):
        return x ** (k % curve_order)

    def gt_one(self):
        return FQ12.one()

    def gt_eq(self, x, y):
        return x == y

    # conversions
    def g1_affine(self, a):
        if is_inf(a):
            return None
        x, y = normalize(a)
        return (x.n, y.n)

    def g1_from_affine(self, aff):
        if aff is None:
            return Z1
        pt = (FQ(aff[0]), FQ(aff[1]), FQ.one())
        if not is_on_curve(pt, b) or not is_inf(multiply(pt, curve_order)):
            raise Malformed("G1 point outside the prime-order subgroup")
        return pt

    def g2_affine(self, a):
        if is_inf(a):
            return None
        x, y = normalize(a)
        return (tuple(x.coeffs), tuple(y.coeffs))

    def g2_from_affine(self, aff):
        if aff is None:
            return Z2
        pt = (FQ2(list(aff[0])), FQ2(list(aff[1])), FQ2.one())
        if not is_on_curve(pt, b2) or not is_inf(multiply(pt, curve_order)):
            raise Malformed("G2 point outside the prime-order subgroup")
        return pt

    def gt_coeffs(self, x):
        # flat basis of FQ12 (w^12 = 2 w^6 - 2) to the tower basis: u = w^6 - 1, v = w^2
        c = x.coeffs
        out = []
        for j in range(2):
            for i in range(3):
                k = 2 * i + j
                out += [(c[k] + c[k + 6]) % P, c[k + 6] % P]
        return out

    def gt_from_coeffs(self, coeffs):
        flat = [0] * 12
        for j in range(2):
            for i in range(3):
                k = 2 * i + j
                a, bb = coeffs[j * 6 + 2 * i], coeffs[j * 6 + 2 * i + 1]
                flat[k] = (a - bb) % P
                flat[k + 6] = bb
        x = FQ12(flat)
        if x == FQ12.zero() or x ** curve_order != FQ12.one():
            raise Malformed("GT element outside the order-r subgroup")
        return x

    def hash_to_g1(self, msg: bytes, dst: bytes):
        return hash_to_G1(msg, dst, hashlib.sha256)
