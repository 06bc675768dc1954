"""Ciphertext-policy ABE (Waters' LSSS construction) used as a KEM.

``encrypt`` returns the ciphertext together with the encapsulated element
``e(g1, g2)^(alpha s)`` of GT; callers derive a symmetric key from its
canonical bytes. Group placement (see :mod:`datacapsule.pairing`):

    PK   g1, g2, g1^a, e(g1, g2)^alpha
    MSK  g1^alpha
    key  K = g1^alpha g1^(a t), L = g2^t, K_x = H(x)^t
    CT   C' = g2^s, C_i = g1^(a lambda_i) H(rho(i))^(-r_i), D_i = g2^(r_i)
"""

from __future__ import annotations

import random
from collections.abc import Iterable, Mapping
from dataclasses import dataclass

from . import lsss
from ._canonical import Reader, Writer
from .errors import EmptyAttributeSet, Malformed, NotAuthorized, SuiteMismatch
from .lsss import LsssStructure
from .pairing import PairingSuite, get_suite


def _rng(rng):
    return rng if rng is not None else random.SystemRandom()


class _Serializable:
    def __eq__(self, other):
        return type(other) is type(self) and self.to_bytes() == other.to_bytes()

    def __hash__(self):
        return hash(self.to_bytes())


def _read_suite(r: Reader) -> PairingSuite:
    try:
        return get_suite(r.text())
    except Exception as exc:
        raise Malformed(f"bad suite identifier: {exc}") from None


@dataclass(frozen=True, eq=False)
class PublicParams(_Serializable):
    suite: PairingSuite
    g1: object
    g2: object
    g1_a: object
    egg_alpha: object

    def to_bytes(self) -> bytes:
        s = self.suite
        return (
            Writer().text(s.id)
            .put(s.g1_to_bytes(self.g1)).put(s.g2_to_bytes(self.g2))
            .put(s.g1_to_bytes(self.g1_a)).put(s.gt_to_bytes(self.egg_alpha))
            .getvalue()
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "PublicParams":
        r = Reader(data)
        s = _read_suite(r)
        g1, g2 = s.g1_from_bytes(r.get()), s.g2_from_bytes(r.get())
        pk = cls(s, g1, g2, s.g1_from_bytes(r.get()), s.gt_from_bytes(r.get()))
        r.done()
        # generators are fixed per suite
        if not (s.backend.g1_eq(g1, s.g1) and s.backend.g2_eq(g2, s.g2)):
            raise SuiteMismatch("public parameters use non-standard generators")
        return pk


@dataclass(frozen=True, eq=False)
class MasterKey(_Serializable):
    suite: PairingSuite
    g1_alpha: object

    def to_bytes(self) -> bytes:
        return Writer().text(self.suite.id).put(self.suite.g1_to_bytes(self.g1_alpha)).getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "MasterKey":
        r = Reader(data)
        s = _read_suite(r)
        msk = cls(s, s.g1_from_bytes(r.get()))
        r.done()
        return msk

    def matches(self, pk: PublicParams) -> bool:
        if self.suite.id != pk.suite.id:
            return False
        e = self.suite.pair(self.g1_alpha, pk.g2)
        return self.suite.backend.gt_eq(e, pk.egg_alpha)


@dataclass(frozen=True, eq=False)
class UserKey(_Serializable):
    suite: PairingSuite
    K: object
    L: object
    components: Mapping[str, object]
    recipient_did: str | None = None

    @property
    def attributes(self) -> frozenset[str]:
        return frozenset(self.components)

    def to_bytes(self) -> bytes:
        s = self.suite
        w = Writer().text(s.id).text(self.recipient_did or "")
        w.put(s.g1_to_bytes(self.K)).put(s.g2_to_bytes(self.L)).u32(len(self.components))
        for attr in sorted(self.components):
            w.text(attr).put(s.g1_to_bytes(self.components[attr]))
        return w.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "UserKey":
        r = Reader(data)
        s = _read_suite(r)
        did = r.text() or None
        K, L = s.g1_from_bytes(r.get()), s.g2_from_bytes(r.get())
        count = r.u32()
        comps: dict[str, object] = {}
        prev = None
        for _ in range(count):
            attr = r.text()
            if not attr or (prev is not None and attr <= prev):
                raise Malformed("key attributes must be nonempty, sorted and unique")
            comps[attr] = s.g1_from_bytes(r.get())
            prev = attr
        r.done()
        return cls(s, K, L, comps, did)


@dataclass(frozen=True, eq=False)
class Ciphertext(_Serializable):
    suite: PairingSuite
    structure: LsssStructure
    c_prime: object
    rows: tuple[tuple[object, object], ...]

    def to_bytes(self) -> bytes:
        s = self.suite
        w = Writer().text(s.id).put(self.structure.to_bytes()).put(s.g2_to_bytes(self.c_prime))
        w.u32(len(self.rows))
        for c, d in self.rows:
            w.put(s.g1_to_bytes(c)).put(s.g2_to_bytes(d))
        return w.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "Ciphertext":
        r = Reader(data)
        s = _read_suite(r)
        structure = LsssStructure.from_bytes(r.get(), s.order)
        c_prime = s.g2_from_bytes(r.get())
        n = r.u32()
        if n != structure.rows:
            raise Malformed("ciphertext row count does not match its access structure")
        rows = tuple((s.g1_from_bytes(r.get()), s.g2_from_bytes(r.get())) for _ in range(n))
        r.done()
        return cls(s, structure, c_prime, rows)


def setup(suite_id: str = "bls12-381", rng=None) -> tuple[PublicParams, MasterKey]:
    suite = get_suite(suite_id)
    rng = _rng(rng)
    be = suite.backend
    alpha, a = suite.random_scalar(rng), suite.random_scalar(rng)
    pk = PublicParams(
        suite,
        suite.g1,
        suite.g2,
        be.g1_mul(suite.g1, a),
        be.gt_pow(suite.pair(suite.g1, suite.g2), alpha),
    )
    return pk, MasterKey(suite, be.g1_mul(suite.g1, alpha))


def generate_keys(
    pk: PublicParams,
    msk: MasterKey,
    attrs: Iterable[str],
    rng=None,
    *,
    recipient_did: str | None = None,
) -> UserKey:
    attrs = frozenset(attrs)
    if not attrs or any(not isinstance(a, str) or not a for a in attrs):
        raise EmptyAttributeSet("a key needs at least one nonempty attribute")
    if msk.suite.id != pk.suite.id:
        raise SuiteMismatch("master key and public parameters use different suites")
    suite = pk.suite
    be = suite.backend
    t = suite.random_scalar(_rng(rng))
    K = be.g1_add(msk.g1_alpha, be.g1_mul(pk.g1_a, t))
    L = be.g2_mul(pk.g2, t)
    comps = {x: be.g1_mul(suite.hash_attribute(x), t) for x in sorted(attrs)}
    return UserKey(suite, K, L, comps, recipient_did)


def encrypt(pk: PublicParams, structure: LsssStructure, rng=None) -> tuple[Ciphertext, object]:
    """Encapsulate under ``structure``; returns (ciphertext, GT element)."""
    suite = pk.suite
    if structure.p != suite.order:
        raise SuiteMismatch("access structure modulus differs from the group order")
    rng = _rng(rng)
    be = suite.backend
    s = suite.random_scalar(rng)
    rows = []
    for i, lam in lsss.share(structure, s, rng):
        r_i = suite.random_scalar(rng)
        h = suite.hash_attribute(structure.rho[i - 1])
        c = be.g1_add(be.g1_mul(pk.g1_a, lam), be.g1_mul(h, -r_i))
        rows.append((c, be.g2_mul(pk.g2, r_i)))
    ct = Ciphertext(suite, structure, be.g2_mul(pk.g2, s), tuple(rows))
    return ct, be.gt_pow(pk.egg_alpha, s)


def dec(pk: PublicParams, ct: Ciphertext, key: UserKey):
    """Recover the encapsulated GT element, or raise NotAuthorized.

    Evaluates e(K, C') / (e(prod C_i^w_i, L) * prod e(K_rho(i)^w_i, D_i))
    as a single pairing product over rows with nonzero coefficient, the
    divisions folded into negated G1 arguments.
    """
    suite = pk.suite
    if ct.suite.id != suite.id or key.suite.id != suite.id:
        raise SuiteMismatch("ciphertext, key and public parameters use different suites")
    rows = lsss.satisfying_rows(ct.structure, key.components)
    if rows is None:
        raise NotAuthorized("key attributes do not satisfy the access structure")
    omega = lsss.reconstruct_coefficients(ct.structure, rows)
    be = suite.backend
    acc_c = None
    pairs = [(key.K, ct.c_prime)]
    for i, w in omega.items():
        if not w:
            continue
        c, d = ct.rows[i - 1]
        k_x = key.components[ct.structure.rho[i - 1]]
        if w != 1:
            c = be.g1_mul(c, w)
            k_x = be.g1_mul(k_x, w)
        acc_c = c if acc_c is None else be.g1_add(acc_c, c)
        pairs.append((be.g1_neg(k_x), d))
    pairs.append((be.g1_neg(acc_c), key.L))
    return be.pair_product(pairs)
