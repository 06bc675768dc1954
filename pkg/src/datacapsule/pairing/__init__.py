"""Pairing suites.

A suite bundles the groups G1, G2, GT of prime order ``order``, their fixed
generators, the map ``e: G1 x G2 -> GT`` and a hash from attribute strings
into G1. Arithmetic runs on a backend chosen at import: the compiled RELIC
binding when importable, otherwise pure-Python py_ecc. Set
``DATACAPSULE_PAIRING=python`` (or ``relic``) to force one.

Element placement used by the ABE scheme: attribute hashes, key components
K and K_x, and ciphertext row components C_i live in G1; the ciphertext
components C' and D_i and the key component L live in G2.
"""

import os
import random
from functools import lru_cache

from ..errors import UnknownSuite
from . import _fields
from ._fields import R


def _load_backend(name: str | None = None):
    name = name or os.environ.get("DATACAPSULE_PAIRING", "")
    if name == "python":
        from ._pure import PureBackend

        return PureBackend()
    try:
        from ._relic import RelicBackend
    except ImportError:
        if name == "relic":
            raise
        from ._pure import PureBackend

        return PureBackend()
    return RelicBackend()


class PairingSuite:
    """BLS12-381 with RFC 9380 hashing (BLS12381G1_XMD:SHA-256_SSWU_RO_)."""

    attribute_dst = b"DC-ABE-ATTR-v1"

    def __init__(self, suite_id: str, backend):
        self.id = suite_id
        self.order = R
        self.backend = backend
        self.g1 = backend.g1_gen
        self.g2 = backend.g2_gen
        self.hash_attribute = lru_cache(maxsize=8192)(self._hash_attribute)

    def __repr__(self) -> str:
        return f"PairingSuite({self.id!r}, backend={self.backend.name!r})"

    def random_scalar(self, rng) -> int:
        return rng.randrange(1, self.order)

    def _hash_attribute(self, attribute: str):
        return self.backend.hash_to_g1(attribute.encode("utf-8"), self.attribute_dst)

    def pair(self, p, q):
        return self.backend.pair(p, q)

    # canonical bytes
    def g1_to_bytes(self, pt) -> bytes:
        return _fields.encode_g1(self.backend.g1_affine(pt))

    def g1_from_bytes(self, data: bytes):
        return self.backend.g1_from_affine(_fields.decode_g1(data))

    def g2_to_bytes(self, pt) -> bytes:
        return _fields.encode_g2(self.backend.g2_affine(pt))

    def g2_from_bytes(self, data: bytes):
        return self.backend.g2_from_affine(_fields.decode_g2(data))

    def gt_to_bytes(self, x) -> bytes:
        return _fields.encode_gt(self.backend.gt_coeffs(x))

    def gt_from_bytes(self, data: bytes):
        return self.backend.gt_from_coeffs(_fields.decode_gt(data))

    def self_test(self, trials: int = 2, rng=None) -> None:
        """Check bilinearity on random exponents and non-degeneracy; raise on failure."""
        rng = rng or random.SystemRandom()
        be = self.backend
        base = be.pair(self.g1, self.g2)
        if be.gt_eq(base, be.gt_one()):
            raise AssertionError(f"{self.id}: e(g1, g2) is the identity")
        for _ in range(trials):
            a, b = self.random_scalar(rng), self.random_scalar(rng)
            lhs = be.pair(be.g1_mul(self.g1, a), be.g2_mul(self.g2, b))
            if not be.gt_eq(lhs, be.gt_pow(base, a * b)):
                raise AssertionError(f"{self.id}: bilinearity check failed")


DEFAULT_SUITE = "bls12-381"
_ALIASES = {"suite-128": DEFAULT_SUITE}
_SUITES: dict[str, PairingSuite] = {}


def register_suite(suite: PairingSuite, *, check: bool = True) -> PairingSuite:
    if check:
        suite.self_test(trials=1)
    _SUITES[suite.id] = suite
    return suite


def get_suite(suite_id: str = DEFAULT_SUITE) -> PairingSuite:
    suite_id = _ALIASES.get(suite_id, suite_id)
    try:
        return _SUITES[suite_id]
    except KeyError:
        raise UnknownSuite(f"unknown pairing suite {suite_id!r}") from None


def available_suites() -> list[str]:
    return sorted(_SUITES)


register_suite(PairingSuite(DEFAULT_SUITE, _load_backend()))

__all__ = ["DEFAULT_SUITE", "PairingSuite", "available_suites", "get_suite", "register_suite"]
