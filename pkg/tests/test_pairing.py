import hashlib
import random

import pytest
from py_ecc.bls.hash_to_curve import hash_to_G1
from py_ecc.optimized_bls12_381 import normalize

from datacapsule.errors import Malformed, UnknownSuite
from datacapsule.pairing import PairingSuite, available_suites, get_suite
from datacapsule.pairing import _fields
from datacapsule.pairing._pure import PureBackend

try:
    from datacapsule.pairing._relic import RelicBackend
except ImportError:
    RelicBackend = None

# zcash-format compressed generators
G1_GEN = bytes.fromhex(
    "97f1d3a73197d7942695638c4fa9ac0fc3688c4f9774b905a14e3a3f171bac586c55e83ff97a1aeffb3af00adb22c6bb"
)
G2_GEN = bytes.fromhex(
    "93e02b6052719f607dacd3a088274f65596bd0d09920b61ab5da61bbdc7f5049334cf11213945d57e5ac7d055d042b7e"
    "024aa2b2f08f0a91260805272dc51051c6e47ad4fa403b02b4510b647ae3d1770bac0326a805bbefd48056c8c121bdb8"
)

SUITES = [PairingSuite("bls12-381", PureBackend())]
if RelicBackend is not None:
    SUITES.append(PairingSuite("bls12-381", RelicBackend()))


@pytest.fixture(params=SUITES, ids=lambda s: s.backend.name)
def any_suite(request):
    return request.param


def test_registry_of_suites():
    assert "bls12-381" in available_suites()
    assert get_suite("suite-128") is get_suite("bls12-381")
    with pytest.raises(UnknownSuite):
        get_suite("bn254")


def test_generator_encodings(any_suite):
    assert any_suite.g1_to_bytes(any_suite.g1) == G1_GEN
    assert any_suite.g2_to_bytes(any_suite.g2) == G2_GEN


def test_hash_to_curve_vector(any_suite):
    # RFC 9380 J.9.1, msg = ""
    dst = b"QUUX-V01-CS02-with-BLS12381G1_XMD:SHA-256_SSWU_RO_"
    pt = any_suite.backend.hash_to_g1(b"", dst)
    x, _ = any_suite.backend.g1_affine(pt)
    assert x == 0x052926ADD2207B76CA4FA57A8734416C8DC95E24501772C814278700EED6D1E4E8CF62D9C09DB0FAC349612B759E79A1


def test_attribute_hash_uses_domain_tag(suite):
    expected = normalize(hash_to_G1(b"dept:tax", b"DC-ABE-ATTR-v1", hashlib.sha256))
    x, y = suite.backend.g1_affine(suite.hash_attribute("dept:tax"))
    assert (x, y) == (expected[0].n, expected[1].n)


def test_bilinearity_and_nondegeneracy(any_suite):
    be = any_suite.backend
    base = be.pair(any_suite.g1, any_suite.g2)
    assert not be.gt_eq(base, be.gt_one())
    rng = random.Random(1)
    for _ in range(3):
        a, b = any_suite.random_scalar(rng), any_suite.random_scalar(rng)
        lhs = be.pair(be.g1_mul(any_suite.g1, a), be.g2_mul(any_suite.g2, b))
        assert be.gt_eq(lhs, be.gt_pow(base, a * b))


def test_pair_product_matches_individual(any_suite):
    be = any_suite.backend
    rng = random.Random(2)
    pairs = [(be.g1_mul(any_suite.g1, any_suite.random_scalar(rng)),
              be.g2_mul(any_suite.g2, any_suite.random_scalar(rng))) for _ in range(3)]
    expected = be.gt_one()
    for p, q in pairs:
        expected = be.gt_mul(expected, be.pair(p, q))
    assert be.gt_eq(be.pair_product(pairs), expected)


@pytest.mark.skipif(RelicBackend is None, reason="RELIC backend unavailable")
def test_backends_encode_identically():
    pure, relic = SUITES
    rng = random.Random(3)
    for _ in range(3):
        a, b = pure.random_scalar(rng), pure.random_scalar(rng)
        g1p = pure.backend.g1_mul(pure.g1, a)
        g1r = relic.backend.g1_mul(relic.g1, a)
        assert pure.g1_to_bytes(g1p) == relic.g1_to_bytes(g1r)
        g2p = pure.backend.g2_mul(pure.g2, b)
        g2r = relic.backend.g2_mul(relic.g2, b)
        assert pure.g2_to_bytes(g2p) == relic.g2_to_bytes(g2r)
        gtp, gtr = pure.pair(g1p, g2p), relic.pair(g1r, g2r)
        assert pure.gt_to_bytes(gtp) == relic.gt_to_bytes(gtr)
        # decode on the other backend
        assert relic.backend.gt_eq(relic.gt_from_bytes(pure.gt_to_bytes(gtp)), gtr)
        assert relic.backend.g2_eq(relic.g2_from_bytes(pure.g2_to_bytes(g2p)), g2r)
    assert pure.g1_to_bytes(pure.hash_attribute("x")) == relic.g1_to_bytes(relic.hash_attribute("x"))


# frozen once both backends agreed on it
GT_BASE_SHA256 = "06fa588b89fdfb034dbc1c163ecb3dfac228f552b643c7294cc5f2c4dc170b84"


def test_gt_encoding_of_base_pairing_is_stable(any_suite):
    data = any_suite.gt_to_bytes(any_suite.pair(any_suite.g1, any_suite.g2))
    assert len(data) == 576
    assert hashlib.sha256(data).hexdigest() == GT_BASE_SHA256


def test_roundtrip_encodings(any_suite):
    be = any_suite.backend
    rng = random.Random(4)
    k = any_suite.random_scalar(rng)
    p = be.g1_mul(any_suite.g1, k)
    q = be.g2_mul(any_suite.g2, k)
    t = any_suite.pair(p, q)
    assert be.g1_eq(any_suite.g1_from_bytes(any_suite.g1_to_bytes(p)), p)
    assert be.g2_eq(any_suite.g2_from_bytes(any_suite.g2_to_bytes(q)), q)
    assert be.gt_eq(any_suite.gt_from_bytes(any_suite.gt_to_bytes(t)), t)


def test_infinity_encoding(any_suite):
    be = any_suite.backend
    zero = be.g1_add(any_suite.g1, be.g1_neg(any_suite.g1))
    data = any_suite.g1_to_bytes(zero)
    assert data == b"\xc0" + bytes(47)
    assert be.g1_eq(any_suite.g1_from_bytes(data), zero)


@pytest.mark.parametrize("mutate", [
    lambda b: b[:-1],
    lambda b: bytes([b[0] & 0x7F]) + b[1:],          # uncompressed flag
    lambda b: b"\xc0" + b"\x01" + b[2:],             # infinity with payload
    lambda b: bytes([b[0] | 0x1F]) + b"\xff" * 47,   # x >= p
])
def test_g1_decoding_rejects(any_suite, mutate):
    with pytest.raises(Malformed):
        any_suite.g1_from_bytes(mutate(G1_GEN))


def test_g1_decoding_rejects_off_curve(any_suite):
    # find an x with no curve point
    x = 1
    while _fields.fp_sqrt((x ** 3 + 4) % _fields.P) is not None:
        x += 1
    data = bytearray(x.to_bytes(48, "big"))
    data[0] |= 0x80
    with pytest.raises(Malformed):
        any_suite.g1_from_bytes(bytes(data))


def test_gt_decoding_rejects_non_subgroup(any_suite):
    coeffs = [1] + [0] * 11
    coeffs[1] = 5
    with pytest.raises(Malformed):
        any_suite.gt_from_bytes(_fields.encode_gt(coeffs))


def test_self_test_runs(suite):
    suite.self_test(trials=1, rng=random.Random(5))
