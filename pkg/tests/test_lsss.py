import random

import pytest
from hypothesis import given, settings, strategies as st

from datacapsule import lsss
from datacapsule.errors import InvalidFormula, Malformed, NotAuthorized
from datacapsule.lsss import And, Leaf, LsssStructure, Or
from datacapsule.pairing import get_suite

import oracles

P = get_suite().order
A, B, C, D = (Leaf(x) for x in "ABCD")


def test_single_leaf():
    s = lsss.compile(A, P)
    assert s.matrix == ((1,),)
    assert s.rho == ("A",)


def test_and_gate_matrix():
    s = lsss.compile(And(A, B), P)
    assert s.matrix == ((1, 1), (0, P - 1))
    assert s.rho == ("A", "B")


def test_or_of_and_matrix():
    s = lsss.compile(Or(And(A, B), C), P)
    assert s.matrix == ((1, 1), (0, P - 1), (1, 0))
    assert s.rho == ("A", "B", "C")


def test_nested_and_widths():
    # ((A AND B) AND (C OR D)): two AND nodes, so three columns; the outer
    # AND takes column 2, the inner one (visited later) column 3
    s = lsss.compile(And(And(A, B), Or(C, D)), 101)
    assert [[oracles.signed(v, 101) for v in row] for row in s.matrix] == [
        [1, 1, 1], [0, 0, -1], [0, -1, 0], [0, -1, 0],
    ]
    assert s.rho == ("A", "B", "C", "D")


def test_rejects_small_modulus():
    with pytest.raises(InvalidFormula):
        lsss.compile(A, 1)


def test_reserved_prefix_is_rejected():
    with pytest.raises(InvalidFormula):
        Leaf("challenge:abc")
    assert lsss.challenge_leaf("challenge:abc").attribute == "challenge:abc"


def test_empty_attribute_rejected():
    with pytest.raises(InvalidFormula):
        Leaf("")


def test_share_single_row():
    s = lsss.compile(A, P)
    assert lsss.share(s, 7, random.Random(0)) == [(1, 7)]


def test_share_fixed_randomness():
    s = lsss.compile(And(A, B), P)
    assert lsss.share(s, 5, oracles.FixedRandom([3])) == [(1, 8), (2, P - 3)]


def test_satisfying_rows_examples():
    ab = lsss.compile(And(A, B), P)
    assert lsss.satisfying_rows(ab, {"A"}) is None
    abc = lsss.compile(Or(And(A, B), C), P)
    assert lsss.satisfying_rows(abc, {"C"}) == {3}
    assert lsss.satisfying_rows(abc, {"B"}) is None
    assert lsss.satisfying_rows(abc, {"A", "B"}) == {1, 2}


def test_reconstruct_examples():
    ab = lsss.compile(And(A, B), P)
    assert lsss.reconstruct_coefficients(ab, {1, 2}) == {1: 1, 2: 1}
    a_or_b = lsss.compile(Or(A, B), P)
    assert a_or_b.matrix == ((1,), (1,))
    assert lsss.reconstruct_coefficients(a_or_b, {1}) == {1: 1}
    with pytest.raises(NotAuthorized):
        lsss.reconstruct_coefficients(ab, {1})


def test_reconstruct_is_deterministic_with_redundant_rows():
    s = lsss.compile(And(A, Or(B, C)), P)
    # earliest pivots first: row 3 duplicates row 2 and gets 0
    assert lsss.reconstruct_coefficients(s, {1, 2, 3}) == {1: 1, 2: 1, 3: 0}
    a_or_b = lsss.compile(Or(A, B), P)
    assert lsss.reconstruct_coefficients(a_or_b, {1, 2}) == {1: 1, 2: 0}


def test_reconstruct_rejects_bad_rows():
    s = lsss.compile(And(A, B), P)
    with pytest.raises(ValueError):
        lsss.reconstruct_coefficients(s, {3})


def test_dimensions_match_formula():
    rng = random.Random(5)
    for _ in range(200):
        f = oracles.to_formula(oracles.random_formula(rng, "ABCDEF", 7))
        s = lsss.compile(f, P)
        assert s.rows == len(lsss.leaves(f))
        assert s.width == 1 + lsss.and_count(f)


def test_satisfiability_matches_boolean_evaluation():
    # exhaustive over 3 attributes and at most 4 leaves, then random 5-leaf formulas
    attrs = "ABC"
    count = 0
    for tree in oracles.corpus(attrs, 4):
        s = lsss.compile(oracles.to_formula(tree), P)
        for subset in oracles.subsets(attrs):
            assert (lsss.satisfying_rows(s, subset) is not None) == oracles.holds(tree, subset)
        count += 1
    rng = random.Random(11)
    for _ in range(2000):
        tree = oracles.random_formula(rng, "ABCDE", 5)
        s = lsss.compile(oracles.to_formula(tree), P)
        subset = frozenset(a for a in "ABCDE" if rng.random() < 0.5)
        assert (lsss.satisfying_rows(s, subset) is not None) == oracles.holds(tree, subset)
    assert count == 3 + 1 * 2 * 9 + 2 * 4 * 27 + 5 * 8 * 81


def test_span_agrees_with_rational_elimination():
    rng = random.Random(3)
    for _ in range(300):
        tree = oracles.random_formula(rng, "ABCDE", 6)
        s = lsss.compile(oracles.to_formula(tree), P)
        subset = frozenset(a for a in "ABCDE" if rng.random() < 0.6)
        rows = [[oracles.signed(v, P) for v in s.matrix[i]]
                for i, a in enumerate(s.rho) if a in subset]
        assert oracles.spans_e1_rational(rows, s.width) == (
            lsss.satisfying_rows(s, subset) is not None
        )


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32), st.integers(0, P - 1))
def test_reconstruction_recovers_secret(seed, secret):
    rng = random.Random(seed)
    tree = oracles.random_formula(rng, "ABCDE", 6)
    s = lsss.compile(oracles.to_formula(tree), P)
    subset = frozenset(a for a in "ABCDE" if rng.random() < 0.7)
    rows = lsss.satisfying_rows(s, subset)
    if rows is None:
        return
    w = lsss.reconstruct_coefficients(s, rows)
    total = [sum(w[i] * s.matrix[i - 1][c] for i in w) % P for c in range(s.width)]
    assert total == [1] + [0] * (s.width - 1)
    shares = dict(lsss.share(s, secret, rng))
    assert lsss.recombine(w, shares, P) == secret


def test_small_prime_privacy_for_and_gate():
    p = 101
    s = lsss.compile(And(A, B), p)
    for unauthorized in ({1}, {2}):
        dists = []
        for secret in (3, 77):
            seen = sorted(
                tuple(lam for i, lam in lsss.share(s, secret, oracles.FixedRandom([r]))
                      if i in unauthorized)
                for r in range(p)
            )
            dists.append(seen)
        assert dists[0] == dists[1]


def test_serialization_roundtrip_and_layout():
    s = lsss.compile(And(A, B), 101)
    data = s.to_bytes()
    assert data.hex() == "00000002" "00000002" "0101" "0064" "0000000141" "0000000142"
    assert LsssStructure.from_bytes(data, 101) == s


@pytest.mark.parametrize("data", [
    b"",
    bytes.fromhex("00000002000000020101006400000001410000000142ff"),
    # entry 0x65 = 101 is not reduced
    bytes.fromhex("00000002000000020101006500000001410000000142"),
    bytes.fromhex("00000000000000020101"),
])
def test_deserialization_rejects_bad_input(data):
    with pytest.raises(Malformed):
        LsssStructure.from_bytes(data, 101)


def test_text_form():
    assert lsss.to_text(Or(And(A, B), C)) == "((A AND B) OR C)"


def test_conjoin_folds_left():
    assert lsss.conjoin(A, B, C) == And(And(A, B), C)
    assert lsss.disjoin(A) == A
    with pytest.raises(InvalidFormula):
        lsss.conjoin()
