import random

import pytest
from hypothesis import given, settings, strategies as st

from datacapsule import _kernels
from datacapsule._kernels import _gf_py
from datacapsule.pairing import get_suite

try:
    from datacapsule._kernels import _gf_ext
except ImportError:  # extension not built
    _gf_ext = None

needs_ext = pytest.mark.skipif(_gf_ext is None, reason="compiled kernel not built")

BIG = get_suite().order
SMALL_PRIMES = [2, 3, 101, 65521, 2147483647]


def _check_solution(rows, width, p, w):
    total = [sum(w[i] * rows[i][c] for i in range(len(rows))) % p for c in range(width)]
    assert total == [1] + [0] * (width - 1)


def test_backend_reported():
    assert _kernels.BACKEND in ("cython", "python")
    if _gf_ext is not None:
        assert _kernels.BACKEND == "cython"


@pytest.mark.parametrize("p", SMALL_PRIMES + [BIG])
def test_fallback_solver(p):
    rng = random.Random(p)
    for _ in range(200):
        k, width = rng.randint(1, 6), rng.randint(1, 5)
        rows = [[rng.randrange(p) if rng.random() < 0.6 else 0 for _ in range(width)]
                for _ in range(k)]
        w = _gf_py.solve_left(rows, width, p)
        if w is not None:
            _check_solution(rows, width, p, w)


def test_fallback_examples():
    assert _gf_py.solve_left([[1, 1], [0, 100]], 2, 101) == [1, 1]
    assert _gf_py.solve_left([[1, 1]], 2, 101) is None
    assert _gf_py.solve_left([[1], [1]], 1, 101) == [1, 0]
    assert _gf_py.matvec([[1, 1], [0, 100]], [5, 3], 101) == [8, 98]


@needs_ext
@settings(max_examples=300, deadline=None)
@given(st.data())
def test_extension_matches_fallback(data):
    p = data.draw(st.sampled_from(SMALL_PRIMES + [BIG]))
    k = data.draw(st.integers(1, 7))
    width = data.draw(st.integers(1, 6))
    entry = st.one_of(st.integers(0, p - 1), st.sampled_from([0, 1, p - 1]))
    rows = data.draw(st.lists(st.lists(entry, min_size=width, max_size=width),
                              min_size=k, max_size=k))
    vec = data.draw(st.lists(st.integers(0, p - 1), min_size=width, max_size=width))
    assert _gf_ext.solve_left(rows, width, p) == _gf_py.solve_left(rows, width, p)
    assert list(_gf_ext.matvec(rows, vec, p)) == _gf_py.matvec(rows, vec, p)


@needs_ext
def test_extension_handles_unreduced_input():
    rows = [[103, -1], [0, -202]]
    assert _gf_ext.solve_left(rows, 2, 101) == _gf_py.solve_left(rows, 2, 101)
