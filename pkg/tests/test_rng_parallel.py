import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from cpquad.parallel import batches, pmap
from cpquad.rng import make_rng


def test_streams_are_reproducible():
    a = make_rng(7, "factorize", 3).random(5)
    b = make_rng(7, "factorize", 3).random(5)
    assert np.array_equal(a, b)


def test_paths_give_independent_streams():
    a = make_rng(7, "factorize", 3).random(5)
    assert not np.array_equal(a, make_rng(7, "factorize", 4).random(5))
    assert not np.array_equal(a, make_rng(8, "factorize", 3).random(5))


@given(st.lists(st.integers(), max_size=50), st.integers(1, 8))
def test_pmap_preserves_order(xs, threads):
    assert pmap(lambda x: x * 2, xs, threads) == [x * 2 for x in xs]


@given(st.lists(st.integers(), max_size=50), st.integers(1, 10))
def test_batches_concatenate_back(xs, size):
    bs = batches(xs, size)
    assert [x for b in bs for x in b] == xs
    assert all(len(b) <= size for b in bs)
