import itertools
import math
from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from enflolab.errors import ConvergenceError, DomainError, InputError
from enflolab.schlumprecht import (
    FlatBlockVec, concat_flat, s_norm, s_norm_detail, s_norm_exact, s_norm_flat, s_norm_flat_detail,
)


def brute_force(x):
    """Recursive oracle: best split of every interval into l >= 2 consecutive pieces."""
    x = tuple(abs(float(a)) for a in x)

    @lru_cache(maxsize=None)
    def norm(a, b):
        best = max(x[a:b])
        n = b - a
        for cuts in itertools.product((0, 1), repeat=n - 1):
            bounds = [a] + [a + i + 1 for i, c in enumerate(cuts) if c] + [b]
            l = len(bounds) - 1
            if l < 2:
                continue
            total = sum(norm(s, e) for s, e in zip(bounds, bounds[1:]))
            best = max(best, total / math.log2(l + 1))
        return best

    return norm(0, len(x))


def test_examples():
    assert s_norm(np.array([1.0])) == 1
    assert s_norm(np.ones(2)) == pytest.approx(2 / math.log2(3), abs=1e-9)
    assert s_norm(np.ones(10)) == pytest.approx(2.890648, abs=1e-6)
    assert s_norm(np.array([1.0, 0.5])) == pytest.approx(brute_force([1, 0.5]), abs=1e-12)


def test_flat_sums_to_64():
    for n in range(1, 65):
        assert abs(s_norm(np.ones(n)) - n / math.log2(n + 1)) <= 1e-6


@pytest.mark.parametrize("seed", range(20))
def test_against_brute_force(seed):
    rng = np.random.default_rng(seed)
    x = rng.random(int(rng.integers(1, 8)))
    x[rng.random(len(x)) < 0.25] = 0
    if not x.any():
        x[0] = 1
    oracle = brute_force(x)
    assert s_norm(x) == pytest.approx(oracle, abs=1e-9)
    assert s_norm_exact(x) == pytest.approx(oracle, abs=1e-12)


arrays = st.lists(st.floats(-4, 4, allow_nan=False), min_size=1, max_size=20).map(np.array)


@settings(max_examples=80, deadline=None)
@given(arrays, st.floats(0.1, 10))
def test_norm_properties(x, a):
    if not np.abs(x).max() > 1e-6:
        return
    v = s_norm(x)
    assert np.abs(x).max() - 1e-12 <= v <= np.abs(x).sum() + 1e-9
    assert s_norm(-x) == pytest.approx(v, rel=1e-9)
    assert s_norm(a * x) == pytest.approx(a * v, rel=1e-8)
    signs = np.where(np.arange(len(x)) % 2, -1.0, 1.0)
    assert s_norm(signs * x) == pytest.approx(v, rel=1e-9)


@settings(max_examples=40, deadline=None)
@given(arrays, arrays)
def test_triangle(x, y):
    n = max(len(x), len(y))
    x = np.pad(x, (0, n - len(x)))
    y = np.pad(y, (0, n - len(y)))
    if not (np.abs(x).max() > 1e-6 and np.abs(y).max() > 1e-6 and np.abs(x + y).max() > 1e-6):
        return
    assert s_norm(x + y) <= s_norm(x) + s_norm(y) + 1e-9


def test_iteration_is_monotone():
    res = s_norm_detail(np.array([3.0, 1, 0, 2, 2, 1, 0.5]))
    assert res.previous <= res.value
    assert res.iterations >= 1


def test_non_convergence_carries_iterates():
    with pytest.raises(ConvergenceError) as exc:
        s_norm_detail(np.linspace(1, 2, 30), tol=1e-300, max_iter=1)
    assert exc.value.last >= exc.value.previous


def test_zero_vector_rejected():
    with pytest.raises(DomainError):
        s_norm(np.zeros(3))


def test_flat_block_examples():
    assert s_norm_flat(FlatBlockVec(((5, 1.0),))) == pytest.approx(5 / math.log2(6), abs=1e-12)
    assert s_norm_flat(FlatBlockVec(((5, 1.0),))) == pytest.approx(1.934, abs=1e-3)
    assert s_norm_flat(FlatBlockVec(((1, 7.0),))) == 7


def test_flat_block_canonical_form_and_parse():
    v = FlatBlockVec.parse("2:1,3:1,1:0.5")
    assert v.blocks == ((5, 1.0), (1, 0.5))
    assert v.length == 6
    assert list(v.expand()) == [1, 1, 1, 1, 1, 0.5]
    with pytest.raises(DomainError):
        FlatBlockVec.parse("0:1")
    with pytest.raises(InputError):
        FlatBlockVec.parse("3")


@pytest.mark.parametrize("seed", range(30))
def test_flat_matches_expanded(seed):
    rng = np.random.default_rng(seed)
    blocks = tuple((int(rng.integers(1, 9)), float(rng.integers(1, 9) / 4)) for _ in range(int(rng.integers(1, 5))))
    v = FlatBlockVec(blocks)
    res = s_norm_flat_detail(v)
    assert res.exact
    assert res.value == pytest.approx(s_norm(v.expand()), abs=1e-9)


def test_flat_long_blocks_are_lower_bounds():
    v = FlatBlockVec(((40, 1.0), (70, 0.3), (45, 0.8)))
    res = s_norm_flat_detail(v)
    assert res.value <= s_norm_exact(v.expand()) + 1e-12
    assert res.value >= 0.99 * s_norm_exact(v.expand())


def test_concat_with_signs():
    a = FlatBlockVec(((2, 1.0),))
    b = FlatBlockVec(((3, 0.5),))
    assert list(concat_flat([a, b], [1, -1]).expand()) == [1, 1, -0.5, -0.5, -0.5]
