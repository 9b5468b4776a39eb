import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from enflolab.errors import DomainError
from enflolab.interpolation import (
    calderon_norm, calderon_objective, flat_formula, interp_spec_from, lp_oracle, s_oracle, spr_norm, spr_result,
)
from enflolab.schlumprecht import s_norm_exact


def test_spec_from_exponents():
    s = interp_spec_from(2, 4)
    assert s.theta == pytest.approx(0.25) and s.t == pytest.approx(3)
    s = interp_spec_from(1, 2)
    assert s.theta == pytest.approx(0.5) and s.t == pytest.approx(1)
    s = interp_spec_from(1, math.inf)
    assert s.theta == 1 and s.is_schlumprecht


@pytest.mark.parametrize("p, r", [(2, 2), (3, 2), (2, math.inf), (0.5, 2)])
def test_spec_rejects_bad_exponents(p, r):
    with pytest.raises(DomainError):
        interp_spec_from(p, r)


def test_single_coordinate():
    z = np.zeros(5)
    z[2] = 1
    assert spr_norm(z, 2, 4) == pytest.approx(1, abs=1e-12)
    assert calderon_norm(z, 0.3, lp_oracle(2), s_oracle()).value == pytest.approx(1, abs=1e-12)


def test_sixteen_ones_l3_and_s():
    res = calderon_norm(np.ones(16), 0.25, lp_oracle(3), s_oracle())
    assert res.value == pytest.approx(16 ** 0.5 * math.log2(17) ** -0.25, abs=1e-6)
    assert res.value == pytest.approx(2.8131, abs=1e-4)


def test_spr_examples():
    assert spr_norm(np.ones(4), 2, 4) == pytest.approx(1.6202, abs=1e-4)
    # 8 / sqrt(log2 9) = 4.493301 (the 4.4907 sometimes quoted is a rounding slip)
    assert spr_norm(np.ones(8), 1, 2) == pytest.approx(8 * math.log2(9) ** -0.5, abs=1e-9)
    assert spr_norm(np.ones(8), 1, 2) == pytest.approx(4.4933, abs=1e-4)
    assert spr_norm(np.ones(10), 1, math.inf) == pytest.approx(s_norm_exact(np.ones(10)))


@pytest.mark.parametrize("p, r", [(2, 4), (1, 2)])
@pytest.mark.parametrize("n", [2, 4, 8, 16])
def test_flat_values(p, r, n):
    value = spr_norm(np.ones(n), p, r)
    ref = flat_formula(n, p, r)
    assert abs(value - ref) <= 0.02 * ref
    assert value <= ref + 1e-6


def test_small_theta_tends_to_x_norm():
    z = np.array([1.0, 2, 0, 3])
    value = calderon_norm(z, 1e-6, lp_oracle(3), s_oracle()).value
    assert value == pytest.approx(np.linalg.norm(z, 3), abs=1e-4)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(0.05, 5), min_size=2, max_size=8), st.floats(0.1, 0.9))
def test_never_above_equal_split(values, theta):
    z = np.array(values)
    res = calderon_norm(z, theta, lp_oracle(2), s_oracle())
    assert res.value <= res.equal_split * (1 + 1e-12)
    assert res.equal_split == pytest.approx(np.linalg.norm(z) ** (1 - theta) * s_norm_exact(z) ** theta, rel=1e-12)
    # the returned factorization reproduces |z| and the value
    f = res.factorization
    pos = np.array(f.support) - 1
    assert np.allclose((1 - theta) * np.array(f.u) + theta * np.array(f.v), np.log(z[pos]))
    assert math.exp(f.objective) == pytest.approx(res.value, rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(0.05, 5), min_size=2, max_size=6), st.integers(0, 2 ** 16))
def test_objective_is_convex(values, seed):
    obj, u0 = calderon_objective(np.array(values), 0.4, lp_oracle(2), s_oracle())
    rng = np.random.default_rng(seed)
    a = u0 + rng.normal(size=len(u0))
    b = u0 + rng.normal(size=len(u0))
    assert obj((a + b) / 2) <= (obj(a) + obj(b)) / 2 + 1e-9


def test_theta_one_returns_plain_s_norm():
    assert isinstance(spr_result(np.ones(3), 1, math.inf), float)


def test_bad_theta():
    with pytest.raises(DomainError):
        calderon_norm(np.ones(2), 1.0, lp_oracle(2), s_oracle())
