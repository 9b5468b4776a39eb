import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from enflolab.errors import DomainError, InputError
from enflolab.vectors import (
    FUN, NormSpec, OperatorMatrix, SparseVec, dual_norm, grid_op_norm, lattice_norm,
    op_norm_lower, op_norm_upper, pair,
)

SPEC1 = NormSpec.build(1.0, 8)
SPEC15 = NormSpec.build(1.5, 8)


def fun(coeffs):
    return SparseVec(coeffs, FUN)


def _same_and_distinct_block():
    blocks = SPEC1.block_ids(np.arange(64, 128))
    same = distinct = None
    for a in range(64, 128):
        for b in range(a + 1, 128):
            if blocks[a - 64] == blocks[b - 64] and same is None:
                same = (a, b)
            if blocks[a - 64] != blocks[b - 64] and distinct is None:
                distinct = (a, b)
    return same, distinct


def test_construction_and_arithmetic():
    v = SparseVec({3: Fraction(1, 2), 5: 2, 7: 0})
    assert v.support() == (3, 5)
    assert v + (-v) == SparseVec()
    assert 2 * v == SparseVec({3: 1, 5: 4})
    assert (v - SparseVec.unit(5) * 2).support() == (3,)
    with pytest.raises(InputError):
        v + SparseVec.unit(3, FUN)
    with pytest.raises(DomainError):
        SparseVec({0: 1})
    with pytest.raises(AttributeError):
        v.role = FUN


def test_floats_are_rejected():
    with pytest.raises((InputError, TypeError)):
        SparseVec({1: 0.5})


def test_json_round_trip_and_schema():
    v = SparseVec({20: Fraction(-1, 2), 3: 7}, FUN)
    data = v.to_json()
    assert data == {"role": "fun", "coeffs": {"3": "7/1", "20": "-1/2"}}
    assert SparseVec.from_json(json.loads(json.dumps(data))) == v
    jsonschema = pytest.importorskip("jsonschema")
    from importlib.resources import files
    schema = json.loads(files("enflolab").joinpath("schemas/sparsevec.schema.json").read_text())
    jsonschema.validate(data, schema)


def test_pair_examples():
    assert pair(fun({8: 1}), SparseVec({8: 1})) == 1
    assert pair(fun({8: 1, 9: 1}), SparseVec({8: 1, 9: -1})) == 0
    assert pair(fun({16: Fraction(1, 2)}), SparseVec({16: 3, 17: 1})) == Fraction(3, 2)


def test_lattice_norm_examples():
    same, distinct = _same_and_distinct_block()
    assert lattice_norm(SparseVec({8: 1}), SPEC1) == 1
    assert lattice_norm(SparseVec({same[0]: 1, same[1]: 1}), SPEC1) == pytest.approx(math.sqrt(2), abs=1e-15)
    assert lattice_norm(SparseVec({distinct[0]: 1, distinct[1]: 1}), SPEC1) == pytest.approx(2, abs=1e-15)


def test_dual_norm_examples():
    same, distinct = _same_and_distinct_block()
    assert dual_norm(fun({8: 1}), SPEC1) == 1
    assert dual_norm(fun({same[0]: 1, same[1]: 1}), SPEC1) == pytest.approx(math.sqrt(2), abs=1e-15)
    assert dual_norm(fun({distinct[0]: 1, distinct[1]: 1}), SPEC1) == pytest.approx(1, abs=1e-15)


def test_index_outside_table_is_an_error():
    with pytest.raises(InputError):
        lattice_norm(SparseVec({1 << 12: 1}), SPEC1)


coeff = st.fractions(min_value=-8, max_value=8, max_denominator=16)
vectors = st.dictionaries(st.integers(1, 511), coeff, max_size=12).map(SparseVec)


@settings(max_examples=60, deadline=None)
@given(vectors, vectors, coeff)
def test_norm_axioms(u, v, a):
    for spec in (SPEC1, SPEC15):
        nu, nv = lattice_norm(u, spec), lattice_norm(v, spec)
        assert lattice_norm(a * u, spec) == pytest.approx(abs(float(a)) * nu, rel=1e-12, abs=1e-12)
        assert lattice_norm(u + v, spec) <= nu + nv + 1e-12
        # 1-unconditional: flipping signs leaves the norm unchanged
        flipped = SparseVec({j: (-c if j % 3 else c) for j, c in u})
        assert lattice_norm(flipped, spec) == pytest.approx(nu, rel=1e-12, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(vectors, vectors)
def test_holder(u, v):
    phi = SparseVec(dict(v), FUN)
    for spec in (SPEC1, SPEC15):
        assert abs(float(pair(phi, u))) <= dual_norm(phi, spec) * lattice_norm(u, spec) + 1e-9


def test_operator_basics():
    T = OperatorMatrix.identity([8, 9, 10, 11])
    assert T.image(9) == SparseVec({9: 1})
    assert T.apply_functional(fun({9: 3, 10: 1}), 9) == 3
    assert not T.is_zero()
    assert OperatorMatrix([1], [1]).is_zero()


def test_op_norm_lower_identity_and_double():
    I = OperatorMatrix.identity([64, 65, 66, 67])
    two = OperatorMatrix([64, 65, 66, 67], [64, 65, 66, 67], {(j, j): 2 for j in range(64, 68)})
    assert op_norm_lower(I, SPEC1, SPEC1) >= 1 - 1e-12
    assert op_norm_lower(two, SPEC1, SPEC1) >= 2 - 1e-12
    assert op_norm_lower(two, SPEC1, SPEC1) <= op_norm_upper(two, SPEC1, SPEC1) + 1e-12


@pytest.mark.parametrize("seed", range(3))
def test_op_norm_lower_against_grid(seed):
    rng = np.random.default_rng(seed)
    cols, rows = [64, 80, 100], [70, 90, 120]
    T = OperatorMatrix(cols, rows, {(r, c): Fraction(int(rng.integers(-20, 21)), int(rng.integers(1, 8)))
                                    for r in rows for c in cols})
    lower = op_norm_lower(T, SPEC15, SPEC1, budget=16, seed=seed)
    grid = grid_op_norm(T, SPEC15, SPEC1)
    assert abs(lower - grid) <= 0.01 * grid
    assert lower <= op_norm_upper(T, SPEC15, SPEC1) + 1e-9


def test_op_norm_lower_is_monotone_in_budget():
    rng = np.random.default_rng(5)
    cols = rows = [64, 65, 90, 91, 120]
    T = OperatorMatrix(cols, rows, {(r, c): Fraction(int(rng.integers(-9, 10)), 3) for r in rows for c in cols})
    values = [op_norm_lower(T, SPEC1, SPEC15, budget=b, seed=1) for b in (1, 2, 4, 8, 16)]
    assert all(a <= b + 1e-15 for a, b in zip(values, values[1:]))
