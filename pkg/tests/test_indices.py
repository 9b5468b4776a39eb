import json

import pytest

from enflolab import indices
from enflolab.errors import DomainError
from enflolab.indices import Xi


@pytest.mark.parametrize("j, n", [(8, 3), (1, 0), (1024, 10), (1023, 9), (2, 1)])
def test_block_of(j, n):
    assert indices.block_of(j) == n


def test_block_of_rejects_nonpositive():
    with pytest.raises((DomainError, ValueError)):
        indices.block_of(0)


@pytest.mark.parametrize("n, l, expected", [
    (4, 0, [16]),
    (5, 0, [32, 48]),
    (6, 3, [67, 83, 99, 115]),
])
def test_residue_class(n, l, expected):
    assert list(indices.residue_class(n, l)) == expected


def test_residue_classes_partition_each_level():
    for n in range(4, 10):
        classes = [indices.residue_class(n, l) for l in range(16)]
        assert all(len(c) == 2 ** (n - 4) for c in classes)
        assert sorted(j for c in classes for j in c) == list(indices.block_range(n))


def test_xi_examples():
    assert indices.xi_eval(Xi("f", 1), 32) == 16
    assert indices.xi_eval(Xi("g", 15), 47) == 46
    assert indices.xi_eval(Xi("h", 32), 35) == 95


def test_xi_domain_errors():
    with pytest.raises(DomainError):
        indices.xi_eval(Xi("f", 1), 31)  # i = 1
    with pytest.raises(DomainError):
        indices.xi_eval(Xi("h", 1), 36)  # l = 4 is outside the strict h domain
    # the extended map is still defined there
    assert indices.xi_eval(Xi("h", 1), 36, strict=False) == 64


def test_xi_count_and_level_shift():
    xis = indices.all_xis()
    assert len(xis) == 55
    assert {indices.xi_level_shift(x) for x in xis if x.family == "f"} == {-1}
    assert {indices.xi_level_shift(x) for x in xis if x.family == "g"} == {0}
    assert {indices.xi_level_shift(x) for x in xis if x.family == "h"} == {1}


def test_xi_array_matches_scalar():
    import numpy as np
    js = np.arange(32, 512)
    for xi in indices.all_xis():
        arr = indices.xi_eval_array(xi, js)
        assert [int(a) for a in arr[:40]] == [indices.xi_eval(xi, int(j), strict=False) for j in js[:40]]


def test_base_level_is_singletons():
    (p4,) = indices.build_partitions(4)
    assert p4.m_n == 1
    assert sorted(p4.nabla) == [(j,) for j in range(16, 32)]
    assert sorted(p4.delta) == [(j,) for j in range(16, 32)]


def test_level_six_sets_are_small():
    p6 = indices.build_partitions(6)[-1]
    assert p6.n == 6 and p6.m_n == 1
    assert {len(A) for A in p6.nabla} <= {1, 2}


def test_properties_hold_through_level_12():
    rows = indices.verify_partition_properties(indices.build_partitions(13))
    for r in rows[:-1]:
        for key in ("property_1", "property_2", "property_3", "property_3_h_all_residues",
                    "m_n_lower_bound", "product_size", "d_split_balanced", "nabla_case_bound"):
            assert r[key] == "pass", (r["n"], key)
    assert rows[-1]["property_3"] == "skipped"


def test_m_lower_bound_to_16():
    table = indices.PartitionTable.build(16)
    assert all(table[n].m_n >= 2 ** (n / 32 - 1) for n in range(4, 17))


def test_nabla_case_counts_are_not_quarters_beyond_level_5():
    # the exact quarter split only holds at the bottom levels; the bound that
    # the estimates actually use (count * m_n <= 2^(n-2)) holds throughout
    rows = {r["n"]: r for r in indices.verify_partition_properties(indices.build_partitions(9))}
    assert rows[4]["nabla_case_quarter"] == rows[5]["nabla_case_quarter"] == "pass"
    assert rows[6]["nabla_case_counts"] == [16, 16, 16, 14]
    assert all(r["nabla_case_bound"] == "pass" for r in rows.values())


def test_shuffled_partition_is_detected():
    pairs = indices.build_partitions(7)
    bad = indices.shuffled_pair(pairs[2], seed=3)
    rows = indices.verify_partition_properties(pairs[:2] + [bad] + pairs[3:])
    r6 = next(r for r in rows if r["n"] == 6)
    assert "fail" in (r6["property_2"], r6["property_3"])


def test_partition_table_covers_indices():
    table = indices.PartitionTable.build(8)
    assert table.covers(16) and table.covers(511)
    assert not table.covers(512)


def test_partitions_json_matches_schema():
    jsonschema = pytest.importorskip("jsonschema")
    from importlib.resources import files
    schema = json.loads(files("enflolab").joinpath("schemas/partitions.schema.json").read_text())
    data = json.loads(indices.partitions_to_json(indices.build_partitions(7)))
    jsonschema.validate(data, schema)
    for level in data:
        flat = sorted(j for A in level["nabla"] for j in A)
        assert flat == list(range(2 ** level["n"], 2 ** (level["n"] + 1)))
