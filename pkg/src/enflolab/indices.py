"""Dyadic index blocks, the support maps f_k, g_k, h_k and the partition pair.

Indices are positive integers.  Block ``I_n`` is ``[2**n, 2**(n+1))`` and its
residue class ``I_n^j`` collects the members congruent to ``j`` mod 16.

For every level ``n >= 4`` the multiples of 16 in ``I_n`` are identified with
a product ``C_n x D_n``.  The identification is carried from level to level
by the doubling maps ``k -> 2k + 16r`` so that columns of one level become
rows of the next.  ``D_n`` is further split into sixteen factors, one per
residue class, and the two partitions of ``I_n`` are read off from that
product structure.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import DomainError, InputError, ResourceError

#: Largest level that :func:`build_partitions` will materialise (|I_n| = 2**n).
MAX_LEVEL = 20

FAMILY_RANGES = {"f": 8, "g": 15, "h": 32}
#: Residues ``l`` (in ``j = 16 i + l``) on which each family is defined.
#: ``h`` is only stated for ``l <= 3``; ``strict=False`` lifts that.
FAMILY_RESIDUES = {"f": 16, "g": 16, "h": 4}


def block_of(j: int) -> int:
    """Return the level ``n`` with ``2**n <= j < 2**(n+1)``."""
    j = int(j)
    if j < 1:
        raise DomainError(f"index must be >= 1, got {j}")
    return j.bit_length() - 1


def block_range(n: int) -> range:
    if n < 0:
        raise DomainError(f"level must be >= 0, got {n}")
    return range(1 << n, 1 << (n + 1))


def residue_class(n: int, j: int) -> list[int]:
    """The members of ``I_n`` congruent to ``j`` mod 16, in increasing order."""
    if n < 4:
        raise DomainError(f"residue classes need n >= 4, got {n}")
    if not 0 <= j <= 15:
        raise DomainError(f"residue must be in 0..15, got {j}")
    return list(range((1 << n) + j, 1 << (n + 1), 16))


class Xi(NamedTuple):
    """One support map: ``family`` in {'f', 'g', 'h'} and its parameter ``k``."""

    family: str
    k: int

    def __str__(self) -> str:
        return f"{self.family}_{self.k}"


def all_xis() -> list[Xi]:
    return [Xi(fam, k) for fam, top in FAMILY_RANGES.items() for k in range(1, top + 1)]


def _check_xi(xi: Xi) -> None:
    if xi.family not in FAMILY_RANGES:
        raise DomainError(f"unknown family {xi.family!r}")
    if not 1 <= xi.k <= FAMILY_RANGES[xi.family]:
        raise DomainError(f"{xi.family}_k needs 1 <= k <= {FAMILY_RANGES[xi.family]}, got {xi.k}")


def xi_eval(xi: Xi, j: int, strict: bool = True) -> int:
    """Evaluate a support map at ``j = 16 i + l``.

    ``i >= 2`` is required for every family.  With ``strict`` (the default)
    ``h_k`` additionally requires ``l <= 3``.
    """
    _check_xi(xi)
    i, l = divmod(int(j), 16)
    if i < 2:
        raise DomainError(f"{xi} is defined for j = 16i + l with i >= 2, got j={j}")
    if strict and l >= FAMILY_RESIDUES[xi.family]:
        raise DomainError(f"{xi} is defined only for l <= 3, got j={j} (l={l})")
    if xi.family == "f":
        return 8 * i + xi.k - 1
    if xi.family == "g":
        return 16 * i + (l + xi.k) % 16
    return 32 * i + xi.k - 1


def xi_eval_array(xi: Xi, js: np.ndarray) -> np.ndarray:
    """Vectorised :func:`xi_eval` without domain checks."""
    i, l = np.divmod(js, 16)
    if xi.family == "f":
        return 8 * i + xi.k - 1
    if xi.family == "g":
        return 16 * i + (l + xi.k) % 16
    return 32 * i + xi.k - 1


def xi_level_shift(xi: Xi) -> int:
    """Level offset of the image: f lowers by one, g keeps, h raises by one."""
    return {"f": -1, "g": 0, "h": 1}[xi.family]


def balanced_split(size: int, parts: int = 16) -> tuple[int, ...]:
    """Split a power of two into ``parts`` nondecreasing power-of-two factors.

    The largest factor is at most twice the smallest.
    """
    if size < 1 or size & (size - 1):
        raise DomainError(f"factor split needs a power of two, got {size}")
    e = size.bit_length() - 1
    lo, extra = divmod(e, parts)
    return tuple([1 << lo] * (parts - extra) + [1 << (lo + 1)] * extra)


@dataclass(frozen=True, eq=False)
class PartitionPair:
    """The partitions ``nabla`` and ``delta`` of ``I_n``.

    ``nabla_label[k]`` and ``delta_label[k]`` give, for the index
    ``2**n + k``, the number of the set containing it.  Sets are numbered in
    order of their smallest element.
    """

    n: int
    m_n: int
    c_size: int
    d_size: int
    d_split: tuple[int, ...]
    nabla_label: np.ndarray = field(repr=False)
    delta_label: np.ndarray = field(repr=False)

    @property
    def indices(self) -> range:
        return block_range(self.n)

    @cached_property
    def nabla(self) -> tuple[tuple[int, ...], ...]:
        return _groups(self.n, self.nabla_label)

    @cached_property
    def delta(self) -> tuple[tuple[int, ...], ...]:
        return _groups(self.n, self.delta_label)

    def nabla_sets_in(self, residues: Iterable[int]) -> list[tuple[int, ...]]:
        """Members of ``nabla`` contained in the union of the given residue classes."""
        allowed = set(residues)
        return [A for A in self.nabla if A[0] % 16 in allowed]

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "m_n": self.m_n,
            "nabla": [list(A) for A in self.nabla],
            "delta": [list(B) for B in self.delta],
        }


def _groups(n: int, labels: np.ndarray) -> tuple[tuple[int, ...], ...]:
    base = 1 << n
    order = np.argsort(labels, kind="stable")
    sorted_labels = labels[order]
    cuts = np.flatnonzero(np.diff(sorted_labels)) + 1
    return tuple(tuple(int(base + k) for k in chunk) for chunk in np.split(order, cuts))


def _relabel(keys: np.ndarray) -> np.ndarray:
    """Renumber arbitrary integer keys 0, 1, ... in order of first appearance."""
    _, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
    rank = np.empty(len(first), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(len(first))
    return rank[inverse]


def singleton_pair(n: int) -> PartitionPair:
    """All-singleton partitions used below level 4."""
    labels = np.arange(1 << n, dtype=np.int64)
    return PartitionPair(n, 1, 0, 0, (), labels, labels.copy())


def product_coordinates(n_max: int) -> dict[int, tuple[np.ndarray, np.ndarray, int, int]]:
    """``(c, d, |C_n|, |D_n|)`` for the multiples of 16 in ``I_n``, ``4 <= n <= n_max``.

    Entry ``a`` of the arrays describes ``16 * (2**(n-4) + a)``.
    """
    coords = {4: (np.zeros(1, dtype=np.int64), np.zeros(1, dtype=np.int64), 1, 1)}
    for n in range(4, n_max):
        c, d, c_size, d_size = coords[n]
        # 16a -> 2*16a + 16r sends local index a to 2a + r; (c, d) -> (2d + r, c)
        size = len(c)
        new_c = np.empty(2 * size, dtype=np.int64)
        new_d = np.empty(2 * size, dtype=np.int64)
        for r in (0, 1):
            new_c[r::2] = 2 * d + r
            new_d[r::2] = c
        coords[n + 1] = (new_c, new_d, 2 * d_size, c_size)
    return coords


def _pair_from_coordinates(n: int, c: np.ndarray, d: np.ndarray, c_size: int, d_size: int) -> PartitionPair:
    split = balanced_split(d_size)
    # lexicographic mixed radix: factor 0 is the most significant digit
    strides = [int(np.prod(split[l + 1:], dtype=np.int64)) for l in range(16)]
    size = len(c)
    nabla_keys = np.empty(1 << n, dtype=np.int64)
    delta_keys = np.empty(1 << n, dtype=np.int64)
    for l in range(16):
        digit = (d // strides[l]) % split[l]
        rest = d - digit * strides[l]
        pos = np.arange(size) * 16 + l
        nabla_keys[pos] = (l * c_size + c) * d_size + rest
        delta_keys[pos] = l * d_size + digit
    return PartitionPair(
        n=n,
        m_n=split[0],
        c_size=c_size,
        d_size=d_size,
        d_split=split,
        nabla_label=_relabel(nabla_keys),
        delta_label=_relabel(delta_keys),
    )


def build_partitions(n_max: int) -> list[PartitionPair]:
    """Partition pairs for levels ``4..n_max``."""
    if n_max < 4:
        raise DomainError(f"n_max must be >= 4, got {n_max}")
    if n_max > MAX_LEVEL:
        raise ResourceError(f"n_max={n_max} exceeds the cap {MAX_LEVEL}")
    coords = product_coordinates(n_max)
    return [_pair_from_coordinates(n, *coords[n]) for n in range(4, n_max + 1)]


class PartitionTable:
    """Partition pairs indexed by level, with singleton levels below 4."""

    def __init__(self, pairs: Sequence[PartitionPair]):
        self.pairs: dict[int, PartitionPair] = {p.n: p for p in pairs}
        top = max(self.pairs) if self.pairs else 3
        for n in range(0, min(4, top + 1)):
            self.pairs.setdefault(n, singleton_pair(n))
        self.max_level = max(self.pairs)
        if sorted(self.pairs) != list(range(self.max_level + 1)):
            raise InputError("partition levels must be consecutive")
        # global Delta-block id for every index 1 .. 2**(max_level+1) - 1
        ids = np.full(1 << (self.max_level + 1), -1, dtype=np.int64)
        offset = 0
        for n in range(self.max_level + 1):
            lab = self.pairs[n].delta_label
            ids[1 << n: 1 << (n + 1)] = lab + offset
            offset += int(lab.max()) + 1
        self.delta_id = ids
        self.n_blocks = offset

    @classmethod
    def build(cls, n_max: int) -> "PartitionTable":
        return cls(build_partitions(max(n_max, 4)))

    def __getitem__(self, n: int) -> PartitionPair:
        return self.pairs[n]

    def covers(self, j: int) -> bool:
        return 1 <= j < len(self.delta_id)


def nabla_case_residues(eps: int, delta: int) -> tuple[int, int, int, int]:
    """Residues of ``I_n(eps, delta)``: ``{r, r+1, r+8, r+9}`` with ``r = 4 eps + 2 delta``."""
    r = 4 * eps + 2 * delta
    return (r, r + 1, r + 8, r + 9)


def verify_partition_properties(pairs: Sequence[PartitionPair]) -> list[dict]:
    """Check the three partition properties level by level.

    Returns one dict per level with ``"pass"``, ``"fail"`` or ``"skipped"``
    for each property together with the structural side conditions.
    Property 3 for the topmost level is skipped (no level above it).
    """
    if not pairs:
        return []
    levels = [p.n for p in pairs]
    if levels != list(range(levels[0], levels[0] + len(levels))):
        raise InputError(f"levels must be consecutive, got {levels}")
    by_level = {p.n: p for p in pairs}
    for n in range(0, 4):
        by_level.setdefault(n, singleton_pair(n))
    if levels[0] - 1 not in by_level:
        raise InputError(f"property 3 at level {levels[0]} needs level {levels[0] - 1}")
    reports = []
    for pair in pairs:
        n = pair.n
        rep: dict = {"n": n, "m_n": pair.m_n, "c_size": pair.c_size, "d_size": pair.d_size}
        rep["property_1"] = _status(_property_1(pair))
        rep["property_2"] = _status(_property_2(pair))
        if n + 1 in by_level:
            strict, extended = _property_3(pair, by_level)
            rep["property_3"] = _status(strict)
            rep["property_3_h_all_residues"] = _status(extended)
        else:
            rep["property_3"] = "skipped"
            rep["property_3_h_all_residues"] = "skipped"
        rep["m_n_lower_bound"] = _status(pair.m_n >= 2 ** (n / 32 - 1))
        floor_bound = 2 ** (n // 2 - 2)
        rep["product_size"] = _status(pair.c_size * pair.d_size == 1 << (n - 4))
        rep["factor_size_floor_bound"] = _status(min(pair.c_size, pair.d_size) >= floor_bound)
        rep["factor_size_exact_bound"] = _status(min(pair.c_size, pair.d_size) >= 2 ** (n / 2 - 2))
        split = pair.d_split
        rep["d_split_balanced"] = _status(
            all(a <= b for a, b in zip(split, split[1:])) and split[-1] <= 2 * split[0]
            and int(np.prod(split)) == pair.d_size
        )
        prev = by_level.get(n - 1)
        if prev is not None and prev.n >= 4:
            rep["size_recursion"] = _status(pair.d_size == prev.c_size and pair.c_size == 2 * prev.d_size)
        counts = [len(pair.nabla_sets_in(nabla_case_residues(e, d))) for e in (0, 1) for d in (0, 1)]
        rep["nabla_case_counts"] = counts
        rep["nabla_case_quarter"] = _status(all(4 * c == len(pair.nabla) for c in counts))
        rep["nabla_case_bound"] = _status(all(c * pair.m_n <= 1 << (n - 2) for c in counts))
        reports.append(rep)
    return reports


def _status(ok: bool) -> str:
    return "pass" if ok else "fail"


def _property_1(pair: PartitionPair) -> bool:
    m = pair.m_n
    for A in pair.nabla:
        if not m <= len(A) <= 2 * m:
            return False
        if len({a % 16 for a in A}) != 1:
            return False
    return True


def _property_2(pair: PartitionPair) -> bool:
    # |A cap B| <= 1  <=>  no two members of one nabla set share a delta set
    keys = pair.nabla_label * (int(pair.delta_label.max()) + 1) + pair.delta_label
    return len(np.unique(keys)) == len(keys)


def _property_3(pair: PartitionPair, by_level: dict[int, PartitionPair]) -> tuple[bool, bool]:
    n = pair.n
    js = np.arange(1 << n, 1 << (n + 1), dtype=np.int64)
    in_domain = js // 16 >= 2
    strict_ok = extended_ok = True
    if not in_domain.any():
        return True, True
    js = js[in_domain]
    labels = pair.nabla_label[in_domain]
    for xi in all_xis():
        target = by_level[n + xi_level_shift(xi)]
        img = xi_eval_array(xi, js)
        base = 1 << target.n
        if img.min() < base or img.max() >= 2 * base:
            ok_all = ok_strict = False
        else:
            blocks = target.delta_label[img - base]
            ok_per_set = _constant_on_groups(labels, blocks)
            if xi.family == "h":
                strict_sets = np.unique(labels[js % 16 < FAMILY_RESIDUES["h"]])
                ok_strict = bool(ok_per_set[strict_sets].all())
            else:
                ok_strict = bool(ok_per_set.all())
            ok_all = bool(ok_per_set.all())
        strict_ok &= ok_strict
        extended_ok &= ok_all
    return strict_ok, extended_ok


def _constant_on_groups(groups: np.ndarray, values: np.ndarray) -> np.ndarray:
    size = int(groups.max()) + 1
    lo = np.full(size, np.iinfo(np.int64).max)
    hi = np.full(size, np.iinfo(np.int64).min)
    np.minimum.at(lo, groups, values)
    np.maximum.at(hi, groups, values)
    present = np.zeros(size, dtype=bool)
    present[groups] = True
    return (lo == hi) | ~present


def partitions_to_json(pairs: Sequence[PartitionPair]) -> str:
    return json.dumps([p.to_json() for p in pairs], sort_keys=True)


def shuffled_pair(pair: PartitionPair, seed: int) -> PartitionPair:
    """Negative control: the same nabla set sizes over a random relabelling of ``I_n``."""
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(pair.nabla_label))
    return PartitionPair(
        pair.n, pair.m_n, pair.c_size, pair.d_size, pair.d_split,
        _relabel(pair.nabla_label[perm]), pair.delta_label,
    )
