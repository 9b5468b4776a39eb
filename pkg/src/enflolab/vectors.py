"""Exact sparse vectors, the block lattice norm, and operator-norm estimates.

Vectors live on the basis ``(x_j)`` and functionals on ``(x_j^*)``; both are
finitely supported maps from positive indices to :class:`fractions.Fraction`.
The norm of a vector with coefficients ``a_j`` is

    ( sum over Delta-blocks B of ( sum_{j in B} a_j**2 ) ** (p/2) ) ** (1/p)

taken over the Delta-blocks of every level at once, and functionals get the
same formula with the conjugate exponent ``q``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Hashable, Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import DomainError, InputError
from .indices import PartitionTable

VEC = "vec"
FUN = "fun"


def as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, float):
        raise TypeError("floats are not exact; pass a Fraction, int or 'num/den' string")
    return Fraction(value)


def format_fraction(value: Fraction) -> str:
    value = Fraction(value)
    return f"{value.numerator}/{value.denominator}"


class SparseVec:
    """Immutable finitely supported vector (``role='vec'``) or functional (``role='fun'``)."""

    __slots__ = ("_coeffs", "role")

    def __init__(self, coeffs: Mapping[int, object] | Iterable[tuple[int, object]] = (), role: str = VEC):
        if role not in (VEC, FUN):
            raise InputError(f"role must be 'vec' or 'fun', got {role!r}")
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        clean: dict[int, Fraction] = {}
        for j, a in items:
            j = int(j)
            if j < 1:
                raise DomainError(f"indices must be positive, got {j}")
            a = as_fraction(a)
            if a:
                clean[j] = clean.get(j, 0) + a
                if not clean[j]:
                    del clean[j]
        object.__setattr__(self, "_coeffs", dict(sorted(clean.items())))
        object.__setattr__(self, "role", role)

    def __setattr__(self, name, value):
        raise AttributeError("SparseVec is immutable")

    @classmethod
    def unit(cls, j: int, role: str = VEC) -> "SparseVec":
        return cls({j: 1}, role)

    @property
    def coeffs(self) -> Mapping[int, Fraction]:
        return dict(self._coeffs)

    def __getitem__(self, j: int) -> Fraction:
        return self._coeffs.get(j, Fraction(0))

    def __iter__(self) -> Iterator[tuple[int, Fraction]]:
        return iter(self._coeffs.items())

    def __len__(self) -> int:
        return len(self._coeffs)

    def support(self) -> tuple[int, ...]:
        return tuple(self._coeffs)

    def __eq__(self, other) -> bool:
        return isinstance(other, SparseVec) and self.role == other.role and self._coeffs == other._coeffs

    def __hash__(self) -> int:
        return hash((self.role, tuple(self._coeffs.items())))

    def __repr__(self) -> str:
        sym = "x*" if self.role == FUN else "x"
        terms = " ".join(f"{'+' if a > 0 else '-'}{abs(a)}*{sym}{j}" for j, a in self)
        return f"SparseVec({terms or '0'})"

    def _combine(self, other: "SparseVec", sign: int) -> "SparseVec":
        if not isinstance(other, SparseVec):
            return NotImplemented
        if other.role != self.role:
            raise InputError("cannot combine a vector with a functional")
        out = dict(self._coeffs)
        for j, b in other:
            out[j] = out.get(j, 0) + sign * b
        return SparseVec(out, self.role)

    def __add__(self, other):
        return self._combine(other, 1)

    def __sub__(self, other):
        return self._combine(other, -1)

    def __neg__(self):
        return SparseVec({j: -a for j, a in self}, self.role)

    def __mul__(self, scalar):
        s = as_fraction(scalar)
        return SparseVec({j: s * a for j, a in self}, self.role)

    __rmul__ = __mul__

    def to_json(self) -> dict:
        return {"role": self.role, "coeffs": {str(j): format_fraction(a) for j, a in self}}

    @classmethod
    def from_json(cls, data: Mapping) -> "SparseVec":
        return cls({int(j): as_fraction(a) for j, a in data["coeffs"].items()}, data.get("role", VEC))

    def dense(self, index: Sequence[int]) -> np.ndarray:
        return np.array([float(self[j]) for j in index])


def pair(phi: SparseVec, v: SparseVec) -> Fraction:
    """Exact duality pairing ``phi(v)``."""
    if phi.role != FUN or v.role != VEC:
        raise InputError("pair expects (functional, vector)")
    small, large = (phi, v) if len(phi) <= len(v) else (v, phi)
    total = Fraction(0)
    for j, a in small:
        b = large._coeffs.get(j)
        if b is not None:
            total += a * b
    return total


def sum_vectors(vectors: Iterable[SparseVec], role: str = VEC) -> SparseVec:
    out: dict[int, Fraction] = {}
    for v in vectors:
        for j, a in v:
            out[j] = out.get(j, 0) + a
    return SparseVec(out, role)


@dataclass(frozen=True)
class NormSpec:
    """Exponent and partitions defining the block lattice norm (constant K = 1)."""

    p: float
    partitions: PartitionTable

    def __post_init__(self):
        if not 1 <= self.p < 2:
            raise DomainError(f"p must lie in [1, 2), got {self.p}")

    @classmethod
    def build(cls, p: float, n_max: int) -> "NormSpec":
        return cls(float(p), PartitionTable.build(n_max))

    @property
    def q(self) -> float:
        return math.inf if self.p == 1 else self.p / (self.p - 1)

    @property
    def K(self) -> int:
        return 1

    def block_ids(self, indices: np.ndarray) -> np.ndarray:
        indices = np.asarray(indices, dtype=np.int64)
        if indices.size and (indices.min() < 1 or indices.max() >= len(self.partitions.delta_id)):
            bad = indices[(indices < 1) | (indices >= len(self.partitions.delta_id))][0]
            raise InputError(f"index {bad} lies outside the available partition levels")
        return self.partitions.delta_id[indices]

    def float_norm(self, indices: np.ndarray, values: np.ndarray, dual: bool = False) -> float:
        """Norm of ``sum values[k] x_{indices[k]}`` in binary64 (repeated indices add up)."""
        values = np.asarray(values, dtype=float)
        if values.size == 0:
            return 0.0
        self.block_ids(indices)
        # combine repeated coordinates before squaring
        uniq, inv = np.unique(np.asarray(indices), return_inverse=True)
        coef = np.bincount(inv, weights=values, minlength=len(uniq))
        blocks = self.partitions.delta_id[uniq]
        _, binv = np.unique(blocks, return_inverse=True)
        sq = np.bincount(binv, weights=coef * coef)
        return _outer(np.sqrt(sq), self.q if dual else self.p)

    def batch_norms(self, groups: np.ndarray, indices: np.ndarray, values: np.ndarray,
                    n_groups: int, dual: bool = False) -> np.ndarray:
        """Norms of many vectors at once; entry ``k`` contributes ``values[k] x_{indices[k]}`` to vector ``groups[k]``."""
        groups = np.asarray(groups, dtype=np.int64)
        indices = np.asarray(indices, dtype=np.int64)
        values = np.asarray(values, dtype=float)
        out = np.zeros(n_groups)
        if not len(values):
            return out
        self.block_ids(indices)
        # merge repeated coordinates inside a vector, then square per Delta-block
        keys, inv = np.unique(groups * len(self.partitions.delta_id) + indices, return_inverse=True)
        coef = np.bincount(inv, weights=values, minlength=len(keys))
        g = keys // len(self.partitions.delta_id)
        blocks = self.partitions.delta_id[keys % len(self.partitions.delta_id)]
        bkeys, binv = np.unique(g * self.partitions.n_blocks + blocks, return_inverse=True)
        block_l2 = np.sqrt(np.bincount(binv, weights=coef * coef, minlength=len(bkeys)))
        bg = bkeys // self.partitions.n_blocks
        exponent = self.q if dual else self.p
        if math.isinf(exponent):
            np.maximum.at(out, bg, block_l2)
            return out
        np.add.at(out, bg, block_l2 ** exponent)
        return out ** (1 / exponent)


def _outer(block_l2: np.ndarray, exponent: float) -> float:
    if block_l2.size == 0:
        return 0.0
    if math.isinf(exponent):
        return float(block_l2.max())
    if exponent == 1:
        return float(block_l2.sum())
    top = block_l2.max()
    if top == 0:
        return 0.0
    return float(top * np.sum((block_l2 / top) ** exponent) ** (1 / exponent))


def _block_squares(v: SparseVec, spec: NormSpec) -> list[Fraction]:
    sums: dict[int, Fraction] = {}
    for j, a in v:
        if not spec.partitions.covers(j):
            raise InputError(f"index {j} lies outside the available partition levels")
        b = int(spec.partitions.delta_id[j])
        sums[b] = sums.get(b, 0) + a * a
    return list(sums.values())


def lattice_norm(v: SparseVec, spec: NormSpec) -> float:
    if v.role != VEC:
        raise InputError("lattice_norm expects a vector")
    squares = _block_squares(v, spec)
    return _outer(np.sqrt(np.array([float(s) for s in squares])), spec.p)


def dual_norm(phi: SparseVec, spec: NormSpec) -> float:
    if phi.role != FUN:
        raise InputError("dual_norm expects a functional")
    squares = _block_squares(phi, spec)
    return _outer(np.sqrt(np.array([float(s) for s in squares])), spec.q)


# --------------------------------------------------------------------------
# operators

def basis_vector(key: Hashable) -> SparseVec:
    """x-expansion of a basis key: an int ``j`` is ``x_j``; other keys supply ``.vector()``."""
    if isinstance(key, (int, np.integer)):
        return SparseVec.unit(int(key))
    return key.vector()


def basis_functional(key: Hashable) -> SparseVec:
    """Coordinate functional of a basis key (``x_j^*`` or ``key.functional()``)."""
    if isinstance(key, (int, np.integer)):
        return SparseVec.unit(int(key), FUN)
    return key.functional()


class OperatorMatrix:
    """Exact matrix of an operator between spans of basis keys.

    ``entries[(row, col)]`` is the coefficient of basis element ``row`` in the
    image of basis element ``col``.  Keys are ints (the x-basis) or objects with
    ``vector()``/``functional()`` methods, such as :class:`enflolab.enflo.ZId`.
    """

    def __init__(self, cols: Sequence[Hashable], rows: Sequence[Hashable],
                 entries: Mapping[tuple[Hashable, Hashable], object] = (), prefix=None):
        self.cols = tuple(cols)
        self.rows = tuple(rows)
        colset, rowset = set(self.cols), set(self.rows)
        self.entries: dict[tuple[Hashable, Hashable], Fraction] = {}
        self._by_col: dict[Hashable, dict[Hashable, Fraction]] = {c: {} for c in self.cols}
        items = entries.items() if isinstance(entries, Mapping) else entries
        for (r, c), a in items:
            if r not in rowset or c not in colset:
                raise InputError(f"entry {(r, c)} outside the declared rows/columns")
            a = as_fraction(a)
            if a:
                self.entries[(r, c)] = a
                self._by_col[c][r] = a
        self.prefix = prefix
        self._expansions: dict[Hashable, SparseVec] = {}
        self._row_index: dict[int, list[tuple[Hashable, Fraction]]] | None = None

    @classmethod
    def identity(cls, keys: Sequence[Hashable], prefix=None) -> "OperatorMatrix":
        return cls(keys, keys, {(k, k): 1 for k in keys}, prefix)

    def column(self, col: Hashable) -> Mapping[Hashable, Fraction]:
        if col not in self._by_col:
            raise InputError(f"operator has no column {col!r}")
        return self._by_col[col]

    def has_column(self, col: Hashable) -> bool:
        return col in self._by_col

    def image(self, col: Hashable) -> SparseVec:
        """x-expansion of ``T(col)``."""
        if col not in self._expansions:
            self._expansions[col] = sum_vectors(basis_vector(r) * a for r, a in self.column(col).items())
        return self._expansions[col]

    def _rows_by_x(self) -> dict[int, list[tuple[Hashable, Fraction]]]:
        """For each x-index, the rows whose expansion touches it and the coefficient there."""
        if self._row_index is None:
            index: dict[int, list[tuple[Hashable, Fraction]]] = {}
            for r in self.rows:
                for j, b in basis_vector(r):
                    index.setdefault(j, []).append((r, b))
            self._row_index = index
        return self._row_index

    def apply_functional(self, phi: SparseVec, col: Hashable) -> Fraction:
        """``phi(T(col))`` evaluated in x-coordinates."""
        if phi.role != FUN:
            raise InputError("apply_functional expects a functional")
        column = self.column(col)
        index = self._rows_by_x()
        total = Fraction(0)
        for j, a in phi:
            for r, b in index.get(j, ()):
                t = column.get(r)
                if t is not None:
                    total += a * b * t
        return total

    def is_zero(self) -> bool:
        return not self.entries

    def dense(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """``(dom_index, dom_matrix, cod_index, cod_matrix)`` in binary64.

        Column ``k`` of ``dom_matrix`` is the x-expansion of ``cols[k]`` and of
        ``cod_matrix`` the x-expansion of its image.
        """
        dom = [basis_vector(c) for c in self.cols]
        img = [self.image(c) for c in self.cols]
        dom_index = sorted({j for v in dom for j, _ in v})
        cod_index = sorted({j for v in img for j, _ in v})
        D = np.zeros((len(dom_index), len(self.cols)))
        C = np.zeros((len(cod_index), len(self.cols)))
        dpos = {j: i for i, j in enumerate(dom_index)}
        cpos = {j: i for i, j in enumerate(cod_index)}
        for k, (v, w) in enumerate(zip(dom, img)):
            for j, a in v:
                D[dpos[j], k] = float(a)
            for j, a in w:
                C[cpos[j], k] = float(a)
        return np.array(dom_index), D, np.array(cod_index), C


def op_norm_lower(T: OperatorMatrix, dom: NormSpec, cod: NormSpec, budget: int = 16, seed: int = 0) -> float:
    """Certified lower bound on ``||T||`` from sampled, locally improved directions.

    Each of the ``budget`` restarts is seeded from ``(seed, restart)``, so a
    larger budget only adds candidates and the estimate never decreases.
    """
    if budget < 1:
        raise DomainError("budget must be >= 1")
    if T.is_zero():
        return 0.0
    dom_index, D, cod_index, C = T.dense()

    def ratio(a: np.ndarray) -> float:
        den = dom.float_norm(dom_index, D @ a)
        if den == 0:
            return 0.0
        return cod.float_norm(cod_index, C @ a) / den

    k = len(T.cols)
    best = 0.0
    for restart in range(budget):
        rng = np.random.default_rng([seed, restart])
        if restart < k:
            start = np.zeros(k)
            start[restart] = 1.0
        else:
            start = rng.standard_normal(k)
        best = max(best, _pattern_search(ratio, start, rng))
    return best


def _pattern_search(fn: Callable[[np.ndarray], float], x: np.ndarray, rng: np.random.Generator,
                    step: float = 0.5, min_step: float = 1e-7, max_evals: int = 4000) -> float:
    x = x / np.linalg.norm(x)
    fx = fn(x)
    k = len(x)
    evals = 1
    while step > min_step and evals < max_evals:
        improved = False
        dirs = list(np.eye(k)) + list(-np.eye(k)) + list(rng.standard_normal((k, k)))
        for d in dirs:
            y = x + step * d
            ny = np.linalg.norm(y)
            if ny == 0:
                continue
            y = y / ny
            fy = fn(y)
            evals += 1
            if fy > fx:
                x, fx, improved = y, fy, True
        if not improved:
            step /= 2
    return fx


def op_norm_upper(T: OperatorMatrix, dom: NormSpec, cod: NormSpec) -> float:
    """Crude upper bound ``sum_c ||c^*|| * ||T c||`` over the domain basis.

    Coordinate functionals are measured on the whole space, which can only
    overestimate their norm on the span of the domain basis.
    """
    total = 0.0
    for col in T.cols:
        img = T.image(col)
        if not len(img):
            continue
        total += dual_norm(basis_functional(col), dom) * lattice_norm(img, cod)
    return total


def grid_op_norm(T: OperatorMatrix, dom: NormSpec, cod: NormSpec, resolution: int = 400) -> float:
    """Brute-force ``max ||Tu|| / ||u||`` over a dense grid of directions (domain dimension <= 3)."""
    k = len(T.cols)
    if k > 3:
        raise DomainError("the grid oracle handles at most 3 columns")
    if T.is_zero():
        return 0.0
    dom_index, D, cod_index, C = T.dense()
    if k == 1:
        dirs = np.ones((1, 1))
    elif k == 2:
        ang = np.linspace(0, np.pi, 4 * resolution, endpoint=False)
        dirs = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    else:
        # directions up to sign: the upper hemisphere
        th = np.linspace(0, np.pi / 2, resolution + 1)
        ph = np.linspace(0, 2 * np.pi, 4 * resolution, endpoint=False)
        th, ph = np.meshgrid(th, ph, indexing="ij")
        dirs = np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], axis=-1).reshape(-1, 3)
    best = 0.0
    for chunk in np.array_split(dirs, max(1, len(dirs) // 20000)):
        num = _rows_norms(cod, cod_index, chunk @ C.T)
        den = _rows_norms(dom, dom_index, chunk @ D.T)
        ok = den > 0
        if ok.any():
            best = max(best, float((num[ok] / den[ok]).max()))
    return best


def _rows_norms(spec: NormSpec, index: np.ndarray, rows: np.ndarray) -> np.ndarray:
    g, c = np.indices(rows.shape)
    return spec.batch_norms(g.ravel(), index[c.ravel()], rows.ravel(), rows.shape[0])
