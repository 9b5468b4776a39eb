"""The biorthogonal system ``(z_{i,e}, z*_{i,e})``, the spaces ``X_t`` and their traces.

For ``i >= 2`` and ``e in {0, 1}``

    z_{i,0} = x_{8i} - x_{8i+1} + x_{8i+2} - x_{8i+3} + sum_{l in {0,1,4,5,8,9,12,13}} x_{16i+l}
    z_{i,1} = x_{8i+4} - x_{8i+5} + x_{8i+6} - x_{8i+7} + sum_{l in {2,3,6,7,10,11,14,15}} x_{16i+l}

and ``z*_{i,e} = (x*_{8i+4e} - x*_{8i+4e+1}) / 2`` restricted to the span of the
``z``'s.  A bit word ``t`` picks ``X_t = span{ z_{j,t(n)} : j in I_n }`` and the
``n``-trace of ``T : X_t -> Z`` is ``2^-n sum_{j in I_n} z*_{j,t(n)}(T z_{j,t(n)})``.

Operators are :class:`~enflolab.vectors.OperatorMatrix` instances whose rows
and columns are :class:`ZId` keys; every functional is evaluated on the
x-expansion of the image, so both sides of the telescoping identity are
computed independently and compared exactly.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import DomainError, InputError, PreconditionError
from .indices import (
    all_xis,
    block_of,
    block_range,
    nabla_case_residues,
    xi_eval,
    xi_eval_array,
)
from .vectors import FUN, NormSpec, OperatorMatrix, SparseVec, format_fraction

_TAIL = {0: (0, 1, 4, 5, 8, 9, 12, 13), 1: (2, 3, 6, 7, 10, 11, 14, 15)}


class ZId(NamedTuple):
    i: int
    eps: int

    def vector(self) -> SparseVec:
        return build_z(self)

    def functional(self) -> SparseVec:
        return build_zstar(self)

    def __str__(self) -> str:
        return f"z{self.i},{self.eps}"


def _check_id(zid: ZId) -> ZId:
    i, eps = int(zid[0]), int(zid[1])
    if i < 2:
        raise DomainError(f"z_(i,e) needs i >= 2, got i={i}")
    if eps not in (0, 1):
        raise DomainError(f"eps must be 0 or 1, got {eps}")
    return ZId(i, eps)


@lru_cache(maxsize=1 << 16)
def _z(i: int, eps: int) -> SparseVec:
    head = 8 * i + 4 * eps
    coeffs = {head: 1, head + 1: -1, head + 2: 1, head + 3: -1}
    coeffs.update({16 * i + l: 1 for l in _TAIL[eps]})
    return SparseVec(coeffs)


def build_z(zid: ZId) -> SparseVec:
    return _z(*_check_id(zid))


@lru_cache(maxsize=1 << 16)
def _zstar(i: int, eps: int) -> SparseVec:
    half = Fraction(1, 2)
    return SparseVec({8 * i + 4 * eps: half, 8 * i + 4 * eps + 1: -half}, FUN)


def build_zstar(zid: ZId) -> SparseVec:
    return _zstar(*_check_id(zid))


def zstar_representations(zid: ZId) -> tuple[SparseVec, SparseVec, SparseVec, SparseVec]:
    """Four x*-combinations that coincide with ``z*_{i,e}`` on the span of the z's."""
    i, eps = _check_id(zid)
    half, quarter = Fraction(1, 2), Fraction(1, 4)
    a = 8 * i + 4 * eps
    b = 16 * i + 2 * eps
    return (
        SparseVec({a: half, a + 1: -half}, FUN),
        SparseVec({a + 2: half, a + 3: -half}, FUN),
        SparseVec({b: quarter, b + 1: quarter, b + 8: quarter, b + 9: quarter}, FUN),
        SparseVec({b + 4: quarter, b + 5: quarter, b + 12: quarter, b + 13: quarter}, FUN),
    )


def z_containing(j: int) -> list[tuple[ZId, int]]:
    """The (at most two) ``z``'s whose support contains ``x_j``, with the coefficient there."""
    out = []
    k, r = divmod(j, 8)
    if k >= 2:
        eps = r // 4
        out.append((ZId(k, eps), 1 if r % 2 == 0 else -1))
    k, l = divmod(j, 16)
    if k >= 2:
        out.append((ZId(k, 0 if l in _TAIL[0] else 1), 1))
    return out


@dataclass(frozen=True)
class BitPrefix:
    """A finite word ``t(1) ... t(N)``."""

    bits: tuple[int, ...]

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if not bits:
            raise InputError("a bit prefix needs at least one bit")
        if any(b not in (0, 1) for b in bits):
            raise InputError("bits must be 0 or 1")
        object.__setattr__(self, "bits", bits)

    @classmethod
    def parse(cls, text: str) -> "BitPrefix":
        return cls(tuple(int(c) for c in text.strip()))

    def __len__(self) -> int:
        return len(self.bits)

    def __call__(self, n: int) -> int:
        if not 1 <= n <= len(self.bits):
            raise InputError(f"level {n} outside the prefix of length {len(self.bits)}")
        return self.bits[n - 1]

    def __str__(self) -> str:
        return "".join(map(str, self.bits))


def xt_basis(t: BitPrefix, n_range: Iterable[int]) -> list[ZId]:
    """``z_{j,t(n)}`` for ``j in I_n`` and ``n`` in the range, ordered by ``j``."""
    levels = sorted(set(n_range))
    for n in levels:
        if n < 1 or n > len(t):
            raise InputError(f"level {n} outside the prefix of length {len(t)}")
    return [ZId(j, t(n)) for n in levels for j in block_range(n)]


def z_basis(levels: Iterable[int]) -> list[ZId]:
    """Both ``z_{j,0}`` and ``z_{j,1}`` for ``j`` in the given levels (``j >= 2``)."""
    return [ZId(j, e) for n in sorted(set(levels)) if n >= 1 for j in block_range(n) for e in (0, 1)]


def n_trace(T: OperatorMatrix, t: BitPrefix, n: int) -> Fraction:
    if n < 1:
        raise DomainError("the trace starts at level 1")
    total = Fraction(0)
    for zid in xt_basis(t, [n]):
        if not T.has_column(zid):
            raise InputError(f"operator has no column for {zid}")
        total += T.apply_functional(build_zstar(zid), zid)
    return total / (1 << n)


# --------------------------------------------------------------------------
# y vectors and the telescoping identity

def case_of_residue(l: int) -> tuple[int, int]:
    """The case ``(e, d)`` whose residue set ``{r, r+1, r+8, r+9}`` contains ``l``."""
    r = l % 8
    return (r // 4, (r % 4) // 2)


def y_terms(j: int, case: tuple[int, int]) -> tuple[tuple[int, ZId], tuple[int, ZId]]:
    """``y_j = s * z_{2i or 2i+1, e} - z_{i, d}`` as ((s, upper id), (-1, lower id))."""
    eps, delta = int(case[0]), int(case[1])
    if (eps, delta) not in ((0, 0), (0, 1), (1, 0), (1, 1)):
        raise InputError(f"case must be a pair of bits, got {case}")
    i, l = divmod(int(j), 16)
    if i < 2:
        raise DomainError(f"y_j needs j = 16i + l with i >= 2, got {j}")
    r = 4 * eps + 2 * delta
    if l % 8 not in (r, r + 1):
        raise InputError(f"residue {l} of j={j} does not belong to case {case}")
    upper = 2 * i + (1 if l >= 8 else 0)
    sign = 1 if l % 2 == 0 else -1
    return ((sign, ZId(upper, eps)), (-1, ZId(i, delta)))


@lru_cache(maxsize=1 << 16)
def _y(j: int, eps: int, delta: int) -> SparseVec:
    (s, up), (_, low) = y_terms(j, (eps, delta))
    return build_z(up) * s - build_z(low)


def build_y(j: int, case: tuple[int, int]) -> SparseVec:
    return _y(int(j), int(case[0]), int(case[1]))


def y_support_split(j: int, case: tuple[int, int] | None = None) -> dict:
    """Classify the support of ``y_j`` by the support map whose image it is."""
    case = case_of_residue(j % 16) if case is None else case
    y = build_y(j, case)
    images = {fam: {xi_eval(xi, j, strict=False): xi for xi in all_xis() if xi.family == fam} for fam in "fgh"}
    split = {"f": 0, "g": 0, "h": 0, "other": 0}
    for k, _ in y:
        fam = next((f for f in "fgh" if k in images[f]), "other")
        split[fam] += 1
    mods = sorted(abs(a) for _, a in y)
    return {
        "j": j,
        "nonzero": len(y),
        "modulus_one": sum(1 for a in mods if a == 1),
        "modulus_two": sum(1 for a in mods if a == 2),
        "split": split,
    }


def _beta_with(T: OperatorMatrix, n: int, eps: int) -> Fraction:
    total = Fraction(0)
    for j in block_range(n):
        zid = ZId(j, eps)
        if not T.has_column(zid):
            raise InputError(f"operator has no column for {zid}")
        total += T.apply_functional(build_zstar(zid), zid)
    return total / (1 << n)


@dataclass(frozen=True)
class TraceReport:
    n: int
    beta_n: Fraction
    beta_prev: Fraction
    rhs: Fraction
    residual: Fraction
    case: tuple[int, int]

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "case": list(self.case),
            "beta_n": format_fraction(self.beta_n),
            "beta_prev": format_fraction(self.beta_prev),
            "rhs": format_fraction(self.rhs),
            "residual": format_fraction(self.residual),
        }


def telescope_report(T: OperatorMatrix, t: BitPrefix, n: int) -> TraceReport:
    """Both sides of ``beta^n - beta^(n-1) = 2^(-n-1) sum_{j in I_{n+3}(t(n), t(n-1))} x*_j T(y_j)``."""
    if n < 2:
        raise DomainError("the telescoping identity needs n >= 2")
    case = (t(n), t(n - 1))
    beta_n = _beta_with(T, n, case[0])
    beta_prev = _beta_with(T, n - 1, case[1])
    rhs = Fraction(0)
    residues = set(nabla_case_residues(*case))
    for j in block_range(n + 3):
        if j % 16 not in residues:
            continue
        (s, up), (_, low) = y_terms(j, case)
        xj = SparseVec.unit(j, FUN)
        for coef, zid in ((s, up), (-1, low)):
            if not T.has_column(zid):
                raise InputError(f"operator has no column for {zid}")
            rhs += coef * T.apply_functional(xj, zid)
    rhs /= 1 << (n + 1)
    return TraceReport(n, beta_n, beta_prev, rhs, (beta_n - beta_prev) - rhs, case)


def telescope_residual(T: OperatorMatrix, t: BitPrefix, n: int) -> Fraction:
    return telescope_report(T, t, n).residual


def vanishing_trace(t: BitPrefix, s: BitPrefix, m: int, T: OperatorMatrix) -> Fraction:
    """``beta^m_t(T)`` for ``T : X_t -> X_s``; zero whenever ``t(m) != s(m)``."""
    if t(m) == s(m):
        raise PreconditionError(f"t and s agree at level {m}")
    for row in T.rows:
        if not isinstance(row, ZId) or row.eps != s(block_of(row.i)):
            raise InputError(f"row {row} is not in the X_s basis")
    return n_trace(T, t, m)


# --------------------------------------------------------------------------
# random operators

def random_rational(rng: random.Random, bound: int = 1 << 16) -> Fraction:
    num = 0
    while num == 0:
        num = rng.randint(-bound, bound)
    return Fraction(num, rng.randint(1, bound))


def random_operator(cols: Sequence, rows: Sequence, seed: int, density: float = 0.25,
                    bound: int = 1 << 16, prefix=None) -> OperatorMatrix:
    """Sparse operator with random rational entries; about ``density`` of all entries are nonzero."""
    if not 0 < density <= 1:
        raise DomainError("density must lie in (0, 1]")
    rng = random.Random(seed)
    entries = {}
    for c in cols:
        for r in rows:
            if rng.random() < density:
                entries[(r, c)] = random_rational(rng, bound)
    return OperatorMatrix(cols, rows, entries, prefix)


def telescope_operator(t: BitPrefix, n: int, seed: int, density: float = 0.25) -> OperatorMatrix:
    """Random ``T : X_t -> Z`` on levels ``n-1, n`` with images in the z's of levels ``n-1, n``.

    Those are exactly the z's whose supports meet ``I_{n+3}``, so every term of
    both sides of the telescoping identity can be nonzero.
    """
    cols = xt_basis(t, [n - 1, n])
    rows = z_basis([n - 1, n])
    return random_operator(cols, rows, seed, density, prefix=t)


def inclusion(t: BitPrefix, levels: Iterable[int]) -> OperatorMatrix:
    return OperatorMatrix.identity(xt_basis(t, levels), prefix=t)


def trace_linearity(T: OperatorMatrix, t: BitPrefix, n: int) -> Fraction:
    """``beta^n(Id - T) - (1 - beta^n(T))``; always 0."""
    basis = xt_basis(t, [n])
    rows = list(dict.fromkeys(list(T.rows) + basis))
    entries = {(r, c): -a for (r, c), a in T.entries.items() if c in set(basis)}
    for z in basis:
        entries[(z, z)] = entries.get((z, z), 0) + 1
    diff = OperatorMatrix(basis, rows, entries, t)
    return n_trace(diff, t, n) - (1 - n_trace(T, t, n))


# --------------------------------------------------------------------------
# the bound chain behind alpha_n

def _sign_patterns(size: int, samples: int, rng: np.random.Generator) -> np.ndarray:
    if size <= 20 and (1 << size) <= samples:
        grid = (np.arange(1 << size)[:, None] >> np.arange(size)[None, :]) & 1
        return 1 - 2 * grid
    return rng.choice(np.array([-1, 1]), size=(samples, size))


def _y_arrays(js: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """x-indices and coefficients of ``y_j`` for each ``j`` (21 entries each)."""
    idx = np.empty((len(js), 21), dtype=np.int64)
    val = np.empty((len(js), 21))
    for k, j in enumerate(js):
        y = build_y(int(j), case_of_residue(int(j) % 16))
        idx[k] = list(y.support())
        val[k] = [float(a) for _, a in y]
    return idx, val


def alpha_bound_report(p: float, n_range: Iterable[int], sign_samples: int = 64, seed: int = 0,
                       m_levels: int = 16, slack: float = 1e-9, with_wap: bool = True) -> dict:
    """Evaluate the three norm estimates that bound the trace increments.

    For every level ``n``, every case ``(e, d)``, every ``A`` in the nabla
    partition of ``I_{n+3}`` lying in the case's residues and every sign pattern
    (all of them when there are at most ``sign_samples``):

    * ``||sum theta_j x*_j||`` against ``(2 m_{n+3})^(1/q)``
    * ``||sum theta_j x_{xi(j)}||`` for each of the 55 support maps against ``(2 m_{n+3})^(1/2)``
    * ``||sum theta_j y_j||`` against ``42 (2 m_{n+3})^(1/2)``
    """
    levels = sorted(set(int(n) for n in n_range))
    if not levels or levels[0] < 2:
        raise DomainError("levels must be >= 2")
    top = levels[-1] + 4
    spec = NormSpec.build(p, max(top, m_levels))
    table = spec.partitions
    rng = np.random.default_rng(seed)
    xis = all_xis()
    q = spec.q
    out_levels = []
    alpha_sum = 0.0
    for n in levels:
        N = n + 3
        pair_ = table[N]
        m = pair_.m_n
        bounds = {
            "dual": (2 * m) ** (1 / q) if math.isfinite(q) else 1.0,
            "image": math.sqrt(2 * m),
            "y_aggregate": 42 * math.sqrt(2 * m),
        }
        worst = {k: 0.0 for k in bounds}
        n_sets = n_instances = 0
        case_counts = {}
        wap = []
        for eps in (0, 1):
            for delta in (0, 1):
                sets = pair_.nabla_sets_in(nabla_case_residues(eps, delta))
                case_counts[f"{eps}{delta}"] = len(sets)
                n_sets += len(sets)
                groups, members, signs = [], [], []
                g = 0
                for A in sets:
                    for theta in _sign_patterns(len(A), sign_samples, rng):
                        groups.extend([g] * len(A))
                        members.extend(A)
                        signs.extend(theta)
                        g += 1
                if not g:
                    continue
                n_instances += g
                groups_a = np.array(groups)
                members_a = np.array(members)
                signs_a = np.array(signs, dtype=float)
                dual = spec.batch_norms(groups_a, members_a, signs_a, g, dual=True)
                worst["dual"] = max(worst["dual"], float(dual.max()) / bounds["dual"])
                for xi in xis:
                    img = xi_eval_array(xi, members_a)
                    norms = spec.batch_norms(groups_a, img, signs_a, g)
                    worst["image"] = max(worst["image"], float(norms.max()) / bounds["image"])
                yidx, yval = _y_arrays(members_a)
                ynorm = spec.batch_norms(np.repeat(groups_a, 21), yidx.ravel(),
                                         (yval * signs_a[:, None]).ravel(), g)
                worst["y_aggregate"] = max(worst["y_aggregate"], float(ynorm.max()) / bounds["y_aggregate"])
                if with_wap:
                    sizes = np.bincount(groups_a, minlength=g)
                    dual_factor = sizes ** (1 / q) if math.isfinite(q) else np.ones(g)
                    scale = len(sets) * dual_factor / 2 ** (n + 1)
                    wap.append({"case": [eps, delta], "size": g, "max_norm": float((scale * ynorm).max())})
        alpha = 84 * m ** (0.5 - 1 / p)
        alpha_sum += alpha
        row = {
            "n": n,
            "level": N,
            "m": m,
            "sets": n_sets,
            "instances": n_instances,
            "case_counts": case_counts,
            "bounds": bounds,
            "worst_ratio": worst,
            "pass": {k: worst[k] <= 1 + slack for k in worst},
            "alpha": alpha,
            "alpha_partial_sum": alpha_sum,
        }
        if with_wap:
            row["wap_sets"] = wap
            row["wap_max_norm"] = max((w["max_norm"] for w in wap), default=0.0)
        out_levels.append(row)
    m_lines = [
        {"n": n, "m": table[n].m_n, "bound": 2 ** (n / 32 - 1), "pass": table[n].m_n >= 2 ** (n / 32 - 1)}
        for n in range(4, m_levels + 1)
    ]
    return {
        "p": p,
        "q": q if math.isfinite(q) else "inf",
        "K": 1,
        "sign_samples": sign_samples,
        "seed": seed,
        "levels": out_levels,
        "m_lower_bound": m_lines,
        "summability": (
            "alpha_n = 84 m_{n+3}^(1/2-1/p); at these levels m_n is small so alpha_n is close to 84. "
            "Summability follows from m_n >= 2^(n/32-1) and 1/2 - 1/p < 0, not from the finite sums above."
        ),
        "pass": all(all(r["pass"].values()) for r in out_levels) and all(l["pass"] for l in m_lines),
    }

