"""The Schlumprecht norm on finitely supported vectors.

For ``x`` supported on ``1..N`` the norm is the least solution of

    ||x|| = max( ||x||_inf,  sup_{l >= 2, E_1 < ... < E_l} (1 / f(l)) sum_i ||E_i x|| )

with ``f(l) = log2(l + 1)`` and ``E_i`` successive intervals.  It is reached by
iterating the right-hand side from the sup-norm; each sweep recomputes the
value on all ``O(N**2)`` subintervals, and the inner supremum is a dynamic
programme over (interval end, number of pieces).

Every piece of a decomposition is a proper subinterval, so the fixed point can
also be filled in bottom-up in a single pass; :func:`s_norm_exact` does that and
serves as an independent check of the iteration.

Vectors that are constant on long runs ("flat blocks") are handled by
:func:`s_norm_flat`, which only cuts at a few offsets inside each run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from numba import njit

from .errors import ConvergenceError, DomainError, InputError
from .vectors import VEC, SparseVec

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 200
#: Runs up to this length are cut at every offset by :func:`s_norm_flat`.
FULL_GRID_LENGTH = 32
#: Piece counts up to this value are tracked exactly by :func:`s_norm_flat`.
EXACT_COUNTS = 1024


def f(l: int) -> float:
    return math.log2(l + 1)


def flat_value(m: int) -> float:
    """``||e_1 + ... + e_m|| = m / log2(m + 1)``."""
    return m / math.log2(m + 1)


def _f_table(N: int) -> np.ndarray:
    return np.log2(np.arange(N + 2, dtype=float) + 1.0)


def _as_array(v) -> np.ndarray:
    if isinstance(v, SparseVec):
        if v.role != VEC:
            raise InputError("the S-norm is defined on vectors, not functionals")
        if not len(v):
            raise DomainError("v must be nonzero")
        top = max(v.support())
        x = np.zeros(top)
        for j, a in v:
            x[j - 1] = abs(float(a))
        return x
    x = np.abs(np.asarray(v, dtype=float))
    if x.ndim != 1 or x.size == 0:
        raise InputError("expected a nonempty 1-d coefficient array")
    if not np.isfinite(x).all():
        raise InputError("coefficients must be finite")
    if not x.any():
        raise DomainError("v must be nonzero")
    return x


@njit(cache=True)
def _sup_table(x):
    N = len(x)
    V = np.zeros((N, N))
    for a in range(N):
        mx = 0.0
        for b in range(a, N):
            if x[b] > mx:
                mx = x[b]
            V[a, b] = mx
    return V


@njit(cache=True)
def _sweep(V, S, fl):
    """One application of the norm equation to the table ``V`` of subinterval values."""
    N = V.shape[0]
    W = np.zeros((N, N))
    G = np.full((N + 1, N), -np.inf)
    for a in range(N):
        for b in range(a, N):
            G[1, b] = V[a, b]
        for b in range(a, N):
            best = S[a, b]
            for l in range(2, b - a + 2):
                g = -np.inf
                for c in range(a + l - 2, b):
                    v = G[l - 1, c] + V[c + 1, b]
                    if v > g:
                        g = v
                G[l, b] = g
                if g / fl[l] > best:
                    best = g / fl[l]
            W[a, b] = best
    return W


@njit(cache=True)
def _iterate(x, fl, tol, max_iter):
    S = _sup_table(x)
    V = S.copy()
    prev = V[0, len(x) - 1]
    for it in range(1, max_iter + 1):
        W = _sweep(V, S, fl)
        change = np.max(np.abs(W - V))
        V = W
        if change < tol:
            return V[0, len(x) - 1], prev, it, True
        prev = V[0, len(x) - 1]
    return V[0, len(x) - 1], prev, max_iter, False


@njit(cache=True)
def _bottom_up(x, fl):
    N = len(x)
    V = np.zeros((N, N))
    G = np.full((N + 1, N), -np.inf)
    for a in range(N - 1, -1, -1):
        mx = 0.0
        for b in range(a, N):
            if x[b] > mx:
                mx = x[b]
            best = mx
            for l in range(2, b - a + 2):
                g = -np.inf
                for c in range(a + l - 2, b):
                    v = G[l - 1, c] + V[c + 1, b]
                    if v > g:
                        g = v
                G[l, b] = g
                if g / fl[l] > best:
                    best = g / fl[l]
            V[a, b] = best
            G[1, b] = best
    return V


@dataclass(frozen=True)
class SNormResult:
    value: float
    iterations: int
    previous: float


def s_norm_detail(v, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> SNormResult:
    if tol <= 0:
        raise DomainError("tol must be positive")
    if max_iter < 1:
        raise DomainError("max_iter must be >= 1")
    x = _as_array(v)
    value, prev, iters, ok = _iterate(x, _f_table(len(x)), float(tol), int(max_iter))
    if not ok:
        raise ConvergenceError(f"no convergence after {max_iter} sweeps", prev, value)
    return SNormResult(float(value), int(iters), float(prev))


def s_norm(v, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> float:
    """Schlumprecht norm of ``v`` (SparseVec on ``1..N`` or a coefficient array)."""
    return s_norm_detail(v, tol, max_iter).value


def s_norm_exact(v) -> float:
    """The same norm filled in bottom-up over subintervals (no iteration)."""
    x = _as_array(v)
    return float(_bottom_up(x, _f_table(len(x)))[0, -1])


def s_norm_table(v) -> np.ndarray:
    """Norms of all restrictions ``x|[a, b]`` (0-based, inclusive)."""
    x = _as_array(v)
    return _bottom_up(x, _f_table(len(x)))


# --------------------------------------------------------------------------
# flat blocks

@dataclass(frozen=True)
class FlatBlockVec:
    """Successive runs: ``blocks[k] = (m_k, c_k)`` is ``m_k`` coordinates of height ``c_k``."""

    blocks: tuple[tuple[int, float], ...]

    def __post_init__(self):
        merged: list[tuple[int, float]] = []
        for m, c in self.blocks:
            m, c = int(m), float(c)
            if m < 1:
                raise DomainError(f"block lengths must be >= 1, got {m}")
            if not math.isfinite(c):
                raise InputError("block heights must be finite")
            if merged and merged[-1][1] == c:
                merged[-1] = (merged[-1][0] + m, c)
            else:
                merged.append((m, c))
        object.__setattr__(self, "blocks", tuple(merged))

    @classmethod
    def parse(cls, text: str) -> "FlatBlockVec":
        """Parse the shorthand ``"m1:c1,m2:c2,..."``."""
        blocks = []
        for part in text.split(","):
            part = part.strip()
            if not part:
                continue
            try:
                m, c = part.split(":")
                blocks.append((int(m), float(c)))
            except ValueError as exc:
                raise InputError(f"bad flat block {part!r}; expected m:c") from exc
        if not blocks:
            raise InputError("empty flat-block vector")
        return cls(tuple(blocks))

    @property
    def length(self) -> int:
        return sum(m for m, _ in self.blocks)

    def expand(self) -> np.ndarray:
        return np.concatenate([np.full(m, c) for m, c in self.blocks])

    def scaled(self, s: float) -> "FlatBlockVec":
        return FlatBlockVec(tuple((m, c * s) for m, c in self.blocks))

    def to_json(self) -> list:
        return [[m, c] for m, c in self.blocks]


def concat_flat(vectors: Iterable[FlatBlockVec], signs: Sequence[int] | None = None) -> FlatBlockVec:
    vectors = list(vectors)
    signs = [1] * len(vectors) if signs is None else list(signs)
    return FlatBlockVec(tuple((m, s * c) for v, s in zip(vectors, signs) for m, c in v.blocks))


def _offset_grid(m: int) -> list[int]:
    if m <= FULL_GRID_LENGTH:
        return list(range(m))
    grid = {0, m // 2}
    step = 1
    while step < m:
        grid.add(step)
        grid.add(m - step)
        step *= 2
    return sorted(g for g in grid if 0 <= g < m)


def _count_buckets(total: int) -> np.ndarray:
    exact = min(total, EXACT_COUNTS)
    reps = list(range(exact + 1))
    c = exact
    while c < total:
        c = min(total, max(c + 1, math.ceil(c * 2 ** 0.125)))
        reps.append(c)
    return np.array(reps, dtype=np.int64)


@njit(cache=True)
def _flat_dp(pos_block, pos_start, ms, cs, reps):
    P = len(pos_block)
    B = len(reps)
    V = np.zeros((P, P))
    dp = np.full((P, B), -np.inf)
    for i in range(P - 2, -1, -1):
        dp[:, :] = -np.inf
        dp[i, 0] = 0.0
        for q in range(i + 1, P):
            for p in range(i, q):
                jp = pos_block[p]
                within = pos_block[q] == jp or (pos_block[q] == jp + 1 and _is_block_start(q, pos_block))
                L = pos_start[q] - pos_start[p]
                for b in range(B):
                    cur = dp[p, b]
                    if cur == -np.inf:
                        continue
                    if within:
                        h = cs[jp] * L / np.log2(L + 1.0)
                        _push(dp, q, reps, reps[b] + 1, cur + h)
                        _push(dp, q, reps, reps[b] + L, cur + cs[jp] * L)
                    elif p > i:
                        _push(dp, q, reps, reps[b] + 1, cur + V[p, q])
            # value of the interval [i, q)
            jlo = pos_block[i]
            jhi = pos_block[q] if not _is_block_start(q, pos_block) else pos_block[q] - 1
            best = 0.0
            for j in range(jlo, jhi + 1):
                if cs[j] > best:
                    best = cs[j]
            if jlo == jhi:
                L = pos_start[q] - pos_start[i]
                best = cs[jlo] * L / np.log2(L + 1.0)
            else:
                for b in range(B):
                    if reps[b] >= 2 and dp[q, b] > -np.inf:
                        val = dp[q, b] / np.log2(reps[b] + 1.0)
                        if val > best:
                            best = val
            V[i, q] = best
            # [i, q) as a single piece of a longer decomposition
            _push(dp, q, reps, 1, best)
    return V[0, P - 1]


@njit(cache=True)
def _is_block_start(q, pos_block):
    return q == 0 or pos_block[q] != pos_block[q - 1]


@njit(cache=True)
def _push(dp, q, reps, count, value):
    b = np.searchsorted(reps, count)
    if b >= len(reps):
        b = len(reps) - 1
    if value > dp[q, b]:
        dp[q, b] = value


@dataclass(frozen=True)
class FlatNormResult:
    value: float
    exact: bool
    positions: int


def s_norm_flat_detail(v: FlatBlockVec) -> FlatNormResult:
    """Compressed evaluation; ``exact`` is False when a coarse cut grid or count bucketing was used.

    An inexact value is still a lower bound for the norm: it is the best value
    over a subset of decompositions, each scored with a piece count rounded up.
    """
    if not isinstance(v, FlatBlockVec):
        raise InputError("expected a FlatBlockVec")
    ms = np.array([m for m, _ in v.blocks], dtype=np.int64)
    cs = np.array([abs(c) for _, c in v.blocks], dtype=float)
    if not cs.any():
        raise DomainError("v must be nonzero")
    if len(ms) == 1:
        return FlatNormResult(float(cs[0] * flat_value(int(ms[0]))), True, 2)
    starts = np.concatenate([[0], np.cumsum(ms)])
    pos_block, pos_start = [], []
    for j, m in enumerate(ms):
        for o in _offset_grid(int(m)):
            pos_block.append(j)
            pos_start.append(int(starts[j]) + o)
    pos_block.append(len(ms))
    pos_start.append(int(starts[-1]))
    total = int(starts[-1])
    reps = _count_buckets(total)
    value = _flat_dp(np.array(pos_block, dtype=np.int64), np.array(pos_start, dtype=np.int64), ms, cs, reps)
    exact = bool(ms.max() <= FULL_GRID_LENGTH and total <= EXACT_COUNTS)
    return FlatNormResult(float(value), exact, len(pos_block))


def s_norm_flat(v: FlatBlockVec, tol: float = DEFAULT_TOL) -> float:
    """Schlumprecht norm of a flat-block vector without expanding long runs."""
    if tol <= 0:
        raise DomainError("tol must be positive")
    return s_norm_flat_detail(v).value
