"""Calderón–Lozanovskii products ``X^(1-theta) Y^theta`` of two lattice norms.

    ||z|| = inf { ||x||_X^(1-theta) ||y||_Y^theta :  |z| = |x|^(1-theta) |y|^theta }

On the support of ``z`` write ``x = exp(u)``; then ``y = exp(v(u))`` with
``v(u) = (log|z| - (1-theta) u) / theta`` and the logarithm of the product is a
convex function of ``u``.  It is minimised by cyclic coordinate descent with a
golden-section line search, starting from the split ``x = y = |z|``.  The
returned value comes from an explicit factorization, so it is always an upper
bound for the true norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError, InputError
from .schlumprecht import s_norm_exact
from .vectors import VEC, SparseVec

NormOracle = Callable[[np.ndarray], float]

_GOLDEN = (math.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class InterpSpec:
    p: float
    r: float
    theta: float
    t: float

    @property
    def is_schlumprecht(self) -> bool:
        """``S_{1, inf}`` is the Schlumprecht space itself."""
        return self.theta == 1


def interp_spec_from(p: float, r: float) -> InterpSpec:
    p, r = float(p), float(r)
    if not p >= 1:
        raise DomainError(f"p must be >= 1, got {p}")
    if not p < r:
        raise DomainError(f"need p < r, got p={p}, r={r}")
    if math.isinf(r):
        if p != 1:
            raise DomainError("r = inf is only supported with p = 1")
        return InterpSpec(p, r, 1.0, math.inf)
    theta = 1 / p - 1 / r
    return InterpSpec(p, r, theta, (1 - theta) * r)


def lp_oracle(t: float) -> NormOracle:
    if t < 1:
        raise DomainError(f"l_t needs t >= 1, got {t}")
    if math.isinf(t):
        return lambda x: float(np.max(np.abs(x)))

    def norm(x: np.ndarray) -> float:
        a = np.abs(x)
        top = a.max()
        if top == 0:
            return 0.0
        return float(top * np.sum((a / top) ** t) ** (1 / t))

    return norm


def s_oracle() -> NormOracle:
    def norm(x: np.ndarray) -> float:
        return s_norm_exact(x) if np.any(x) else 0.0

    return norm


@dataclass(frozen=True)
class Factorization:
    support: tuple[int, ...]
    u: tuple[float, ...]
    v: tuple[float, ...]
    objective: float

    def to_json(self) -> dict:
        return {"support": list(self.support), "u": list(self.u), "v": list(self.v), "objective": self.objective}


@dataclass(frozen=True)
class CalderonResult:
    value: float
    factorization: Factorization
    stalled: bool
    sweeps: int
    equal_split: float


def _dense(z) -> tuple[np.ndarray, tuple[int, ...]]:
    """Absolute coefficients on positions ``1..N`` and the (1-based) support."""
    if isinstance(z, SparseVec):
        if z.role != VEC:
            raise InputError("expected a vector, not a functional")
        if not len(z):
            raise DomainError("z must be nonzero")
        x = np.zeros(max(z.support()))
        for j, a in z:
            x[j - 1] = abs(float(a))
    else:
        x = np.abs(np.asarray(z, dtype=float))
        if x.ndim != 1:
            raise InputError("expected a 1-d coefficient array")
        if not x.any():
            raise DomainError("z must be nonzero")
    support = tuple(int(k) + 1 for k in np.flatnonzero(x))
    return x, support


class _Objective:
    """``g(u) = (1-theta) log ||e^u||_X + theta log ||e^v(u)||_Y`` on the support."""

    def __init__(self, z: np.ndarray, support, theta: float, norm_x: NormOracle, norm_y: NormOracle):
        self.N = len(z)
        self.pos = np.array(support) - 1
        self.w = np.log(z[self.pos])
        self.theta = theta
        self.norm_x = norm_x
        self.norm_y = norm_y

    def v_of(self, u: np.ndarray) -> np.ndarray:
        return (self.w - (1 - self.theta) * u) / self.theta

    def __call__(self, u: np.ndarray) -> float:
        v = self.v_of(u)
        if u.max() > 700 or v.max() > 700:
            return math.inf
        x = np.zeros(self.N)
        y = np.zeros(self.N)
        x[self.pos] = np.exp(u)
        y[self.pos] = np.exp(v)
        nx, ny = self.norm_x(x), self.norm_y(y)
        if not (nx > 0 and ny > 0 and math.isfinite(nx) and math.isfinite(ny)):
            return math.inf
        return (1 - self.theta) * math.log(nx) + self.theta * math.log(ny)


def calderon_objective(z, theta: float, norm_x: NormOracle, norm_y: NormOracle):
    """The log-domain objective and its starting point (``u = log|z|``)."""
    x, support = _dense(z)
    obj = _Objective(x, support, theta, norm_x, norm_y)
    return obj, obj.w.copy()


def _line_search(fn: Callable[[float], float], f0: float, radius: float, tol: float) -> tuple[float, float]:
    """Minimise a convex function of one variable near 0; returns (argmin, min)."""
    best_s, best_f = 0.0, f0
    for _ in range(8):
        lo, hi = -radius, radius
        a = hi - _GOLDEN * (hi - lo)
        b = lo + _GOLDEN * (hi - lo)
        fa, fb = fn(a), fn(b)
        while hi - lo > tol:
            if fa <= fb:
                hi, b, fb = b, a, fa
                a = hi - _GOLDEN * (hi - lo)
                fa = fn(a)
            else:
                lo, a, fa = a, b, fb
                b = lo + _GOLDEN * (hi - lo)
                fb = fn(b)
        s = (lo + hi) / 2
        fs = fn(s)
        if fs < best_f:
            best_s, best_f = s, fs
        # widen the bracket when the minimum sits on its edge
        if abs(best_s) < 0.9 * radius:
            break
        radius *= 4
    return best_s, best_f


def calderon_norm(z, theta: float, norm_x: NormOracle, norm_y: NormOracle,
                  tol: float = 1e-9, max_sweeps: int = 200) -> CalderonResult:
    if not 0 < theta < 1:
        raise DomainError(f"theta must lie in (0, 1), got {theta}")
    if tol <= 0:
        raise DomainError("tol must be positive")
    x, support = _dense(z)
    obj = _Objective(x, support, theta, norm_x, norm_y)
    u = obj.w.copy()
    g = obj(u)
    equal_split = math.exp(g)
    k = len(u)
    stalled = True
    sweeps = 0
    # a step s in u moves v by (1 - theta) s / theta
    radius = min(1.0, 4 * theta / (1 - theta))
    if k > 1:
        for sweeps in range(1, max_sweeps + 1):
            start = g
            for i in range(k):
                def along(s: float, i=i) -> float:
                    trial = u.copy()
                    trial[i] += s
                    return obj(trial)

                s, fs = _line_search(along, g, radius, tol * 1e-2 + 1e-12)
                if fs < g:
                    u[i] += s
                    g = fs
            if start - g < tol:
                stalled = False
                break
    else:
        stalled = False
    value = math.exp(g)
    fact = Factorization(support, tuple(float(a) for a in u), tuple(float(b) for b in obj.v_of(u)), g)
    return CalderonResult(value, fact, stalled, sweeps, equal_split)


def spr_result(z, p: float, r: float, tol: float = 1e-9) -> CalderonResult | float:
    spec = interp_spec_from(p, r)
    if spec.is_schlumprecht:
        x, _ = _dense(z)
        return s_norm_exact(x)
    return calderon_norm(z, spec.theta, lp_oracle(spec.t), s_oracle(), tol)


def spr_norm(z, p: float, r: float, tol: float = 1e-9) -> float:
    """Norm of ``z`` in ``S_{p,r} = l_t^(1-theta) S^theta``."""
    res = spr_result(z, p, r, tol)
    return res if isinstance(res, float) else res.value


def flat_formula(n: int, p: float, r: float) -> float:
    """``n^(1/p) log2(n+1)^(1/r - 1/p)``."""
    return n ** (1 / p) * math.log2(n + 1) ** (1 / r - 1 / p)
