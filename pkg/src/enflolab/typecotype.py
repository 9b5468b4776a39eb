"""Rademacher averages, type/cotype ratio tables and the disjoint-block cotype witness."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, InputError, ResourceError, SearchFailure
from .interpolation import flat_formula, interp_spec_from, spr_norm
from .schlumprecht import FlatBlockVec, concat_flat, flat_value, s_norm_exact, s_norm_flat_detail
from .vectors import SparseVec, sum_vectors

#: Exhaustive sign enumeration is limited to this many vectors.
MAX_EXHAUSTIVE = 16
#: Sums up to this total length are re-evaluated with the expanded exact oracle.
EXPANDED_LIMIT = 600
#: Largest block length in the default schedule.
SCHEDULE_CAP = 1 << 20


@dataclass(frozen=True)
class RademacherStats:
    mean: float
    max: float
    min: float
    mode: str
    patterns: int
    seed: int | None = None


def _sign_rows(n: int, mode: str, samples: int, seed: int | None) -> np.ndarray:
    if mode == "exhaustive":
        if n > MAX_EXHAUSTIVE:
            raise ResourceError(f"exhaustive sign enumeration is capped at n = {MAX_EXHAUSTIVE}, got {n}")
        grid = (np.arange(1 << n)[:, None] >> np.arange(n)[None, :]) & 1
        return 1 - 2 * grid
    if mode == "monte-carlo":
        if samples < 1:
            raise DomainError("samples must be >= 1")
        rng = np.random.default_rng(seed)
        return rng.choice(np.array([-1, 1]), size=(samples, n))
    raise InputError(f"mode must be 'exhaustive' or 'monte-carlo', got {mode!r}")


def rademacher_stats(vectors: Sequence[SparseVec], norm: Callable[[SparseVec], float],
                     mode: str = "exhaustive", samples: int = 4096, seed: int | None = 0) -> RademacherStats:
    """Mean, max and min of ``||sum eps_i v_i||`` over sign patterns."""
    if not vectors:
        raise InputError("need at least one vector")
    values = np.array([
        norm(sum_vectors(v * int(e) for v, e in zip(vectors, signs)))
        for signs in _sign_rows(len(vectors), mode, samples, seed)
    ])
    return RademacherStats(
        float(values.mean()), float(values.max()), float(values.min()), mode, len(values),
        seed if mode == "monte-carlo" else None,
    )


# --------------------------------------------------------------------------
# ratio tables

@dataclass
class TypeCotypeTable:
    p: float
    r: float
    rows: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"p": self.p, "r": self.r, "rows": self.rows}

    def to_csv(self) -> str:
        buf = io.StringIO()
        cols = ["kind", "n", "s", "norm", "reference", "ratio", "trend"]
        writer = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        writer.writeheader()
        for row in self.rows:
            writer.writerow({k: row.get(k, "") for k in cols})
        return buf.getvalue()


def type_cotype_table(p: float, r: float, n_list: Sequence[int], exponent_grid: Sequence[float],
                      tol: float = 1e-9, kl_n: Sequence[int] = (), kl_eps: float = 1.0) -> TypeCotypeTable:
    """Tabulate ``||e_1 + ... + e_n|| / n^(1/s)`` and, optionally, the cotype-side ratios.

    ``trend`` records whether the type-side ratio over increasing ``n`` is
    decreasing, increasing or neither; a decreasing ratio at ``s = p`` is the
    finite-scale signature of having no type above ``p``.
    """
    interp_spec_from(p, r)
    ns = sorted(set(int(n) for n in n_list))
    if not ns or ns[0] < 1:
        raise DomainError("n_list must contain positive integers")
    norms = {n: spr_norm(np.ones(n), p, r, tol) for n in ns}
    table = TypeCotypeTable(p, r)
    for s in exponent_grid:
        ratios = [norms[n] / n ** (1 / s) for n in ns]
        trend = _trend(ratios)
        for n, ratio in zip(ns, ratios):
            table.rows.append({
                "kind": "type", "n": n, "s": float(s), "norm": norms[n],
                "reference": flat_formula(n, p, r), "ratio": ratio, "trend": trend,
            })
    for n in sorted(set(int(n) for n in kl_n)):
        res = kl_search(n, kl_eps, p, r)
        value = res.certificate["value"]
        table.rows.append({
            "kind": "cotype", "n": n, "s": r, "norm": value,
            "reference": n ** (1 / r), "ratio": n ** (1 / r) / value, "trend": "",
        })
    return table


def _trend(values: Sequence[float], tol: float = 1e-12) -> str:
    if len(values) < 2:
        return "flat"
    diffs = np.diff(values)
    if np.all(diffs < -tol):
        return "decreasing"
    if np.all(diffs > tol):
        return "increasing"
    if np.all(np.abs(diffs) <= tol):
        return "flat"
    return "mixed"


# --------------------------------------------------------------------------
# disjoint normalized blocks with almost-l1 sums

def default_schedule() -> list[int]:
    """``2^(2^(j-1)) - 1`` for ``j = 1, 2, ...`` up to the cap: 1, 3, 15, 255, 65535."""
    out = []
    j = 1
    while (1 << (1 << (j - 1))) - 1 <= SCHEDULE_CAP:
        out.append((1 << (1 << (j - 1))) - 1)
        j += 1
    return out


@dataclass(frozen=True)
class KLVector:
    start: int
    length: int
    height: float

    def flat(self) -> FlatBlockVec:
        head = ((self.start, 0.0),) if self.start else ()
        return FlatBlockVec(head + ((self.length, self.height),))

    def to_json(self) -> dict:
        return {"start": self.start, "length": self.length, "height": self.height}


@dataclass(frozen=True)
class KLResult:
    vectors: tuple[KLVector, ...]
    certificate: dict


def _sum_blocks(vectors: Sequence[KLVector], signs: Sequence[int]) -> FlatBlockVec:
    return concat_flat([FlatBlockVec(((v.length, v.height),)) for v in vectors], signs)


def _sign_max(vectors: Sequence[KLVector]) -> tuple[float, bool]:
    """Largest S-norm of ``sum +-v_j`` over all sign patterns, and whether it is exact."""
    n = len(vectors)
    total = sum(v.length for v in vectors)
    best, exact = 0.0, True
    for signs in _sign_rows(n, "exhaustive", 0, None):
        flat = _sum_blocks(vectors, signs)
        if total <= EXPANDED_LIMIT:
            value = s_norm_exact(flat.expand())
        else:
            res = s_norm_flat_detail(flat)
            value, exact = res.value, exact and res.exact
        best = max(best, value)
    return best, exact


def kl_search(n: int, eps: float, p: float, r: float, schedule: Sequence[int] | None = None) -> KLResult:
    """Find ``n`` successive S-normalized flat blocks whose signed sums have S-norm at most ``1 + eps``.

    Block lengths are taken greedily from ``schedule`` (strictly increasing).
    The certificate bounds the ``S_{p,r}`` norm of the signed sum of the
    products ``x_j^(1-theta) y_j^theta``, where ``x_j`` is the l_t-normalized
    and ``y_j`` the S-normalized block on the same support.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    if not eps > 0:
        raise DomainError("eps must be positive")
    if n > MAX_EXHAUSTIVE:
        raise ResourceError(f"sign enumeration is capped at n = {MAX_EXHAUSTIVE}")
    spec = interp_spec_from(p, r)
    schedule = default_schedule() if schedule is None else [int(m) for m in schedule]
    if any(m < 1 for m in schedule) or any(a >= b for a, b in zip(schedule, schedule[1:])):
        raise InputError("schedule must be strictly increasing positive lengths")
    chosen: list[KLVector] = []
    value, exact = 0.0, True
    start = 0
    k = 0
    # smallest sign-max among rejected extensions of the current family
    closest_miss = math.inf
    while len(chosen) < n:
        if k >= len(schedule):
            raise SearchFailure(
                f"schedule exhausted after {len(chosen)} of {n} vectors",
                closest_miss if math.isfinite(closest_miss) else None)
        m = schedule[k]
        k += 1
        cand = KLVector(start, m, 1.0 / flat_value(m))
        trial_value, trial_exact = _sign_max(chosen + [cand])
        if trial_value <= 1 + eps:
            chosen.append(cand)
            start += m
            value, exact = trial_value, trial_exact
            closest_miss = math.inf
        else:
            closest_miss = min(closest_miss, trial_value)
    theta, t = spec.theta, spec.t
    t_factor = n ** (1 / r) if math.isfinite(r) else 1.0
    cert_value = t_factor * value ** theta
    bound = (1 + eps) ** theta * t_factor
    spr_heights = [
        (v.length ** (-1 / t) if math.isfinite(t) else 1.0) ** (1 - theta) * v.height ** theta for v in chosen
    ]
    certificate = {
        "n": n,
        "eps": eps,
        "p": p,
        "r": r,
        "theta": theta,
        "t": t,
        "s_sign_max": value,
        "s_exact": exact,
        "t_factor": t_factor,
        "value": cert_value,
        "bound": bound,
        "pass": value <= 1 + eps and cert_value <= bound * (1 + 1e-12),
        "spr_heights": spr_heights,
    }
    return KLResult(tuple(chosen), certificate)
