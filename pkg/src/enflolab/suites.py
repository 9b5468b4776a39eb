"""Named verification suites.

Each suite is a fixed list of independent checks.  Checks run on a worker pool
(``ENFLO_LAB_THREADS`` caps its size) and are reported in their declared
order, so the report depends only on the configuration.
"""

from __future__ import annotations

import math
import os
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from . import enflo, indices
from .errors import InputError
from .interpolation import flat_formula, spr_norm
from .schlumprecht import FlatBlockVec, s_norm, s_norm_exact, s_norm_flat
from .typecotype import kl_search, rademacher_stats
from .vectors import NormSpec, OperatorMatrix, SparseVec, grid_op_norm, lattice_norm, op_norm_lower, pair

SUITES = ("partition", "enflo", "schlumprecht", "interp", "cotype")


@dataclass(frozen=True)
class SuiteConfig:
    suite: str = "all"
    p: float | None = None
    r: float | None = None
    depth: int = 8
    cases: str = "all"
    seed: int = 7
    max_level: int = 12
    operators: int = 100
    vanishing: int = 50
    samples: int = 64
    n: int = 4
    eps: float = 1.0
    timings: bool = False
    extra: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.suite not in SUITES + ("all",):
            raise InputError(f"unknown suite {self.suite!r}; choose from {', '.join(SUITES + ('all',))}")
        if self.p is not None and self.suite in ("enflo", "partition") and not 1 <= self.p < 2:
            raise InputError("p must lie in [1, 2) for the enflo suite")
        if not 2 <= self.depth <= 12:
            raise InputError("depth must lie in 2..12")
        if not 4 <= self.max_level <= indices.MAX_LEVEL - 1:
            raise InputError(f"max-level must lie in 4..{indices.MAX_LEVEL - 1}")
        if self.cases not in ("all", "00", "01", "10", "11"):
            raise InputError("cases must be 'all' or one of 00, 01, 10, 11")
        if self.operators < 1 or self.vanishing < 1 or self.samples < 1:
            raise InputError("operator and sample counts must be positive")
        if not self.eps > 0 or self.n < 1:
            raise InputError("cotype needs n >= 1 and eps > 0")


Check = Callable[[], dict]


def _status(ok: bool) -> str:
    return "pass" if ok else "fail"


# --------------------------------------------------------------------------
# partition

def partition_checks(cfg: SuiteConfig) -> list[tuple[str, Check]]:
    required = ("property_1", "property_2", "property_3", "m_n_lower_bound", "product_size",
                "factor_size_floor_bound", "d_split_balanced", "nabla_case_bound")

    def levels() -> dict:
        pairs = indices.build_partitions(cfg.max_level + 1)
        rows = [r for r in indices.verify_partition_properties(pairs) if r["n"] <= cfg.max_level]
        ok = all(r[k] == "pass" for r in rows for k in required) and all(
            r.get("size_recursion", "pass") == "pass" for r in rows)
        return {"status": _status(ok), "details": {"levels": rows}}

    def m_bound() -> dict:
        table = indices.PartitionTable.build(16)
        rows = [{"n": n, "m": table[n].m_n, "bound": 2 ** (n / 32 - 1)} for n in range(4, 17)]
        return {"status": _status(all(r["m"] >= r["bound"] for r in rows)), "details": {"levels": rows}}

    def negative_control() -> dict:
        pairs = indices.build_partitions(7)
        bad = indices.shuffled_pair(pairs[2], cfg.seed)
        rows = indices.verify_partition_properties(pairs[:2] + [bad] + pairs[3:])
        r6 = next(r for r in rows if r["n"] == 6)
        detected = r6["property_2"] == "fail" or r6["property_3"] == "fail"
        return {"status": _status(detected), "details": {"property_2": r6["property_2"], "property_3": r6["property_3"]}}

    return [("partition.properties", levels), ("partition.m_lower_bound", m_bound),
            ("partition.shuffled_control", negative_control)]


# --------------------------------------------------------------------------
# enflo

def _case_list(cases: str) -> list[tuple[int, int]]:
    if cases == "all":
        return [(0, 0), (0, 1), (1, 0), (1, 1)]
    return [(int(cases[0]), int(cases[1]))]


def biorthogonality(top: int = 1 << 10) -> dict:
    """``z*_{i,e}(z_{j,t}) = delta`` for all ``2 <= i, j <= top``.

    Pairs whose supports are disjoint vanish trivially; the inverted index
    ``z_containing`` locates every pair that can be nonzero and is itself
    checked for completeness against the explicit supports.
    """
    ids = [enflo.ZId(i, e) for i in range(2, top + 1) for e in (0, 1)]
    for z in ids:
        for j, a in enflo.build_z(z):
            if (z, int(a)) not in enflo.z_containing(j):
                return {"status": "fail", "details": {"index_missing": [str(z), j]}}
    explicit = failures = 0
    for zs in ids:
        phi = enflo.build_zstar(zs)
        candidates = {z for j, _ in phi for z, _ in enflo.z_containing(j) if z.i <= top}
        if zs not in candidates:
            failures += 1
        for z in candidates:
            explicit += 1
            if pair(phi, enflo.build_z(z)) != (1 if z == zs else 0):
                failures += 1
    return {"status": _status(failures == 0),
            "details": {"functionals": len(ids), "pairs_total": len(ids) ** 2,
                        "pairs_evaluated": explicit, "failures": failures}}


def representations(top: int = 1 << 8) -> dict:
    ids = [enflo.ZId(i, e) for i in range(2, top + 1) for e in (0, 1)]
    explicit = failures = 0
    for zs in ids:
        reps = enflo.zstar_representations(zs)
        for phi in reps:
            candidates = {z for j, _ in phi for z, _ in enflo.z_containing(j) if z.i <= top} | {zs}
            for z in candidates:
                explicit += 1
                if pair(phi, enflo.build_z(z)) != (1 if z == zs else 0):
                    failures += 1
        # pairwise differences annihilate every z
        for a in reps[1:]:
            diff = reps[0] - a
            for z in {z for j, _ in diff for z, _ in enflo.z_containing(j) if z.i <= top}:
                if pair(diff, enflo.build_z(z)) != 0:
                    failures += 1
    return {"status": _status(failures == 0), "details": {"pairs_evaluated": explicit, "failures": failures}}


def telescoping(cfg: SuiteConfig) -> dict:
    rng = random.Random(cfg.seed)
    cases = _case_list(cfg.cases)
    rows = []
    for k in range(cfg.operators):
        n = rng.randint(2, cfg.depth)
        bits = [rng.randint(0, 1) for _ in range(n)]
        bits[n - 1], bits[n - 2] = cases[k % len(cases)]
        t = enflo.BitPrefix(tuple(bits))
        T = enflo.telescope_operator(t, n, seed=cfg.seed * 1_000_003 + k)
        rep = enflo.telescope_report(T, t, n)
        rows.append({"t": str(t), "n": n, "case": list(rep.case), "residual": rep.residual,
                     "increment": float(rep.beta_n - rep.beta_prev)})
    covered = sorted({tuple(r["case"]) for r in rows})
    ok = all(r["residual"] == 0 for r in rows) and len(covered) == len(cases)
    return {"status": _status(ok), "details": {"operators": len(rows), "cases_covered": covered, "runs": rows}}


def vanishing(cfg: SuiteConfig) -> dict:
    rng = random.Random(cfg.seed + 1)
    rows = []
    for k in range(cfg.vanishing):
        N = rng.randint(2, min(cfg.depth, 7))
        t = enflo.BitPrefix(tuple(rng.randint(0, 1) for _ in range(N)))
        m = rng.randint(1, N)
        s_bits = [rng.randint(0, 1) for _ in range(N)]
        s_bits[m - 1] = 1 - t(m)
        s = enflo.BitPrefix(tuple(s_bits))
        T = enflo.random_operator(enflo.xt_basis(t, [m]), enflo.xt_basis(s, range(1, N + 1)),
                                  seed=cfg.seed * 7919 + k)
        rows.append({"t": str(t), "s": str(s), "m": m, "entries": len(T.entries),
                     "beta": enflo.vanishing_trace(t, s, m, T)})
    return {"status": _status(all(r["beta"] == 0 for r in rows)), "details": {"runs": rows}}


def y_structure(top_level: int = 12) -> dict:
    bad = []
    count = 0
    for j in range(32, (1 << top_level) + 1):
        rep = enflo.y_support_split(j)
        count += 1
        if not (rep["nonzero"] == 21 and rep["modulus_one"] == 20 and rep["modulus_two"] == 1
                and rep["split"] == {"f": 4, "g": 9, "h": 8, "other": 0}):
            bad.append(rep)
    return {"status": _status(not bad), "details": {"checked": count, "failures": bad[:10]}}


def trace_checks(cfg: SuiteConfig) -> dict:
    rng = random.Random(cfg.seed + 2)
    rows = []
    for n in range(1, cfg.depth + 1):
        t = enflo.BitPrefix(tuple(rng.randint(0, 1) for _ in range(n)))
        incl = enflo.inclusion(t, [n])
        zero = OperatorMatrix(enflo.xt_basis(t, [n]), enflo.z_basis([n]))
        row = {"n": n, "inclusion": enflo.n_trace(incl, t, n), "zero": enflo.n_trace(zero, t, n)}
        if n <= 6:
            T = enflo.random_operator(enflo.xt_basis(t, [n]), enflo.z_basis([n]), seed=cfg.seed + n)
            row["linearity_residual"] = enflo.trace_linearity(T, t, n)
        rows.append(row)
    ok = all(r["inclusion"] == 1 and r["zero"] == 0 and r.get("linearity_residual", 0) == 0 for r in rows)
    return {"status": _status(ok), "details": {"levels": rows}}


def alpha_bounds(cfg: SuiteConfig) -> dict:
    p = 1.0 if cfg.p is None else cfg.p
    rep = enflo.alpha_bound_report(p, range(2, min(cfg.depth, 10) + 1), cfg.samples, cfg.seed)
    return {"status": _status(rep["pass"]), "details": rep}


def op_norm_oracle(cfg: SuiteConfig, trials: int = 4) -> dict:
    rng = random.Random(cfg.seed + 3)
    p = 1.0 if cfg.p is None else cfg.p
    dom = NormSpec.build(p, 8)
    rows = []
    for k in range(trials):
        dim = 2 + k % 2
        cols = rng.sample(range(64, 256), dim)
        outs = rng.sample(range(64, 256), dim)
        T = OperatorMatrix(cols, outs, {(r, c): Fraction(rng.randint(-64, 64), rng.randint(1, 16))
                                        for r in outs for c in cols})
        lower = op_norm_lower(T, dom, dom, budget=16, seed=cfg.seed)
        grid = grid_op_norm(T, dom, dom)
        rows.append({"dim": dim, "lower": lower, "grid": grid, "rel_diff": abs(lower - grid) / grid})
    return {"status": _status(all(r["rel_diff"] <= 0.01 for r in rows)), "details": {"runs": rows}}


def enflo_checks(cfg: SuiteConfig) -> list[tuple[str, Check]]:
    return [
        ("enflo.biorthogonality", biorthogonality),
        ("enflo.zstar_representations", representations),
        ("enflo.telescoping", lambda: telescoping(cfg)),
        ("enflo.vanishing_trace", lambda: vanishing(cfg)),
        ("enflo.y_structure", y_structure),
        ("enflo.traces", lambda: trace_checks(cfg)),
        ("enflo.alpha_bounds", lambda: alpha_bounds(cfg)),
        ("enflo.op_norm_oracle", lambda: op_norm_oracle(cfg)),
    ]


# --------------------------------------------------------------------------
# schlumprecht / interp / cotype

def flat_sums(top: int = 64) -> dict:
    rows = [{"n": n, "value": s_norm(np.ones(n)), "formula": n / math.log2(n + 1)} for n in range(1, top + 1)]
    err = max(abs(r["value"] - r["formula"]) for r in rows)
    return {"status": _status(err <= 1e-6), "details": {"max_error": err, "values": rows}}


def flat_oracle(cfg: SuiteConfig, trials: int = 100) -> dict:
    rng = np.random.default_rng(cfg.seed)
    worst = 0.0
    for _ in range(trials):
        k = int(rng.integers(1, 5))
        blocks = tuple((int(rng.integers(1, 9)), float(rng.choice([rng.random(), rng.integers(1, 5) / 4])))
                       for _ in range(k))
        v = FlatBlockVec(blocks)
        worst = max(worst, abs(s_norm_flat(v) - s_norm(v.expand())))
    return {"status": _status(worst <= 1e-9), "details": {"trials": trials, "max_difference": worst}}


def iteration_vs_bottom_up(cfg: SuiteConfig, trials: int = 50) -> dict:
    rng = np.random.default_rng(cfg.seed + 1)
    worst = 0.0
    for _ in range(trials):
        x = rng.random(int(rng.integers(1, 25)))
        # sparse patterns exercise the zero coordinates
        x[rng.random(len(x)) < 0.3] = 0.0
        if not x.any():
            continue
        worst = max(worst, abs(s_norm(x) - s_norm_exact(x)))
    return {"status": _status(worst <= 1e-9), "details": {"trials": trials, "max_difference": worst}}


def schlumprecht_checks(cfg: SuiteConfig) -> list[tuple[str, Check]]:
    return [("schlumprecht.flat_sums", flat_sums),
            ("schlumprecht.flat_oracle", lambda: flat_oracle(cfg)),
            ("schlumprecht.iteration_vs_bottom_up", lambda: iteration_vs_bottom_up(cfg))]


def interp_values(pairs=((2.0, 4.0), (1.0, 2.0)), ns=(2, 4, 8, 16)) -> dict:
    rows = []
    for p, r in pairs:
        for n in ns:
            value = spr_norm(np.ones(n), p, r)
            ref = flat_formula(n, p, r)
            rows.append({"p": p, "r": r, "n": n, "value": value, "formula": ref,
                         "rel_diff": abs(value - ref) / ref, "excess": value - ref})
    ok = all(r["rel_diff"] <= 0.02 and r["excess"] <= 1e-6 for r in rows)
    return {"status": _status(ok), "details": {"values": rows}}


def interp_checks(cfg: SuiteConfig) -> list[tuple[str, Check]]:
    return [("interp.flat_values", interp_values)]


def kl_witness(cfg: SuiteConfig) -> dict:
    p = 2.0 if cfg.p is None else cfg.p
    r = 4.0 if cfg.r is None else cfg.r
    res = kl_search(cfg.n, cfg.eps, p, r)
    cert = res.certificate
    ok = cert["pass"] and cert["s_exact"]
    return {"status": _status(ok), "details": {"vectors": res.vectors, "certificate": cert}}


def rademacher_oracle(cfg: SuiteConfig, n: int = 10) -> dict:
    rng = np.random.default_rng(cfg.seed)
    spec = NormSpec.build(1.0 if cfg.p is None or cfg.p >= 2 else cfg.p, 8)
    vectors = [SparseVec({int(j): Fraction(int(rng.integers(-8, 9)) or 1, 4) for j in rng.choice(np.arange(64, 256), 6, replace=False)})
               for _ in range(n)]
    norm = lambda v: lattice_norm(v, spec)
    exact = rademacher_stats(vectors, norm, "exhaustive")
    mc = rademacher_stats(vectors, norm, "monte-carlo", 4096, cfg.seed)
    rel = abs(mc.mean - exact.mean) / exact.mean
    return {"status": _status(rel <= 0.02), "details": {"exhaustive": exact, "monte_carlo": mc, "rel_diff": rel}}


def cotype_checks(cfg: SuiteConfig) -> list[tuple[str, Check]]:
    return [("cotype.kl_witness", lambda: kl_witness(cfg)),
            ("cotype.rademacher_oracle", lambda: rademacher_oracle(cfg))]


_BUILDERS = {
    "partition": partition_checks,
    "enflo": enflo_checks,
    "schlumprecht": schlumprecht_checks,
    "interp": interp_checks,
    "cotype": cotype_checks,
}


def worker_count() -> int:
    raw = os.environ.get("ENFLO_LAB_THREADS", "")
    try:
        return max(1, int(raw)) if raw else min(4, os.cpu_count() or 1)
    except ValueError:
        return 1


def _run_check(suite: str, name: str, fn: Check, timings: bool) -> dict:
    start = time.perf_counter()
    try:
        out = fn()
    except Exception as exc:  # module errors become failed checks
        out = {"status": "error", "details": {"error": type(exc).__name__, "message": str(exc)}}
    record = {"suite": suite, "name": name, "status": out["status"], "details": out.get("details", {})}
    if timings:
        record["runtime_s"] = time.perf_counter() - start
    return record


def run_suite(config: SuiteConfig) -> tuple[int, dict]:
    """Run the configured suite(s); returns ``(exit_status, report)``."""
    config.validate()
    names = SUITES if config.suite == "all" else (config.suite,)
    jobs = [(s, name, fn) for s in names for name, fn in _BUILDERS[s](config)]
    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        futures = [pool.submit(_run_check, s, name, fn, config.timings) for s, name, fn in jobs]
        checks = [f.result() for f in futures]
    ok = all(c["status"] == "pass" for c in checks)
    report = {
        "suite": config.suite,
        "config": {k: v for k, v in vars(config).items() if k not in ("timings", "extra")},
        "checks": checks,
        "summary": {"total": len(checks), "passed": sum(c["status"] == "pass" for c in checks)},
        "pass": ok,
    }
    return (0 if ok else 1), report
