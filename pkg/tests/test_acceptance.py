"""Acceptance criteria, one test per criterion.

Each test prints a single ``PASS``/``FAIL`` line with the measured quantity and
the wall time, and fails if either the criterion or its time budget is missed.
Run directly (``python3 tests/test_acceptance.py``) for just the summary lines.
"""

from __future__ import annotations

import sys
import time

import pytest

from enflolab import suites
from enflolab.suites import SuiteConfig

RESULTS: dict[int, tuple[bool, str]] = {}


def _report(number: int, title: str, ok: bool, detail: str, elapsed: float, budget: float) -> tuple[bool, str]:
    in_time = elapsed < budget
    status = "PASS" if ok and in_time else "FAIL"
    line = f"[{status}] criterion {number:2d} {title}: {detail} ({elapsed:.1f}s, budget {budget:.0f}s)"
    RESULTS[number] = (ok and in_time, line)
    return ok and in_time, line


def _timed(fn):
    start = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - start


def criterion_1():
    cfg = SuiteConfig(suite="partition", max_level=12)
    checks, elapsed = _timed(lambda: [fn() for _, fn in suites.partition_checks(cfg)])
    props, m_bound, control = checks
    levels = props["details"]["levels"]
    ok = all(c["status"] == "pass" for c in checks)
    detail = f"levels {levels[0]['n']}..{levels[-1]['n']} items 1-3 {props['status']}, m_n bound {m_bound['status']}"
    return _report(1, "partition properties", ok, detail, elapsed, 120)


def criterion_2():
    (bio, reps), elapsed = _timed(lambda: (suites.biorthogonality(1 << 10), suites.representations(1 << 8)))
    ok = bio["status"] == reps["status"] == "pass"
    detail = (f"{bio['details']['pairs_total']} pairs, {bio['details']['failures']} failures; "
              f"representations {reps['details']['failures']} failures")
    return _report(2, "biorthogonality", ok, detail, elapsed, 60)


def criterion_3():
    cfg = SuiteConfig(operators=100, depth=8, cases="all")
    out, elapsed = _timed(lambda: suites.telescoping(cfg))
    d = out["details"]
    nonzero = sum(r["residual"] != 0 for r in d["runs"])
    ok = out["status"] == "pass" and d["operators"] >= 100 and len(d["cases_covered"]) == 4
    detail = f"{d['operators']} operators, cases {d['cases_covered']}, nonzero residuals {nonzero}"
    return _report(3, "telescoping identity", ok, detail, elapsed, 180)


def criterion_4():
    cfg = SuiteConfig(vanishing=50)
    out, elapsed = _timed(lambda: suites.vanishing(cfg))
    runs = out["details"]["runs"]
    ok = out["status"] == "pass" and len(runs) >= 50
    detail = f"{len(runs)} operators, nonzero traces {sum(r['beta'] != 0 for r in runs)}"
    return _report(4, "vanishing trace", ok, detail, elapsed, 60)


def criterion_5():
    out, elapsed = _timed(lambda: suites.y_structure(12))
    d = out["details"]
    detail = f"{d['checked']} indices, {len(d['failures'])} failures"
    return _report(5, "y_j structure", out["status"] == "pass", detail, elapsed, 60)


def criterion_6():
    from enflolab.enflo import alpha_bound_report

    def run():
        return [alpha_bound_report(p, range(2, 11), sign_samples=64, seed=7) for p in (1.0, 1.5)]

    reports, elapsed = _timed(run)
    ok = all(r["pass"] for r in reports)
    worst = max(v for r in reports for lv in r["levels"] for v in lv["worst_ratio"].values())
    detail = f"p in (1, 1.5), 2 <= n <= 10, worst bound ratio {worst:.6f}"
    return _report(6, "proof inequalities", ok, detail, elapsed, 300)


def criterion_7():
    out, elapsed = _timed(lambda: suites.flat_sums(64))
    err = out["details"]["max_error"]
    return _report(7, "Schlumprecht flat sums", err <= 1e-6, f"max error {err:.3e}", elapsed, 120)


def criterion_8():
    out, elapsed = _timed(suites.interp_values)
    rows = out["details"]["values"]
    rel = max(r["rel_diff"] for r in rows)
    excess = max(r["excess"] for r in rows)
    detail = f"max rel diff {rel:.3e}, max excess {excess:.3e}"
    return _report(8, "interpolated flat sums", out["status"] == "pass", detail, elapsed, 300)


def criterion_9():
    from enflolab.typecotype import kl_search

    res, elapsed = _timed(lambda: kl_search(4, 1.0, 2.0, 4.0))
    cert = res.certificate
    starts = [v.start for v in res.vectors]
    ends = [v.start + v.length for v in res.vectors]
    disjoint = all(e <= s for e, s in zip(ends, starts[1:]))
    bound = 2 ** 0.25 * 4 ** 0.25
    ok = disjoint and cert["s_exact"] and cert["s_sign_max"] <= 2 and cert["value"] <= bound
    detail = (f"lengths {[v.length for v in res.vectors]}, sign-max {cert['s_sign_max']:.6f}, "
              f"certificate {cert['value']:.6f} <= {bound:.6f}")
    return _report(9, "cotype witness", ok, detail, elapsed, 300)


def criterion_10():
    cfg = SuiteConfig()

    def run():
        return suites.op_norm_oracle(cfg), suites.flat_oracle(cfg), suites.rademacher_oracle(cfg, n=10)

    (ops, flat, rad), elapsed = _timed(run)
    ok = all(c["status"] == "pass" for c in (ops, flat, rad))
    op_rel = max(r["rel_diff"] for r in ops["details"]["runs"])
    detail = (f"op norm rel {op_rel:.2e}, flat diff {flat['details']['max_difference']:.1e}, "
              f"Rademacher rel {rad['details']['rel_diff']:.2e}")
    return _report(10, "oracle equivalences", ok, detail, elapsed, 300)


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9, criterion_10]


@pytest.mark.parametrize("criterion", CRITERIA, ids=lambda f: f.__name__)
def test_criterion(criterion, capsys):
    ok, line = criterion()
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    failed = 0
    for c in CRITERIA:
        ok, line = c()
        print(line, flush=True)
        failed += not ok
    sys.exit(1 if failed else 0)
