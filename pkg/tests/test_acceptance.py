"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the verdict lines are written
straight to the terminal even when output capture is on.
"""

import math
import random
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from cachenet import analytic as an
from cachenet import cli
from cachenet.analytic import INFINITE, RhoKind
from cachenet.model import two_tier_example, validate_network

from conftest import db, single_tier, tier_dict

TESTS = Path(__file__).resolve().parent
TAUS_DB = [float(t) for t in range(-10, 11)]
EIGHT_TAUS_DB = [float(t) for t in np.linspace(-10.0, 10.0, 8)]


@pytest.fixture
def verdict(capsys):
    def emit(n, ok, detail, started):
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'} ({time.perf_counter() - started:.1f}s) {detail}"
        with capsys.disabled():
            print("\n" + line)
        assert ok, line
    return emit


def test_criterion_1_rho_battery(verdict):
    t0 = time.perf_counter()
    r2 = math.sqrt(2.0)
    cases = [
        (an.rho(RhoKind.RHO1, 4.0, 1.0), math.pi / 4),
        (an.rho(RhoKind.RHO2, 4.0, 1.0), math.pi / 4),
        (an.rho(RhoKind.RHO4, 4.0, 1.0, 0.5), r2 * math.atan(r2)),
        (an.rho(RhoKind.RHO3, 4.0, 1.0, 0.5), r2 * (math.pi / 2 - math.atan(r2))),
    ]
    worst = max(abs(got - want) for got, want in cases)
    diverges = all(an.rho(RhoKind.RHO4, alpha, tau, 1.0) == INFINITE
                   for alpha in (2.5, 4.0, 6.0) for tau in (0.1, 1.0, 10.0))
    ok = worst <= 1e-9 and diverges and time.perf_counter() - t0 < 1.0
    verdict(1, ok, f"max |error| {worst:.2e}; rho4 at full activity infinite: {diverges}", t0)


def test_criterion_2_single_tier_reductions(verdict):
    t0 = time.perf_counter()
    worst, mismatched, cells = 0.0, 0, 0
    for p in (0.2, 0.5, 1.0):
        for a in (0.25, 0.5, 1.0):
            cfg = single_tier(p, activity=a)
            q = 1.0 - p
            for tdb in (-5, 0, 5):
                tau = db(tdb)
                r = {k: an.rho(k, 4.0, tau, a) for k in RhoKind}
                cov_closed = p / (p + a * (r[RhoKind.RHO1] + q * r[RhoKind.RHO2]))
                inside = q * r[RhoKind.RHO4] if q > 0 else 0.0
                den = p - a * (r[RhoKind.RHO3] + inside)
                dly_closed = p / den if den > 0 and math.isfinite(den) else INFINITE
                cov = an.coverage(cfg, 1, tau).total
                dly = an.delay(cfg, 1, tau).total.value
                cells += 2
                worst = max(worst, abs(cov - cov_closed) / cov_closed)
                if math.isinf(dly_closed) or math.isinf(dly):
                    mismatched += dly != dly_closed
                else:
                    worst = max(worst, abs(dly - dly_closed) / dly_closed)
    ok = worst <= 1e-6 and mismatched == 0 and time.perf_counter() - t0 < 30
    verdict(2, ok, f"{cells} cells, max rel error {worst:.2e}, infinite mismatches {mismatched}", t0)


def test_criterion_3_conventional_hetnet(verdict):
    t0 = time.perf_counter()
    rng = random.Random(20240601)
    worst, draws = 0.0, 0
    for K in (1, 2, 3):
        for _ in range(20):
            tiers = [tier_dict(density=10 ** rng.uniform(-1, 1), power=10 ** rng.uniform(-2, 2),
                               alpha=4.0, activity=1.0, probs=(1.0, 1.0), size=2) for _ in range(K)]
            cfg = validate_network({"tiers": tiers, "num_files": 2})
            tau = db(rng.uniform(-10, 10))
            want = 1.0 / (1.0 + an.rho(RhoKind.RHO1, 4.0, tau))
            for n in (1, 2):
                worst = max(worst, abs(an.coverage(cfg, n, tau).total - want))
            draws += 1
    ok = worst <= 1e-8
    verdict(3, ok, f"{draws} networks over K in 1..3, max |error| {worst:.2e}", t0)


def test_criterion_4_closed_form_consistency(verdict):
    t0 = time.perf_counter()
    worst, cells, inf_mismatch = 0.0, 0, 0
    for strategy in ("IS", "DS"):
        for activity in ((1.0, 1.0), (0.5, 0.5)):
            cfg = two_tier_example(strategy, activity=activity)
            for n in (1, 2):
                for tdb in EIGHT_TAUS_DB:
                    tau = db(tdb)
                    c1, c2 = an.coverage(cfg, n, tau).total, an.coverage_equal_alpha(cfg, n, tau).total
                    worst = max(worst, abs(c1 - c2) / c2)
                    d1, d2 = an.delay(cfg, n, tau).total.value, an.delay_equal_alpha(cfg, n, tau).value
                    if math.isinf(d1) or math.isinf(d2):
                        inf_mismatch += d1 != d2
                    else:
                        worst = max(worst, abs(d1 - d2) / d2)
                    cells += 2
    ok = worst <= 1e-6 and inf_mismatch == 0 and time.perf_counter() - t0 < 60
    verdict(4, ok, f"{cells} cells, max rel error {worst:.2e}, infinite mismatches {inf_mismatch}", t0)


def test_criterion_5_cross_engine(verdict):
    t0 = time.perf_counter()
    taus = [-10.0, -5.0, 0.0, 5.0, 10.0]
    report = cli.CompareReport()
    for strategy in ("IS", "DS"):
        report.extend(cli.run_compare(two_tier_example(strategy), taus, [1, 2],
                                      samples=100_000, metrics=("coverage",)))
        report.extend(cli.run_compare(two_tier_example(strategy, activity=(0.5, 0.5)), taus, [1, 2],
                                      samples=100_000, metrics=("delay",)))
    failed = [f"{r.metric}/file{r.file}/{r.tau_db:g}dB z={r.z:.2f}" for r in report.rows if not r.passed]
    elapsed = time.perf_counter() - t0
    ok = len(report.rows) == 40 and report.pass_fraction >= 0.95 and elapsed < 600
    verdict(5, ok, f"{report.passed}/{len(report.rows)} cells within 3 sigma"
                   + (f"; failed: {', '.join(failed)}" if failed else ""), t0)


def _series(cfg, n, metric):
    if metric == "coverage":
        return [an.coverage(cfg, n, db(t)).total for t in TAUS_DB]
    return [an.delay(cfg, n, db(t)).total.value for t in TAUS_DB]


def test_criterion_6_figure_one_claims(verdict):
    t0 = time.perf_counter()
    problems = []
    nets = {(s, r, a): two_tier_example(s, density_ratio=r, activity=(a, a))
            for s in ("IS", "DS") for r in (1.0, 4.0) for a in (1.0, 0.5)}
    series = {(key, n, m): _series(cfg, n, m)
              for key, cfg in nets.items() for n in (1, 2) for m in ("coverage", "delay")}

    for (key, n, m), ys in series.items():  # (i)
        pairs = list(zip(ys, ys[1:]))
        if m == "coverage" and not all(b < a for a, b in pairs):
            problems.append(f"(i) coverage not decreasing {key} file {n}")
        if m == "delay" and not all(b >= a for a, b in pairs):
            problems.append(f"(i) delay decreasing {key} file {n}")

    for key in nets:  # (ii)
        c1, c2 = series[(key, 1, "coverage")], series[(key, 2, "coverage")]
        d1, d2 = series[(key, 1, "delay")], series[(key, 2, "delay")]
        if not all(b >= a for a, b in zip(c1, c2)):
            problems.append(f"(ii) file 2 coverage below file 1 {key}")
        if not all(b <= a for a, b in zip(d1, d2)):
            problems.append(f"(ii) file 2 delay above file 1 {key}")

    for a in (1.0, 0.5):  # (iii)
        lo, hi = ("DS", 1.0, a), ("DS", 4.0, a)
        if not all(y > x for x, y in zip(series[(lo, 2, "coverage")], series[(hi, 2, "coverage")])):
            problems.append(f"(iii) DS file 2 coverage not raised (a={a})")
        if not all(y < x for x, y in zip(series[(lo, 1, "coverage")], series[(hi, 1, "coverage")])):
            problems.append(f"(iii) DS file 1 coverage not lowered (a={a})")

    worst = 0.0  # (iv)
    for a in (1.0, 0.5):
        for n in (1, 2):
            for m in ("coverage", "delay"):
                for x, y in zip(series[(("IS", 1.0, a), n, m)], series[(("IS", 4.0, a), n, m)]):
                    if math.isinf(x) or math.isinf(y):
                        worst = max(worst, 0.0 if x == y else math.inf)
                    else:
                        worst = max(worst, abs(x - y))
    if worst > 1e-9:
        problems.append(f"(iv) IS density ratio changes outputs by {worst:.2e}")

    verdict(6, not problems, "; ".join(problems) or
            f"claims i-iv hold on {len(TAUS_DB)} thresholds, 8 networks; IS ratio gap {worst:.1e}", t0)


def test_criterion_7_activity_monotone(verdict):
    t0 = time.perf_counter()
    grid = (0.0, 0.25, 0.5, 0.75, 1.0)
    tau = db(-5)
    cov = np.array([[an.coverage(two_tier_example("IS", density_ratio=4.0, activity=(a1, a2)), 1, tau).total
                     for a2 in grid] for a1 in grid])
    along_a1 = bool(np.all(np.diff(cov, axis=0) <= 0))
    along_a2 = bool(np.all(np.diff(cov, axis=1) <= 0))
    ok = along_a1 and along_a2
    verdict(7, ok, f"5x5 grid, coverage {cov.max():.4f} -> {cov.min():.4f}; "
                   f"nonincreasing in a1: {along_a1}, in a2: {along_a2}", t0)


def test_criterion_8_invariant_suites(verdict):
    t0 = time.perf_counter()
    suites = ["test_model.py", "test_quadrature.py", "test_analytic.py", "test_mc.py"]
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", *suites],
                          cwd=TESTS, capture_output=True, text=True)
    summary = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:]
    verdict(8, proc.returncode == 0, f"module suites: {summary}", t0)
