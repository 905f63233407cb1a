"""Command line front-end: single evaluations, sweeps to CSV, engine cross-checks.

Thresholds are given in dB here and converted to linear once; everything
below this module works in linear units.

Exit codes: 0 ok, 2 invalid config, 3 uncached or out-of-range file,
4 numerical failure, 5 engine comparison failed.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import analytic, mc
from .errors import (
    ConfigInvalid,
    DomainError,
    FileUncached,
    IndexOutOfRange,
    QuadratureError,
    WindowTooSmall,
)
from .model import NetworkConfig, Violation, load_config
from .quadrature import DEFAULT_ABS_TOL, DEFAULT_REL_TOL

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_UNCACHED = 3
EXIT_NUMERICAL = 4
EXIT_COMPARE = 5

CSV_HEADER = ("sweep_var", "sweep_value", "file", "engine", "coverage", "coverage_err",
              "delay", "delay_err", "samples", "seed")
ENGINES = ("analytic", "mc")
SWEEP_VARS = ("tau_db", "density_ratio", "activity")
PASS_THRESHOLD = 0.95
Z_LIMIT = 3.0


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


# ---------------------------------------------------------------------------
# grids and rows


def grid(start: float, stop: float, step: float) -> list[float]:
    """Closed grid ``start, start + step, ..., stop``; point i is ``start + i*step``."""
    if not step > 0:
        raise ValueError(f"step must be positive, got {step}")
    if start > stop:
        raise ValueError(f"start {start} exceeds stop {stop}")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [start + i * step for i in range(count)]


def parse_range(text: str) -> list[float]:
    """``"x"`` gives one point, ``"start:stop:step"`` a closed grid."""
    parts = text.split(":")
    try:
        nums = [float(p) for p in parts]
    except ValueError:
        raise ValueError(f"expected a number or start:stop:step, got {text!r}") from None
    if len(nums) == 1:
        return nums
    if len(nums) != 3:
        raise ValueError(f"expected start:stop:step, got {text!r}")
    return grid(*nums)


def parse_files(text: str | None, config: NetworkConfig) -> list[int]:
    if text is None:
        return list(range(1, config.num_files + 1))
    try:
        return [int(f) for f in text.split(",")]
    except ValueError:
        raise ValueError(f"expected comma-separated file indices, got {text!r}") from None


@dataclass(frozen=True)
class SweepSpec:
    """What to vary and what to evaluate at each grid point."""

    variable: str
    values: tuple[float, ...]
    files: tuple[int, ...]
    engines: tuple[str, ...] = ("analytic",)
    tau_db: float | None = None  # fixed threshold when variable is not tau_db
    tier: int | None = None  # activity sweeps only

    def __post_init__(self):
        if self.variable not in SWEEP_VARS:
            raise ValueError(f"unknown sweep variable {self.variable!r}")
        if not self.values:
            raise ValueError("sweep grid is empty")
        if not self.files:
            raise ValueError("no files requested")
        if not self.engines or any(e not in ENGINES for e in self.engines):
            raise ValueError(f"engines must be a nonempty subset of {ENGINES}")
        if self.variable != "tau_db" and self.tau_db is None:
            raise ValueError(f"a fixed tau_db is required when sweeping {self.variable}")
        if self.variable == "activity" and self.tier is None:
            raise ValueError("activity sweeps need a tier index")

    @property
    def label(self) -> str:
        return f"activity{self.tier}" if self.variable == "activity" else self.variable


@dataclass(frozen=True)
class Options:
    samples: int = 100_000
    seed: int = 0
    window_radius: float | None = None
    abs_tol: float = DEFAULT_ABS_TOL
    rel_tol: float = DEFAULT_REL_TOL


@dataclass(frozen=True)
class ResultRow:
    sweep_var: str
    sweep_value: float
    file: int
    engine: str
    coverage: float
    coverage_err: float
    delay: float
    delay_err: float
    samples: int | None = None
    seed: int | None = None

    def cells(self) -> list[str]:
        return [self.sweep_var, _grid_value(self.sweep_value), str(self.file), self.engine,
                _num(self.coverage), _num(self.coverage_err), _num(self.delay),
                _num(self.delay_err), "" if self.samples is None else str(self.samples),
                "" if self.seed is None else str(self.seed)]


def _num(x: float) -> str:
    # repr is the shortest string that round-trips; inf prints as the token inf
    return repr(float(x))


def _grid_value(x: float) -> str:
    # 12 significant digits hides step noise like 0.7000000000000001
    return format(x, ".12g")


def apply_variable(config: NetworkConfig, spec: SweepSpec, value: float) -> tuple[NetworkConfig, float]:
    """Config and linear threshold at one grid point."""
    if spec.variable == "tau_db":
        return config, db_to_linear(value)
    tau = db_to_linear(spec.tau_db)
    if spec.variable == "density_ratio":
        if config.num_tiers < 2:
            raise ConfigInvalid([Violation("DimensionMismatch",
                                           "density_ratio sweeps need at least two tiers")])
        return config.replace_tier(2, density=value * config.tier(1).density), tau
    return config.replace_tier(spec.tier, activity_prob=value), tau


def evaluate(config: NetworkConfig, file: int, tau: float, engine: str, opts: Options,
             label: str = "tau_db", value: float = math.nan) -> ResultRow:
    """Coverage and local delay of one file at one threshold with one engine."""
    if engine == "analytic":
        cov = analytic.coverage(config, file, tau, abs_tol=opts.abs_tol, rel_tol=opts.rel_tol)
        dly = analytic.delay(config, file, tau, abs_tol=opts.abs_tol, rel_tol=opts.rel_tol).total
        return ResultRow(label, value, file, engine, cov.total, cov.abs_error,
                         dly.value, dly.abs_error)
    cov = mc.estimate_coverage(config, file, tau, opts.samples, opts.window_radius, opts.seed)
    dly = mc.estimate_delay(config, file, tau, opts.samples, opts.window_radius, opts.seed)
    return ResultRow(label, value, file, engine, cov.mean, cov.std_error, dly.mean,
                     dly.std_error, cov.samples_used, opts.seed)


def _sweep_job(args):
    config, spec, value, file, engine, opts = args
    cfg, tau = apply_variable(config, spec, value)
    return evaluate(cfg, file, tau, engine, opts, spec.label, value)


def sweep_rows(config: NetworkConfig, spec: SweepSpec, opts: Options, workers: int = 1) -> list[ResultRow]:
    """Rows in grid-major, then file, then engine order, whatever the worker count."""
    jobs = [(config, spec, v, f, e, opts) for v in spec.values for f in spec.files for e in spec.engines]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_sweep_job, jobs))
    return [_sweep_job(j) for j in jobs]


def format_csv(rows: Sequence[ResultRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow(r.cells())
    return buf.getvalue()


def write_atomic(text: str, out: str | Path | None) -> None:
    """Write to ``out`` (stdout when None) without ever leaving a partial file."""
    if out is None:
        sys.stdout.write(text)
        return
    out = Path(out)
    fd, tmp = tempfile.mkstemp(dir=out.parent or ".", prefix=f".{out.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, out)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def run_sweep(config: NetworkConfig, spec: SweepSpec, out: str | Path | None,
              opts: Options = Options(), workers: int = 1) -> list[ResultRow]:
    """Evaluate the sweep and write CSV. Rows are computed before anything is
    written, so a failure leaves no output file behind."""
    rows = sweep_rows(config, spec, opts, workers)
    write_atomic(format_csv(rows), out)
    return rows


# ---------------------------------------------------------------------------
# engine comparison


@dataclass(frozen=True)
class CompareRow:
    metric: str
    file: int
    tau_db: float
    analytic: float
    mc: float
    std_error: float
    ci95: tuple[float, float]
    z: float
    heavy_tail: bool
    seed: int
    verdict: str

    @property
    def passed(self) -> bool:
        return self.verdict.startswith("PASS")


@dataclass
class CompareReport:
    rows: list[CompareRow] = field(default_factory=list)

    @property
    def passed(self) -> int:
        return sum(r.passed for r in self.rows)

    @property
    def pass_fraction(self) -> float:
        return self.passed / len(self.rows) if self.rows else 0.0

    @property
    def ok(self) -> bool:
        return self.pass_fraction >= PASS_THRESHOLD

    def extend(self, other: CompareReport) -> CompareReport:
        self.rows.extend(other.rows)
        return self

    def format(self) -> str:
        lines = [f"{'metric':<8} {'file':>4} {'tau_db':>7} {'analytic':>12} {'mc':>12} "
                 f"{'ci95_lo':>12} {'ci95_hi':>12} {'z':>7} {'seed':>10}  verdict"]
        for r in self.rows:
            lines.append(f"{r.metric:<8} {r.file:>4} {_grid_value(r.tau_db):>7} {_short(r.analytic):>12} "
                         f"{_short(r.mc):>12} {_short(r.ci95[0]):>12} {_short(r.ci95[1]):>12} "
                         f"{_short(r.z, 2):>7} {r.seed:>10}  {r.verdict}")
        lines.append(f"pass fraction: {self.passed}/{len(self.rows)} = {self.pass_fraction:.3f} "
                     f"(threshold {PASS_THRESHOLD})")
        return "\n".join(lines) + "\n"


def _short(x: float, digits: int = 6) -> str:
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, f".{digits}g")


def cell_seed(seed: int, config: NetworkConfig, metric: str, file: int, index: int) -> int:
    """Independent stream per comparison cell, reproducible from the base seed."""
    digest = hashlib.sha256(config.to_json(indent=None).encode()).digest()
    entropy = [seed, int.from_bytes(digest[:8], "little"), ("coverage", "delay").index(metric), file, index]
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


def verdict(analytic_value: float, est: mc.McEstimate) -> tuple[float, str]:
    """z-score and PASS/FAIL label for one cell."""
    if math.isinf(analytic_value):
        label = "PASS(divergence-consistent)" if est.heavy_tail_flag else "FAIL(no heavy tail)"
        return math.nan, label
    if est.std_error == 0.0:
        z = 0.0 if math.isclose(est.mean, analytic_value, rel_tol=1e-12, abs_tol=1e-15) else math.inf
    else:
        z = (est.mean - analytic_value) / est.std_error
    return z, "PASS" if abs(z) <= Z_LIMIT else "FAIL"


def _compare_cell(args) -> CompareRow:
    config, metric, file, index, tau_db, samples, seed, window, opts = args
    tau = db_to_linear(tau_db)
    s = cell_seed(seed, config, metric, file, index)
    if metric == "coverage":
        exact = analytic.coverage(config, file, tau, abs_tol=opts.abs_tol, rel_tol=opts.rel_tol).total
        estimator = mc.estimate_coverage
    else:
        exact = analytic.delay(config, file, tau, abs_tol=opts.abs_tol, rel_tol=opts.rel_tol).total.value
        estimator = mc.estimate_delay
    try:
        est = estimator(config, file, tau, samples, window, s)
    except WindowTooSmall as exc:
        e = exc.estimate
        return CompareRow(metric, file, tau_db, exact, e.mean, e.std_error, (e.ci95_lo, e.ci95_hi),
                          math.nan, e.heavy_tail_flag, s, "FAIL(WindowTooSmall)")
    z, label = verdict(exact, est)
    return CompareRow(metric, file, tau_db, exact, est.mean, est.std_error,
                      (est.ci95_lo, est.ci95_hi), z, est.heavy_tail_flag, s, label)


def run_compare(config: NetworkConfig, taus_db: Sequence[float], files: Sequence[int],
                samples: int = 100_000, seed: int = 0, *, metrics: Sequence[str] = ("coverage", "delay"),
                window_radius: float | None = None, opts: Options = Options(),
                workers: int = 1) -> CompareReport:
    """Analytic value against Monte Carlo estimate on every (metric, file, tau) cell."""
    jobs = [(config, m, f, i, t, samples, seed, window_radius, opts)
            for m in metrics for f in files for i, t in enumerate(taus_db)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_compare_cell, jobs))
    else:
        rows = [_compare_cell(j) for j in jobs]
    return CompareReport(rows)


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(p: argparse.ArgumentParser, *, engine=True, sweep=False) -> None:
    p.add_argument("--config", required=True, help="JSON network config")
    p.add_argument("--file", default=None,
                   help="file index, or comma-separated indices (default: all files)")
    p.add_argument("--tau-db", default=None,
                   help="SIR threshold in dB: a value or start:stop:step")
    if engine:
        p.add_argument("--engine", choices=("analytic", "mc", "both"), default="analytic")
    p.add_argument("--samples", type=int, default=100_000, help="Monte Carlo realizations")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--window-radius", type=float, default=None,
                   help="simulation window radius (default: sized from the sparsest caching tier)")
    p.add_argument("--out", default=None, help="output path (default: standard output)")
    p.add_argument("--abs-tol", type=float, default=DEFAULT_ABS_TOL)
    p.add_argument("--rel-tol", type=float, default=DEFAULT_REL_TOL)
    p.add_argument("--workers", type=int, default=1, help="grid points evaluated in parallel")
    if sweep:
        p.add_argument("--vary", choices=SWEEP_VARS, default="tau_db",
                       help="swept variable; tau_db takes its grid from --tau-db")
        p.add_argument("--range", dest="vrange", default=None,
                       help="start:stop:step for density_ratio or activity sweeps")
        p.add_argument("--tier", type=int, default=None, help="tier whose activity is swept")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cachenet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="coverage and delay at one threshold")
    _add_common(p)
    p = sub.add_parser("simulate", help="Monte Carlo estimate at one threshold")
    _add_common(p, engine=False)
    p = sub.add_parser("sweep", help="parameter sweep to CSV")
    _add_common(p, sweep=True)
    p = sub.add_parser("compare", help="analytic against Monte Carlo, 3-sigma test per cell")
    _add_common(p, engine=False)
    p.add_argument("--metric", choices=("coverage", "delay", "both"), default="both")
    p = sub.add_parser("validate", help="check a config file and list every violation")
    p.add_argument("--config", required=True)
    return parser


def _options(ns) -> Options:
    return Options(ns.samples, ns.seed, ns.window_radius, ns.abs_tol, ns.rel_tol)


def _engines(name: str) -> tuple[str, ...]:
    return ENGINES if name == "both" else (name,)


def _single_tau(ns) -> list[float]:
    if ns.tau_db is None:
        raise ValueError("--tau-db is required")
    return parse_range(ns.tau_db)


def _cmd_eval(ns, config, engines) -> int:
    taus = _single_tau(ns)
    files = parse_files(ns.file, config)
    spec = SweepSpec("tau_db", tuple(taus), tuple(files), engines)
    run_sweep(config, spec, ns.out, _options(ns), ns.workers)
    return EXIT_OK


def _cmd_sweep(ns, config) -> int:
    files = tuple(parse_files(ns.file, config))
    engines = _engines(ns.engine)
    if ns.vary == "tau_db":
        spec = SweepSpec("tau_db", tuple(_single_tau(ns)), files, engines)
    else:
        if ns.vrange is None:
            raise ValueError(f"--range is required when sweeping {ns.vary}")
        taus = _single_tau(ns)
        if len(taus) != 1:
            raise ValueError("--tau-db must be a single value when sweeping another variable")
        spec = SweepSpec(ns.vary, tuple(parse_range(ns.vrange)), files, engines, taus[0], ns.tier)
    run_sweep(config, spec, ns.out, _options(ns), ns.workers)
    return EXIT_OK


def _cmd_compare(ns, config) -> int:
    metrics = ("coverage", "delay") if ns.metric == "both" else (ns.metric,)
    report = run_compare(config, _single_tau(ns), parse_files(ns.file, config), ns.samples,
                         ns.seed, metrics=metrics, window_radius=ns.window_radius,
                         opts=_options(ns), workers=ns.workers)
    write_atomic(report.format(), ns.out)
    return EXIT_OK if report.ok else EXIT_COMPARE


def _glue_values(argv: Sequence[str]) -> list[str]:
    """``--tau-db -5:5:1`` -> ``--tau-db=-5:5:1`` so a leading minus is not read as a flag."""
    out, it = [], iter(argv)
    for a in it:
        if a in ("--tau-db", "--range"):
            nxt = next(it, None)
            out.append(a if nxt is None else f"{a}={nxt}")
        else:
            out.append(a)
    return out


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(_glue_values(sys.argv[1:] if argv is None else argv))
    try:
        try:
            config = load_config(ns.config)
        except OSError as exc:
            print(f"error: cannot read config: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        if ns.command == "validate":
            print(f"{ns.config}: valid ({config.num_tiers} tiers, {config.num_files} files)")
            return EXIT_OK
        if ns.command == "eval":
            return _cmd_eval(ns, config, _engines(ns.engine))
        if ns.command == "simulate":
            return _cmd_eval(ns, config, ("mc",))
        if ns.command == "sweep":
            return _cmd_sweep(ns, config)
        return _cmd_compare(ns, config)
    except ConfigInvalid as exc:
        print(f"error: invalid config {ns.config}:", file=sys.stderr)
        for v in exc.violations:
            print(f"  [{v.kind}] {v.message}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileUncached, IndexOutOfRange) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNCACHED
    except (QuadratureError, WindowTooSmall, DomainError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        parser.error(str(exc))


if __name__ == "__main__":
    sys.exit(main())
