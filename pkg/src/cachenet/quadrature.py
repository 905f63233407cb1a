"""Adaptive one-dimensional quadrature with explicit error control.

Globally adaptive Gauss-Kronrod (7-point Gauss embedded in a 15-point
Kronrod rule): the interval with the largest error estimate is bisected
until the summed estimate meets ``max(abs_tol, rel_tol * |value|)`` or the
evaluation budget runs out. Semi-infinite ranges are mapped onto [0, 1)
with ``u = lo + scale * t / (1 - t)``.

Integrands may be scalar callables or, with ``vectorized=True``, accept and
return numpy arrays (15 nodes per call), which is much faster.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DivergenceSuspected, NoConvergence, NonFiniteEvaluation, QuadratureError

DEFAULT_ABS_TOL = 1e-10
DEFAULT_REL_TOL = 1e-8
DEFAULT_MAX_EVALS = 10_000

_EPS = np.finfo(float).eps
_TINY = np.finfo(float).tiny
# relative panel width below which the outermost nodes round onto the endpoints
_MIN_WIDTH = 256 * _EPS
# initial panels on the mapped [0, 1) interval
_SEMI_INFINITE_PANELS = 4

# Kronrod abscissae on [0, 1]; odd positions (1, 3, 5, 7) are the Gauss nodes.
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

# full symmetric node set on [-1, 1] and matching weights
NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
GAUSS_WEIGHTS = np.zeros(15)
_gauss_pos = [1, 3, 5, 7, 9, 11, 13]
GAUSS_WEIGHTS[_gauss_pos] = np.concatenate([_WG[:-1], _WG[::-1]])


@dataclass(frozen=True)
class IntegrationResult:
    value: float
    abs_error_estimate: float
    evaluations: int


def _evaluator(f, vectorized):
    if vectorized:
        return lambda x: np.asarray(f(x), dtype=float)
    return lambda x: np.array([f(float(xi)) for xi in x], dtype=float)


def _gk15(fv, a, b):
    """One Gauss-Kronrod panel. Returns (integral, error estimate)."""
    centre = 0.5 * (a + b)
    half = 0.5 * (b - a)
    y = fv(centre + half * NODES)
    if not np.all(np.isfinite(y)):
        bad = centre + half * NODES[~np.isfinite(y)]
        raise NonFiniteEvaluation(f"integrand is not finite at x = {bad[0]!r}")
    kronrod = half * float(KRONROD_WEIGHTS @ y)
    gauss = half * float(GAUSS_WEIGHTS @ y)
    # QUADPACK-style error estimate
    mean = kronrod / (2.0 * half) if half else 0.0
    resabs = abs(half) * float(KRONROD_WEIGHTS @ np.abs(y))
    resasc = abs(half) * float(KRONROD_WEIGHTS @ np.abs(y - mean))
    err = abs(kronrod - gauss)
    if resasc != 0.0 and err != 0.0:
        err = resasc * min(1.0, (200.0 * err / resasc) ** 1.5)
    if resabs > _TINY / (50.0 * _EPS):
        err = max(50.0 * _EPS * resabs, err)
    return kronrod, err


def _adaptive(fv, lo, hi, abs_tol, rel_tol, max_evals, panels=1):
    # several starting panels make it harder for one smooth-looking panel to
    # hide structure from the error estimate
    edges = np.linspace(lo, hi, panels + 1)
    heap = []
    total = total_err = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        v, e = _gk15(fv, float(a), float(b))
        heap.append((-e, float(a), float(b), v, e))
        total += v
        total_err += e
    heapq.heapify(heap)
    evals = 15 * panels
    while True:
        if total_err <= max(abs_tol, rel_tol * abs(total)):
            return IntegrationResult(total, total_err, evals)
        if not heap or evals + 30 > max_evals:
            partial = IntegrationResult(total, total_err, evals)
            reason = "evaluation budget exhausted" if heap else "roundoff limits subdivision"
            raise NoConvergence(
                f"{reason}: estimate {total!r}, error {total_err:.3g} after {evals} evaluations",
                partial,
            )
        _, a, b, v, e = heapq.heappop(heap)
        mid = 0.5 * (a + b)
        if (b - a) <= _MIN_WIDTH * max(abs(a), abs(b)):
            # halves this narrow would put outer nodes on the endpoints; its error stays in the total
            continue
        try:
            v1, e1 = _gk15(fv, a, mid)
            v2, e2 = _gk15(fv, mid, b)
        except NonFiniteEvaluation as exc:
            exc.partial = IntegrationResult(total, total_err, evals)
            raise
        evals += 30
        total += v1 + v2 - v
        total_err += e1 + e2 - e
        heapq.heappush(heap, (-e1, a, mid, v1, e1))
        heapq.heappush(heap, (-e2, mid, b, v2, e2))


def integrate_finite(
    f: Callable,
    lo: float,
    hi: float,
    abs_tol: float = DEFAULT_ABS_TOL,
    rel_tol: float = DEFAULT_REL_TOL,
    *,
    max_evals: int = DEFAULT_MAX_EVALS,
    vectorized: bool = False,
) -> IntegrationResult:
    """Integrate ``f`` over ``[lo, hi]``.

    Integrable endpoint singularities are fine because the Kronrod nodes
    never touch the endpoints.

    Raises
    ------
    NoConvergence
        Budget exhausted above tolerance; ``exc.partial`` holds the estimate.
    NonFiniteEvaluation
        ``f`` returned inf or nan inside the interval.
    """
    if not lo < hi:
        raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
    return _adaptive(_evaluator(f, vectorized), float(lo), float(hi), abs_tol, rel_tol, max_evals)


def _mapped(fv, lo, scale):
    def g(t):
        s = 1.0 - t
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return fv(lo + scale * t / s) * (scale / (s * s))
    return g


def _tail_increments(fv, lo, scale, first=10, count=4):
    """Integrals of f over the doubling shells [lo + s 2^m, lo + s 2^(m+1)]."""
    out = []
    for m in range(first, first + count):
        a = lo + scale * 2.0 ** m
        try:
            r = _adaptive(fv, a, lo + scale * 2.0 ** (m + 1), 0.0, 1e-6, 2_000)
            out.append(r.value)
        except NonFiniteEvaluation:
            out.append(math.inf)
        except NoConvergence as exc:
            out.append(exc.partial.value)
    return out


def _looks_divergent(increments) -> bool:
    """Shell integrals that do not shrink across three successive doublings."""
    if any(not math.isfinite(v) for v in increments):
        return True
    mags = [abs(v) for v in increments]
    if mags[0] == 0.0:
        return False
    return all(mags[i + 1] >= 0.9 * mags[i] for i in range(len(mags) - 1))


def integrate_semi_infinite(
    f: Callable,
    lo: float,
    abs_tol: float = DEFAULT_ABS_TOL,
    rel_tol: float = DEFAULT_REL_TOL,
    *,
    scale: float = 1.0,
    max_evals: int = DEFAULT_MAX_EVALS,
    vectorized: bool = False,
) -> IntegrationResult:
    """Integrate ``f`` over ``[lo, inf)``.

    ``scale`` should be the length over which ``f`` varies; half of the
    mapped interval then covers ``[lo, lo + scale]``.

    When the adaptive pass fails, the tail is probed on doubling shells far
    out; if the shell integrals do not shrink, :class:`DivergenceSuspected`
    is raised instead of the original error. Callers that can decide
    convergence analytically should do so before calling this.
    """
    if not scale > 0:
        raise ValueError(f"scale must be positive, got {scale}")
    fv = _evaluator(f, vectorized)
    try:
        return _adaptive(_mapped(fv, float(lo), scale), 0.0, 1.0, abs_tol, rel_tol, max_evals,
                         panels=_SEMI_INFINITE_PANELS)
    except QuadratureError as exc:
        incs = _tail_increments(fv, float(lo), scale)
        if _looks_divergent(incs):
            raise DivergenceSuspected(
                f"integral over [{lo}, inf) appears divergent (shell integrals {incs})",
                exc.partial,
            ) from exc
        raise
