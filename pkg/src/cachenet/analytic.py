"""Closed-form and single-integral coverage / local-delay expressions.

Notation used in comments: file n, serving tier k, any tier j,
p = p_{nj} (caching probability), q = 1 - p, a = activity probability,
Pbar_j = P_j / P_k, and e_j = 2 alpha_k / alpha_j is the power of the
serving distance x that appears in tier j's exponent.

Every outer integral has the form

    A_k * Q_k = int_0^inf 2 pi p_k lam_k x exp(-pi sum_j c_j x^{e_j}) dx

with per-tier coefficients c_j = lam_j Pbar_j^{2/alpha_j} g_j, where g_j is

    association:  p_j
    coverage:     p_j + a_j (rho1_j + q_j rho2_j)
    local delay:  p_j - a_j (rho3_j + q_j rho4_j)

The association weight A_k cancels against the 1/A_k in the conditional
quantities, so totals are sums of these integrals and never divide by A_k.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    DivergenceSuspected,
    DomainError,
    FileUncached,
    UnequalAlphas,
    ZeroAssociationProbability,
)
from .model import NetworkConfig
from .quadrature import (
    DEFAULT_ABS_TOL,
    DEFAULT_REL_TOL,
    integrate_finite,
    integrate_semi_infinite,
)

INFINITE = math.inf

# rho integrals are cheap and feed every outer integrand; resolve them tightly
_RHO_ABS_TOL = 1e-15
_RHO_REL_TOL = 1e-12
# largest log-integrand peak whose integral is still representable
_LOG_MAX = 700.0
# beyond this radius a dominating negative term has long overflowed _LOG_MAX
_FAR_CAP = 1e150
# log-integrand drop below the peak past which mass is negligible
_LOG_SPAN = 80.0


class RhoKind(enum.Enum):
    """The four interference integrals.

    RHO1 / RHO2: coverage, interferers outside / inside the exclusion disc.
    RHO3 / RHO4: local delay, interferers outside / inside the exclusion disc.
    """

    RHO1 = 1
    RHO2 = 2
    RHO3 = 3
    RHO4 = 4


@dataclass(frozen=True)
class DelayValue:
    """A local delay in slots, or ``INFINITE``.

    ``decided_by`` records how the value (or its divergence) was obtained:
    ``"closed_form"``, ``"quadrature"``, ``"analytic_check"`` (divergence
    proven from the exponent coefficients), ``"overflow"`` (convergent, but
    the value exceeds double range) or ``"quadrature_fallback"`` (divergence
    reported by the integrator; a heuristic verdict).
    """

    value: float
    decided_by: str = "quadrature"
    abs_error: float = 0.0

    @property
    def finite(self) -> bool:
        return math.isfinite(self.value)

    def __float__(self):
        return float(self.value)


@dataclass(frozen=True)
class TierCoverage:
    association: float
    coverage: float | None  # undefined when the tier never serves the file
    weighted: float
    abs_error: float = 0.0


@dataclass(frozen=True)
class CoverageBreakdown:
    per_tier: tuple[TierCoverage, ...]
    total: float
    abs_error: float = 0.0


@dataclass(frozen=True)
class TierDelay:
    association: float
    delay: DelayValue | None
    weighted: float


@dataclass(frozen=True)
class DelayBreakdown:
    per_tier: tuple[TierDelay, ...]
    total: DelayValue


# ---------------------------------------------------------------------------
# rho integrals


def _check_domain(alpha, tau, activity):
    if not alpha > 2:
        raise DomainError(f"pathloss exponent must exceed 2, got {alpha}")
    if not tau > 0:
        raise DomainError(f"SIR threshold must be positive, got {tau}")
    if not 0.0 <= activity <= 1.0:
        raise DomainError(f"activity probability must lie in [0, 1], got {activity}")


def _tail(lower, c, beta):
    """int_lower^inf du / (c + u^beta) for beta > 1, lower > 0, c >= 0.

    The tail beyond 1 is folded onto [0, 1] with s = u^(1 - beta), which
    turns it into (1/(beta-1)) int ds / (1 + c s^(beta/(beta-1))), a smooth
    finite integral even when beta is close to 1.
    """
    gamma = beta / (beta - 1.0)

    def folded(s):
        return 1.0 / (1.0 + c * s ** gamma)

    def direct(u):
        return 1.0 / (c + u ** beta)

    if lower >= 1.0:
        top = lower ** (1.0 - beta)
        r = integrate_finite(folded, 0.0, top, _RHO_ABS_TOL, _RHO_REL_TOL, vectorized=True)
        return r.value / (beta - 1.0), r.abs_error_estimate / (beta - 1.0)
    head = integrate_finite(direct, lower, 1.0, _RHO_ABS_TOL, _RHO_REL_TOL, vectorized=True)
    rest = integrate_finite(folded, 0.0, 1.0, _RHO_ABS_TOL, _RHO_REL_TOL, vectorized=True)
    return (head.value + rest.value / (beta - 1.0),
            head.abs_error_estimate + rest.abs_error_estimate / (beta - 1.0))


@functools.lru_cache(maxsize=8192)
def _rho_cached(kind: RhoKind, alpha: float, tau: float, activity: float):
    beta = alpha / 2.0
    scale = tau ** (1.0 / beta)
    lower = tau ** (-1.0 / beta)
    c = 1.0 if kind in (RhoKind.RHO1, RhoKind.RHO2) else 1.0 - activity
    if kind in (RhoKind.RHO1, RhoKind.RHO3):
        val, err = _tail(lower, c, beta)
    else:
        if c == 0.0:
            # 1/u^beta is not integrable at 0 for beta > 1
            return INFINITE, 0.0
        r = integrate_finite(lambda u: 1.0 / (c + u ** beta), 0.0, lower,
                             _RHO_ABS_TOL, _RHO_REL_TOL, vectorized=True)
        val, err = r.value, r.abs_error_estimate
    return scale * val, scale * err


def rho(kind: RhoKind, alpha: float, tau: float, activity: float = 1.0) -> float:
    """Evaluate one of the four interference integrals.

    ``activity`` only enters RHO3 and RHO4. RHO4 with ``activity == 1``
    returns ``INFINITE``.
    """
    kind = RhoKind(kind)
    alpha, tau, activity = float(alpha), float(tau), float(activity)
    _check_domain(alpha, tau, activity)
    if kind in (RhoKind.RHO1, RhoKind.RHO2):
        activity = 1.0  # unused; normalise the cache key
    return _rho_cached(kind, alpha, tau, activity)[0]


# ---------------------------------------------------------------------------
# per-tier geometry and exponent coefficients


def _require_cached(config: NetworkConfig, file: int):
    probs = config.file_probs(file)
    if not any(p > 0 for p in probs):
        raise FileUncached(f"file {file} is not cached in any tier")
    return probs


def _geometry(config: NetworkConfig, k: int):
    """Per-tier (weight lam_j Pbar_j^{2/alpha_j}, exponent e_j) seen from serving tier k."""
    serving = config.tier(k)
    weights, exps = [], []
    for t in config.tiers:
        pbar = t.tx_power / serving.tx_power
        weights.append(t.density * pbar ** (2.0 / t.pathloss_exponent))
        exps.append(2.0 * serving.pathloss_exponent / t.pathloss_exponent)
    return weights, exps


def _coverage_factor(t, p, tau):
    """g_j for coverage: p + a (rho1 + q rho2)."""
    a = t.activity_prob
    if a == 0.0:
        return p
    alpha = t.pathloss_exponent
    inner = rho(RhoKind.RHO1, alpha, tau)
    if p < 1.0:
        inner += (1.0 - p) * rho(RhoKind.RHO2, alpha, tau)
    return p + a * inner


def _delay_factor(t, p, tau):
    """g_j for local delay: p - a (rho3 + q rho4); -inf when rho4 diverges and matters."""
    a = t.activity_prob
    if a == 0.0:
        return p
    alpha = t.pathloss_exponent
    inner = rho(RhoKind.RHO3, alpha, tau, a)
    if p < 1.0:
        r4 = rho(RhoKind.RHO4, alpha, tau, a)
        if math.isinf(r4):
            return -INFINITE
        inner += (1.0 - p) * r4
    return p - a * inner


def _leading_sign(coeffs: Sequence[float], exps: Sequence[float]) -> int:
    """Sign of the dominant term of sum_j c_j x^{e_j} as x -> inf (0 if identically zero)."""
    groups: dict[float, float] = {}
    for c, e in zip(coeffs, exps):
        groups[e] = groups.get(e, 0.0) + c
    for e in sorted(groups, reverse=True):
        if groups[e] != 0.0:
            return 1 if groups[e] > 0 else -1
    return 0


def _weighted_integral(p_k, lam_k, coeffs, exps, abs_tol, rel_tol):
    """int_0^inf 2 pi p_k lam_k x exp(-pi sum_j c_j x^{e_j}) dx; caller ensures convergence."""
    coeffs = np.asarray(coeffs, dtype=float)
    exps = np.asarray(exps, dtype=float)
    front = math.pi * p_k * lam_k
    if np.all(exps == 2.0):
        # t = x^2 makes the integrand a pure exponential in t
        total = float(coeffs.sum())
        rate = math.pi * total
        r = integrate_semi_infinite(lambda t: front * np.exp(-rate * t), 0.0, abs_tol, rel_tol,
                                    scale=1.0 / rate, vectorized=True)
        return r.value, r.abs_error_estimate

    keep = coeffs != 0.0
    coeffs, exps = coeffs[keep], exps[keep]
    pos = coeffs > 0
    scale = float(np.min((math.pi * coeffs[pos]) ** (-1.0 / exps[pos])))

    def integrand(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(over="ignore", invalid="ignore"):
            expo = -math.pi * (coeffs[None, :] * x[:, None] ** exps[None, :]).sum(axis=1)
            return 2.0 * front * x * np.exp(expo)

    if np.all(pos):
        r = integrate_semi_infinite(integrand, 0.0, abs_tol, rel_tol, scale=scale, vectorized=True)
        return r.value, float(r.abs_error_estimate)

    # Negative terms (delay only) can push the mass far beyond the natural
    # scale. Find the peak on a log grid out to where the leading positive
    # term dominates every negative one, then integrate piecewise around it.
    # Equal exponents are merged first; the caller guarantees the top group is positive.
    groups: dict[float, float] = {}
    for c, e in zip(coeffs, exps):
        groups[float(e)] = groups.get(float(e), 0.0) + float(c)
    e_lead = max(groups)
    c_lead = groups.pop(e_lead)
    rest_c = np.array(list(groups.values()))
    rest_e = np.array(list(groups.keys())) - e_lead

    def log_integrand(x):
        # leading power factored out so huge x gives -inf rather than inf - inf
        x = np.asarray(x, dtype=float)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            rel = c_lead + (rest_c[None, :] * x[:, None] ** rest_e[None, :]).sum(axis=1)
            return np.log(2.0 * front * x) - math.pi * x ** e_lead * rel

    def factored(x):
        return np.exp(log_integrand(x))

    neg = rest_c < 0
    reach = scale  # merging may have absorbed every negative term
    if neg.any():
        with np.errstate(over="ignore"):
            reach = np.max((2.0 * neg.sum() * -rest_c[neg] / c_lead) ** (-1.0 / rest_e[neg]))
    far = min(max(scale, float(reach)) * 8.0, _FAR_CAP)
    xs = np.geomspace(scale * 1e-6, far, 4000)
    h = log_integrand(xs)
    i = int(np.argmax(h))
    if h[i] > _LOG_MAX:
        return INFINITE, 0.0  # finite in exact arithmetic but beyond double range
    # cut by octaves wherever the integrand is within e^-_LOG_SPAN of its peak;
    # one wide panel would let every Kronrod node miss the mass
    live = np.nonzero(h > h[i] - _LOG_SPAN)[0]
    x_lo, x_hi = xs[max(live[0] - 1, 0)], xs[min(live[-1] + 1, xs.size - 1)]
    octaves = np.geomspace(x_lo, x_hi, int(math.ceil(math.log2(x_hi / x_lo))) + 1)
    cuts = sorted({0.0, float(xs[i]), far, *map(float, octaves)})
    value = err = 0.0
    for lo, hi in zip(cuts, cuts[1:]):
        r = integrate_finite(factored, lo, hi, abs_tol, rel_tol, vectorized=True)
        value, err = value + r.value, err + r.abs_error_estimate
    tail_scale = float((math.pi * c_lead) ** (-1.0 / e_lead))
    r = integrate_semi_infinite(factored, far, abs_tol, rel_tol, scale=tail_scale, vectorized=True)
    return value + r.value, float(err + r.abs_error_estimate)


def _association_integral(config, file, k, abs_tol, rel_tol):
    probs = config.file_probs(file)
    weights, exps = _geometry(config, k)
    coeffs = [w * p for w, p in zip(weights, probs)]
    t = config.tier(k)
    return _weighted_integral(probs[k - 1], t.density, coeffs, exps, abs_tol, rel_tol)


def _association_closed_form(config, file, k):
    probs = config.file_probs(file)
    alpha = config.tiers[0].pathloss_exponent
    terms = [p * t.density * t.tx_power ** (2.0 / alpha) for p, t in zip(probs, config.tiers)]
    return terms[k - 1] / math.fsum(terms)


def association_probability(config: NetworkConfig, file: int, tier: int, *,
                            method: str = "auto",
                            abs_tol: float = DEFAULT_ABS_TOL,
                            rel_tol: float = DEFAULT_REL_TOL) -> float:
    """Probability that a user requesting ``file`` is served by ``tier``.

    ``method`` is ``"auto"`` (closed form when all pathloss exponents agree,
    quadrature otherwise), ``"closed_form"`` or ``"quadrature"``.
    """
    probs = _require_cached(config, file)
    config.tier(tier)
    if probs[tier - 1] == 0.0:
        return 0.0
    if method == "closed_form" or (method == "auto" and config.equal_alpha()):
        if not config.equal_alpha():
            raise UnequalAlphas("closed-form association needs equal pathloss exponents")
        return _association_closed_form(config, file, tier)
    if method not in ("auto", "quadrature"):
        raise ValueError(f"unknown method {method!r}")
    return _association_integral(config, file, tier, abs_tol, rel_tol)[0]


def serving_distance_pdf(config: NetworkConfig, file: int, tier: int, x: float) -> float:
    """Density of the distance to the serving BS, given the user is served by ``tier``."""
    probs = _require_cached(config, file)
    A = association_probability(config, file, tier)
    if A == 0.0:
        raise ZeroAssociationProbability(f"file {file} is never served by tier {tier}")
    if x <= 0:
        return 0.0
    weights, exps = _geometry(config, tier)
    expo = sum(p * w * x ** e for p, w, e in zip(probs, weights, exps))
    t = config.tier(tier)
    return 2.0 * math.pi * probs[tier - 1] * t.density * x / A * math.exp(-math.pi * expo)


# ---------------------------------------------------------------------------
# Laplace-transform factors


def _laplace_exponent(config, file, k, j, x, tau, factor):
    if x == 0:
        return 0.0
    weights, exps = _geometry(config, k)
    t = config.tier(j)
    p = config.caching_prob(file, j)
    extra = factor(t, p, tau) - p  # +/- a (rho_out + q rho_in)
    if extra == 0.0:
        return 0.0
    return math.pi * weights[j - 1] * x ** exps[j - 1] * extra


def interference_laplace(config: NetworkConfig, file: int, serving_tier: int, tier: int,
                         x: float, tau: float) -> float:
    """Laplace transform of tier ``tier``'s interference at s = x^alpha_k tau / P_k.

    Given service by ``serving_tier`` at distance ``x``; includes both the
    non-caching BSs inside the exclusion disc and all BSs outside it.
    """
    return math.exp(-_laplace_exponent(config, file, serving_tier, tier, x, tau, _coverage_factor))


def reciprocal_laplace_expectation(config: NetworkConfig, file: int, serving_tier: int, tier: int,
                                   x: float, tau: float) -> float:
    """E over tier ``tier``'s point process of 1 / (conditional Laplace transform).

    ``INFINITE`` when the inside-disc integral diverges (a = 1 with q > 0).
    """
    expo = _laplace_exponent(config, file, serving_tier, tier, x, tau, _delay_factor)
    if not math.isfinite(expo) or -expo > _LOG_MAX:
        return INFINITE  # the delay exponent is never positive
    return math.exp(-expo)


def coverage_integrand(config: NetworkConfig, file: int, tier: int, x: float, tau: float) -> float:
    """A_k times the conditional-coverage integrand at serving distance ``x``."""
    probs = _require_cached(config, file)
    weights, exps = _geometry(config, tier)
    coeffs = [w * _coverage_factor(t, p, tau) for w, t, p in zip(weights, config.tiers, probs)]
    expo = sum(c * x ** e for c, e in zip(coeffs, exps))
    t = config.tier(tier)
    return 2.0 * math.pi * probs[tier - 1] * t.density * x * math.exp(-math.pi * expo)


# ---------------------------------------------------------------------------
# coverage


def _coverage_coeffs(config, file, k, tau):
    probs = config.file_probs(file)
    weights, exps = _geometry(config, k)
    coeffs = [w * _coverage_factor(t, p, tau) for w, t, p in zip(weights, config.tiers, probs)]
    return coeffs, exps


def _unit(p):
    # a probability; quadrature error can push it a few ulps outside [0, 1]
    return min(1.0, max(0.0, p))


def _check_tau(tau):
    if not tau > 0:
        raise DomainError(f"SIR threshold must be positive, got {tau}")


def _tier_coverage(config, file, k, tau, abs_tol, rel_tol) -> TierCoverage:
    p_k = config.caching_prob(file, k)
    if p_k == 0.0:
        return TierCoverage(0.0, None, 0.0)
    A, _ = _association_integral(config, file, k, abs_tol, rel_tol)
    coeffs, exps = _coverage_coeffs(config, file, k, tau)
    weighted, err = _weighted_integral(p_k, config.tier(k).density, coeffs, exps, abs_tol, rel_tol)
    return TierCoverage(A, weighted / A, weighted, err)


def coverage_tier(config: NetworkConfig, file: int, tier: int, tau: float, *,
                  abs_tol: float = DEFAULT_ABS_TOL, rel_tol: float = DEFAULT_REL_TOL) -> float:
    """Coverage probability of ``file`` given the user is served by ``tier``."""
    _require_cached(config, file)
    _check_tau(tau)
    tc = _tier_coverage(config, file, tier, tau, abs_tol, rel_tol)
    if tc.coverage is None:
        raise ZeroAssociationProbability(f"file {file} is never served by tier {tier}")
    return tc.coverage


def coverage(config: NetworkConfig, file: int, tau: float, *,
             abs_tol: float = DEFAULT_ABS_TOL, rel_tol: float = DEFAULT_REL_TOL) -> CoverageBreakdown:
    """Total coverage probability of ``file`` plus its per-tier breakdown."""
    _require_cached(config, file)
    _check_tau(tau)
    per = tuple(_tier_coverage(config, file, k, tau, abs_tol, rel_tol)
                for k in range(1, config.num_tiers + 1))
    return CoverageBreakdown(per, _unit(math.fsum(t.weighted for t in per)),
                             math.fsum(t.abs_error for t in per))


def _require_equal_alpha(config):
    if not config.equal_alpha():
        raise UnequalAlphas("all tiers must share one pathloss exponent")
    return config.tiers[0].pathloss_exponent


def coverage_equal_alpha(config: NetworkConfig, file: int, tau: float) -> CoverageBreakdown:
    """Closed-form coverage when every tier has the same pathloss exponent."""
    probs = _require_cached(config, file)
    alpha = _require_equal_alpha(config)
    _check_tau(tau)
    g = [_coverage_factor(t, p, tau) for t, p in zip(config.tiers, probs)]
    per = []
    for k, (p_k, t_k) in enumerate(zip(probs, config.tiers), start=1):
        if p_k == 0.0:
            per.append(TierCoverage(0.0, None, 0.0))
            continue
        denom = math.fsum(t.density * (t.tx_power / t_k.tx_power) ** (2.0 / alpha) * gj
                          for t, gj in zip(config.tiers, g))
        weighted = p_k * t_k.density / denom
        A = _association_closed_form(config, file, k)
        per.append(TierCoverage(A, weighted / A, weighted))
    return CoverageBreakdown(tuple(per), math.fsum(t.weighted for t in per))


# ---------------------------------------------------------------------------
# local delay


def _delay_coeffs(config, file, k, tau):
    probs = config.file_probs(file)
    weights, exps = _geometry(config, k)
    coeffs = [w * _delay_factor(t, p, tau) for w, t, p in zip(weights, config.tiers, probs)]
    return coeffs, exps


def _tier_delay(config, file, k, tau, abs_tol, rel_tol) -> TierDelay:
    p_k = config.caching_prob(file, k)
    if p_k == 0.0:
        return TierDelay(0.0, None, 0.0)
    A, _ = _association_integral(config, file, k, abs_tol, rel_tol)
    coeffs, exps = _delay_coeffs(config, file, k, tau)
    if any(math.isinf(c) for c in coeffs) or _leading_sign(coeffs, exps) <= 0:
        return TierDelay(A, DelayValue(INFINITE, "analytic_check"), INFINITE)
    try:
        weighted, err = _weighted_integral(p_k, config.tier(k).density, coeffs, exps,
                                           abs_tol, rel_tol)
    except DivergenceSuspected:
        return TierDelay(A, DelayValue(INFINITE, "quadrature_fallback"), INFINITE)
    if math.isinf(weighted):
        return TierDelay(A, DelayValue(INFINITE, "overflow"), INFINITE)
    return TierDelay(A, DelayValue(weighted / A, "quadrature", err / A), weighted)


def delay_tier(config: NetworkConfig, file: int, tier: int, tau: float, *,
               abs_tol: float = DEFAULT_ABS_TOL, rel_tol: float = DEFAULT_REL_TOL) -> DelayValue:
    """Local delay of ``file`` given the user is served by ``tier``."""
    _require_cached(config, file)
    _check_tau(tau)
    td = _tier_delay(config, file, tier, tau, abs_tol, rel_tol)
    if td.delay is None:
        raise ZeroAssociationProbability(f"file {file} is never served by tier {tier}")
    return td.delay


def delay(config: NetworkConfig, file: int, tau: float, *,
          abs_tol: float = DEFAULT_ABS_TOL, rel_tol: float = DEFAULT_REL_TOL) -> DelayBreakdown:
    """Total local delay of ``file`` plus its per-tier breakdown."""
    _require_cached(config, file)
    _check_tau(tau)
    per = tuple(_tier_delay(config, file, k, tau, abs_tol, rel_tol)
                for k in range(1, config.num_tiers + 1))
    serving = [t for t in per if t.delay is not None]
    infinite = [t for t in serving if not t.delay.finite]
    if infinite:
        labels = {t.delay.decided_by for t in infinite}
        how = next(l for l in ("analytic_check", "overflow", "quadrature_fallback") if l in labels)
        return DelayBreakdown(per, DelayValue(INFINITE, how))
    total = math.fsum(t.weighted for t in serving)
    err = math.fsum(t.delay.abs_error * t.association for t in serving)
    return DelayBreakdown(per, DelayValue(total, "quadrature", err))


def delay_equal_alpha(config: NetworkConfig, file: int, tau: float) -> DelayValue:
    """Closed-form local delay when every tier has the same pathloss exponent."""
    probs = _require_cached(config, file)
    alpha = _require_equal_alpha(config)
    _check_tau(tau)
    g = [_delay_factor(t, p, tau) for t, p in zip(config.tiers, probs)]
    if any(math.isinf(gj) for gj in g):
        return DelayValue(INFINITE, "closed_form")
    terms = []
    for p_k, t_k in zip(probs, config.tiers):
        if p_k == 0.0:
            continue
        denom = math.fsum(t.density * (t.tx_power / t_k.tx_power) ** (2.0 / alpha) * gj
                          for t, gj in zip(config.tiers, g))
        if denom <= 0.0:
            return DelayValue(INFINITE, "closed_form")
        terms.append(p_k * t_k.density / denom)
    return DelayValue(math.fsum(terms), "closed_form")
