"""Monte Carlo simulation of the cache-aided HetNet downlink.

Samples the generative model directly (Poisson BS layouts per tier,
independent cache marks, Rayleigh fading, interferer activity) for a
typical user at the origin. None of the analytic-engine formulas are used.

Realizations are drawn in fixed-size blocks; block ``b`` uses the generator
``PCG64(SeedSequence(seed, spawn_key=(b,)))``, so a result depends only on
(config, file, tau, num_samples, window_radius, seed), never on the number
of workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import hyp2f1

from .errors import FileUncached, WindowTooSmall
from .model import NetworkConfig

BLOCK_SIZE = 2048
RNG_ALGORITHM = "numpy PCG64, SeedSequence(seed, spawn_key=(block,)), block size 2048"

# serving-distance tail probability allowed beyond half the window
_ASSOCIATION_TAIL = 1e-4
# discarded (no caching BS in window) fraction that triggers WindowTooSmall
MAX_DISCARD_FRACTION = 0.01
_Z95 = 1.959963984540054


@dataclass(frozen=True)
class TierPoints:
    distances: np.ndarray
    angles: np.ndarray
    caches_target_file: np.ndarray


@dataclass(frozen=True)
class NetworkRealization:
    """One layout of every tier inside a disc centred on the typical user."""

    tiers: tuple[TierPoints, ...]
    window_radius: float
    seed: int


@dataclass(frozen=True)
class AssociationOutcome:
    found: bool
    tier: int = 0  # 1-based; 0 when not found
    distance: float = math.nan
    index: int = -1  # position of the serving BS within its tier's arrays


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    ci95_lo: float
    ci95_hi: float
    samples_used: int
    samples_discarded: int
    heavy_tail_flag: bool = False
    window_radius: float = math.nan
    seed: int = 0
    rng: str = RNG_ALGORITHM

    @property
    def samples_requested(self) -> int:
        return self.samples_used + self.samples_discarded


def default_window_radius(config: NetworkConfig, file: int) -> float:
    """Radius R such that the nearest caching BS of the sparsest caching tier
    lies beyond R/2 with probability below 1e-4."""
    dens = [p * t.density for p, t in zip(config.file_probs(file), config.tiers) if p > 0]
    if not dens:
        raise FileUncached(f"file {file} is not cached in any tier")
    return 2.0 * math.sqrt(math.log(1.0 / _ASSOCIATION_TAIL) / (math.pi * min(dens)))


# ---------------------------------------------------------------------------
# single realization API


def _draw_layout(config, file, n, radius, rng):
    """Per tier: (owner realization index, distance, cached mark) for n realizations."""
    out = []
    area = math.pi * radius * radius
    for t, p in zip(config.tiers, config.file_probs(file)):
        counts = rng.poisson(t.density * area, size=n)
        total = int(counts.sum())
        r = radius * np.sqrt(1.0 - rng.random(total))
        marks = rng.random(total) < p
        owner = np.repeat(np.arange(n), counts)
        out.append((owner, r, marks))
    return out


def sample_network(config: NetworkConfig, file: int, window_radius: float | None = None,
                   seed: int = 0) -> NetworkRealization:
    """Draw one layout: Poisson counts, uniform positions in the disc, Bernoulli cache marks."""
    if window_radius is None:
        window_radius = default_window_radius(config, file)
    if not window_radius > 0:
        raise ValueError(f"window_radius must be positive, got {window_radius}")
    rng = np.random.default_rng(seed)
    layout = _draw_layout(config, file, 1, window_radius, rng)
    tiers = []
    for _, r, marks in layout:
        theta = rng.uniform(0.0, 2.0 * math.pi, size=r.size)
        for arr in (r, theta, marks):
            arr.flags.writeable = False
        tiers.append(TierPoints(r, theta, marks))
    return NetworkRealization(tuple(tiers), float(window_radius), seed)


def associate(realization: NetworkRealization, config: NetworkConfig, file: int) -> AssociationOutcome:
    """Strongest average received power P_j r^-alpha_j among BSs caching the file.

    Ties go to the smaller distance, then the lower tier index.
    """
    best = None
    for k, (tp, t) in enumerate(zip(realization.tiers, config.tiers), start=1):
        idx = np.flatnonzero(tp.caches_target_file)
        if idx.size == 0:
            continue
        r = tp.distances[idx]
        score = math.log(t.tx_power) - t.pathloss_exponent * np.log(r)
        top = score.max()
        cand = idx[score == top]
        i = int(cand[np.argmin(tp.distances[cand])])
        key = (-top, float(tp.distances[i]), k)
        if best is None or key < best[0]:
            best = (key, k, i)
    if best is None:
        return AssociationOutcome(False)
    _, k, i = best
    return AssociationOutcome(True, k, float(realization.tiers[k - 1].distances[i]), i)


def conditional_success_probability(realization: NetworkRealization, association: AssociationOutcome,
                                    config: NetworkConfig, tau: float) -> float:
    """P(SIR > tau | layout), with fading and interferer activity averaged out.

    Each BS other than the serving one contributes the factor
    a_j / (1 + tau (P_j/P_k) x^alpha_k r^-alpha_j) + (1 - a_j).
    """
    if not association.found:
        raise ValueError("no serving BS in this realization")
    serving = config.tier(association.tier)
    x = association.distance
    log_p = 0.0
    for j, (tp, t) in enumerate(zip(realization.tiers, config.tiers), start=1):
        a = t.activity_prob
        if a == 0.0 or tp.distances.size == 0:
            continue
        r = tp.distances
        if j == association.tier:
            r = np.delete(r, association.index)
        s = tau * (t.tx_power / serving.tx_power) * x ** serving.pathloss_exponent * r ** -t.pathloss_exponent
        log_p += float(np.sum(np.log1p((1.0 - a) * s) - np.log1p(s)))
    return math.exp(log_p)


# ---------------------------------------------------------------------------
# far field


def shell_integral(c, rho, alpha, b):
    """int_rho^inf phi(c r^-alpha) 2 pi r dr with phi(s) = s / (1 + b s).

    Substituting v = c r^-alpha gives pi d c^d int_0^{c rho^-alpha} v^-d / (1 + b v) dv
    with d = 2/alpha, a Gauss hypergeometric function of -b c rho^-alpha.
    Vectorised over ``c`` and ``rho``.
    """
    d = 2.0 / alpha
    c = np.asarray(c, dtype=float)
    v = c * np.asarray(rho, dtype=float) ** -alpha
    g = v ** (1.0 - d) / (1.0 - d) * hyp2f1(1.0, 1.0 - d, 2.0 - d, -b * v)
    return math.pi * d * c ** d * g


def _far_field_exponent(config, probs, tau, best, mode, radius):
    """Sum over tiers of lam_j a_j int_{|y|>R} phi dy for each realization.

    Beyond the window a tier's density is lam_j, except that BSs caching the
    file are absent out to the distance where they would have out-powered
    the serving BS; that band only holds the (1 - p_j) non-caching share.
    """
    total = np.zeros_like(best)
    for t, p in zip(config.tiers, probs):
        a = t.activity_prob
        if a == 0.0:
            continue
        b = 1.0 if mode == "coverage" else 1.0 - a
        logc = math.log(tau) + math.log(t.tx_power) - best  # c = tau (P_j/P_k) x^alpha_k
        c = np.exp(logc)
        h_window = shell_integral(c, radius, t.pathloss_exponent, b)
        if p > 0.0:
            excl = np.exp((math.log(t.tx_power) - best) / t.pathloss_exponent)
            h_excl = shell_integral(c, np.maximum(excl, radius), t.pathloss_exponent, b)
            h_window = h_window - p * (h_window - h_excl)
        total += a * t.density * h_window
    return total


# ---------------------------------------------------------------------------
# batched engine


def _serving(layout, config, n):
    """Best score (log of P_k x^-alpha_k) and serving tier per realization."""
    per_tier = np.full((len(layout), n), -np.inf)
    scores = []
    for j, ((owner, r, marks), t) in enumerate(zip(layout, config.tiers)):
        score = math.log(t.tx_power) - t.pathloss_exponent * np.log(r)
        scores.append(score)
        np.maximum.at(per_tier[j], owner[marks], score[marks])
    tier = np.argmax(per_tier, axis=0)
    best = per_tier[tier, np.arange(n)]
    return best, tier, scores


def _simulate_block(config, file, tau, n, radius, rng, mode, far_field=True):
    """Per-realization statistic for one block; returns (found mask, values).

    With ``far_field`` the coverage/delay statistics are multiplied by the
    exact conditional expectation of the factors contributed by BSs outside
    the window, instead of dropping them.
    """
    layout = _draw_layout(config, file, n, radius, rng)
    best, serving_tier, scores = _serving(layout, config, n)
    found = np.isfinite(best)
    safe_best = np.where(found, best, 0.0)

    if mode == "bernoulli":
        h0 = rng.exponential(size=n)
    acc = np.zeros(n)
    for j, ((owner, r, marks), t, score) in enumerate(zip(layout, config.tiers, scores)):
        a = t.activity_prob
        rel = score - safe_best[owner]  # log of interferer mean power over serving mean power
        is_serving = marks & (serving_tier[owner] == j) & (rel == 0.0) & found[owner]
        if mode == "bernoulli":
            h = rng.exponential(size=r.size)
            on = rng.random(r.size) < a
            w = np.where(on & ~is_serving, h * np.exp(rel), 0.0)
            acc += np.bincount(owner, weights=w, minlength=n)
            continue
        if a == 0.0:
            continue
        s = tau * np.exp(rel[~is_serving])
        contrib = np.log1p((1.0 - a) * s) - np.log1p(s) if a < 1.0 else -np.log1p(s)
        acc += np.bincount(owner[~is_serving], weights=contrib, minlength=n)

    if mode == "bernoulli":
        return found, (h0 > tau * acc)[found].astype(float)
    acc = acc[found]
    if far_field:
        far = _far_field_exponent(config, config.file_probs(file), tau, best[found], mode, radius)
        # log of E[prod f] (coverage) or -log of E[prod 1/f] (delay) over the far field
        acc = acc - far
    # delay statistic is 1 / P(success | layout)
    return found, np.exp(acc) if mode == "coverage" else np.exp(-acc)


def _run(config, file, tau, num_samples, window_radius, seed, mode, workers, far_field=True):
    if num_samples < 1:
        raise ValueError("num_samples must be at least 1")
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    if not config.is_cached(file):
        raise FileUncached(f"file {file} is not cached in any tier")
    radius = default_window_radius(config, file) if window_radius is None else float(window_radius)
    sizes = [BLOCK_SIZE] * (num_samples // BLOCK_SIZE)
    if num_samples % BLOCK_SIZE:
        sizes.append(num_samples % BLOCK_SIZE)

    def block(b):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(b,))))
        return _simulate_block(config, file, tau, sizes[b], radius, rng, mode, far_field)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(block, range(len(sizes))))
    else:
        results = [block(b) for b in range(len(sizes))]
    values = np.concatenate([v for _, v in results])
    used = values.size
    return values, used, num_samples - used, radius


def _summarize(values, used, discarded, radius, seed, heavy_tail=False):
    if used == 0:
        return McEstimate(math.nan, math.nan, math.nan, math.nan, 0, discarded, heavy_tail, radius, seed)
    # divergent delay samples may overflow the variance; inf is the honest answer
    with np.errstate(over="ignore", invalid="ignore"):
        mean = float(values.mean())
        se = float(values.std(ddof=1) / math.sqrt(used)) if used > 1 else math.inf
    if se == 0.0:
        lo = hi = mean
    else:
        lo, hi = mean - _Z95 * se, mean + _Z95 * se
    return McEstimate(mean, se, lo, hi, used, discarded, heavy_tail, radius, seed)


def _finish(values, used, discarded, radius, seed, heavy_tail=False):
    est = _summarize(values, used, discarded, radius, seed, heavy_tail)
    requested = used + discarded
    if discarded > MAX_DISCARD_FRACTION * requested:
        raise WindowTooSmall(
            f"{discarded} of {requested} realizations had no BS caching the file within "
            f"radius {radius:g}; enlarge the window", est)
    return est


def heavy_tail(values: np.ndarray, top_fraction: float = 0.01, share: float = 0.5) -> bool:
    """True when the largest ``top_fraction`` of samples carry more than ``share`` of the sum."""
    if values.size == 0:
        return False
    k = max(1, int(math.ceil(top_fraction * values.size)))
    top = np.partition(values, values.size - k)[values.size - k:]
    total = values.sum()
    if not np.isfinite(total):
        return True
    return bool(top.sum() > share * total)


def estimate_coverage(config: NetworkConfig, file: int, tau: float, num_samples: int = 100_000,
                      window_radius: float | None = None, seed: int = 0, *,
                      far_field: bool = True, workers: int = 1) -> McEstimate:
    """Coverage probability as the mean over layouts of P(SIR > tau | layout).

    Layouts with no caching BS inside the window are discarded and counted;
    more than 1% discarded raises :class:`WindowTooSmall` (the estimate is
    attached to the exception).
    """
    values, used, disc, radius = _run(config, file, tau, num_samples, window_radius, seed,
                                      "coverage", workers, far_field)
    return _finish(values, used, disc, radius, seed)


def estimate_delay(config: NetworkConfig, file: int, tau: float, num_samples: int = 100_000,
                   window_radius: float | None = None, seed: int = 0, *,
                   far_field: bool = True, workers: int = 1) -> McEstimate:
    """Local delay as the mean over layouts of 1 / P(SIR > tau | layout).

    ``heavy_tail_flag`` is set when the top 1% of samples hold over half of
    the sum, the signature of an infinite or nearly infinite mean.
    """
    values, used, disc, radius = _run(config, file, tau, num_samples, window_radius, seed,
                                      "delay", workers, far_field)
    return _finish(values, used, disc, radius, seed, heavy_tail(values))


def estimate_coverage_bernoulli(config: NetworkConfig, file: int, tau: float,
                                num_samples: int = 100_000, window_radius: float | None = None,
                                seed: int = 0, *, workers: int = 1) -> McEstimate:
    """Coverage probability from explicit fading and activity draws (indicator of SIR > tau).

    A realization with zero interference counts as covered.
    """
    values, used, disc, radius = _run(config, file, tau, num_samples, window_radius, seed,
                                      "bernoulli", workers)
    return _finish(values, used, disc, radius, seed)
