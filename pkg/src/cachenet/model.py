"""Network and caching configuration for a K-tier cache-aided HetNet.

Tier and file indices are 1-based throughout the public API, matching the
way tiers and files are numbered in the domain (tier 1 = macro, file 1, ...).
Powers are linear watts; dB conversion happens only in the CLI.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .errors import ConfigInvalid, IndexOutOfRange

CACHE_SIZE_TOL = 1e-9

TIER_KEYS = (
    "density",
    "tx_power",
    "pathloss_exponent",
    "activity_prob",
    "caching_probs",
    "cache_size",
)
TOP_KEYS = ("tiers", "num_files")


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str
    tier: int | None = None


@dataclass(frozen=True)
class TierConfig:
    """Physical and caching parameters of one tier.

    Attributes
    ----------
    density : float
        BSs per unit area.
    tx_power : float
        Transmit power in linear watts.
    pathloss_exponent : float
        Must exceed 2.
    activity_prob : float
        Probability an interfering BS of this tier transmits in a slot.
    caching_probs : tuple of float
        Marginal probability that a BS of this tier caches file m (index m-1).
    cache_size : float
        Cache budget in files; must equal ``sum(caching_probs)``.
    """

    density: float
    tx_power: float
    pathloss_exponent: float
    activity_prob: float
    caching_probs: tuple[float, ...]
    cache_size: float

    def __post_init__(self):
        probs = tuple(float(p) if _is_real(p) else p for p in self.caching_probs)
        object.__setattr__(self, "caching_probs", probs)

    def to_dict(self) -> dict[str, Any]:
        return {
            "density": self.density,
            "tx_power": self.tx_power,
            "pathloss_exponent": self.pathloss_exponent,
            "activity_prob": self.activity_prob,
            "caching_probs": list(self.caching_probs),
            "cache_size": self.cache_size,
        }


@dataclass(frozen=True)
class NetworkConfig:
    """A validated K-tier, M-file network. Build it with :func:`validate_network`."""

    tiers: tuple[TierConfig, ...]
    num_files: int
    _validated: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "tiers", tuple(self.tiers))
        if not self._validated:
            problems = _check(self.tiers, self.num_files)
            if problems:
                raise ConfigInvalid(problems)
            object.__setattr__(self, "_validated", True)

    @property
    def num_tiers(self) -> int:
        return len(self.tiers)

    def tier(self, k: int) -> TierConfig:
        _check_index(k, self.num_tiers, "tier")
        return self.tiers[k - 1]

    def caching_prob(self, file: int, tier: int) -> float:
        _check_index(file, self.num_files, "file")
        return self.tier(tier).caching_probs[file - 1]

    def file_probs(self, file: int) -> tuple[float, ...]:
        """Caching probability of ``file`` in each tier, in tier order."""
        _check_index(file, self.num_files, "file")
        return tuple(t.caching_probs[file - 1] for t in self.tiers)

    def is_cached(self, file: int) -> bool:
        return any(p > 0.0 for p in self.file_probs(file))

    def equal_alpha(self) -> bool:
        alphas = {t.pathloss_exponent for t in self.tiers}
        return len(alphas) == 1

    def replace_tier(self, k: int, **changes) -> NetworkConfig:
        """Return a copy with fields of tier ``k`` replaced (re-validated)."""
        _check_index(k, self.num_tiers, "tier")
        fields = self.tiers[k - 1].to_dict()
        fields.update(changes)
        tiers = list(self.tiers)
        tiers[k - 1] = TierConfig(**fields)
        return NetworkConfig(tuple(tiers), self.num_files)

    def to_dict(self) -> dict[str, Any]:
        return {"tiers": [t.to_dict() for t in self.tiers], "num_files": self.num_files}

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


def _check_index(i: int, n: int, what: str) -> None:
    if isinstance(i, bool) or not isinstance(i, int) or not 1 <= i <= n:
        raise IndexOutOfRange(f"{what} index {i!r} outside 1..{n}")


def _is_real(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _check(tiers: Sequence[TierConfig], num_files) -> list[Violation]:
    out: list[Violation] = []
    if isinstance(num_files, bool) or not isinstance(num_files, int) or num_files < 1:
        out.append(Violation("DimensionMismatch", f"num_files must be a positive integer, got {num_files!r}"))
        num_files = None
    if len(tiers) < 1:
        out.append(Violation("DimensionMismatch", "at least one tier is required"))
    for k, t in enumerate(tiers, start=1):
        out.extend(_check_tier(t, k, num_files))
    return out


def _check_tier(t: TierConfig, k: int, num_files: int | None) -> list[Violation]:
    out = []

    def bad(kind, msg):
        out.append(Violation(kind, f"tier {k}: {msg}", k))

    for name in ("density", "tx_power", "pathloss_exponent", "activity_prob", "cache_size"):
        if not _is_real(getattr(t, name)):
            bad("InvalidType", f"{name} must be a finite number, got {getattr(t, name)!r}")
    if _is_real(t.density) and t.density <= 0:
        bad("NonPositiveDensity", f"density {t.density} <= 0")
    if _is_real(t.tx_power) and t.tx_power <= 0:
        bad("NonPositivePower", f"tx_power {t.tx_power} <= 0")
    if _is_real(t.pathloss_exponent) and t.pathloss_exponent <= 2:
        bad("PathlossTooSmall", f"pathloss_exponent {t.pathloss_exponent} <= 2")
    if _is_real(t.activity_prob) and not 0.0 <= t.activity_prob <= 1.0:
        bad("ActivityOutOfRange", f"activity_prob {t.activity_prob} outside [0, 1]")
    if _is_real(t.cache_size) and t.cache_size <= 0:
        bad("NonPositiveCacheSize", f"cache_size {t.cache_size} <= 0")

    probs = t.caching_probs
    if num_files is not None and len(probs) != num_files:
        bad("DimensionMismatch", f"caching_probs has {len(probs)} entries, num_files is {num_files}")
    all_real = True
    for m, p in enumerate(probs, start=1):
        if not _is_real(p):
            bad("InvalidType", f"caching_probs[{m}] must be a finite number, got {p!r}")
            all_real = False
        elif not 0.0 <= p <= 1.0:
            bad("CachingProbOutOfRange", f"caching_probs[{m}] = {p} outside [0, 1]")
    if all_real and _is_real(t.cache_size):
        total = math.fsum(probs)
        if abs(total - t.cache_size) > CACHE_SIZE_TOL:
            bad("CacheSizeMismatch", f"sum of caching_probs is {total!r}, cache_size is {t.cache_size!r}")
    return out


def _parse_tier(raw, k: int, out: list[Violation]) -> TierConfig | None:
    if not isinstance(raw, Mapping):
        out.append(Violation("InvalidType", f"tier {k}: expected an object, got {type(raw).__name__}", k))
        return None
    unknown = sorted(set(raw) - set(TIER_KEYS))
    missing = [key for key in TIER_KEYS if key not in raw]
    for key in unknown:
        out.append(Violation("UnknownKey", f"tier {k}: unknown key {key!r}", k))
    for key in missing:
        out.append(Violation("MissingKey", f"tier {k}: missing key {key!r}", k))
    if missing:
        return None
    probs = raw["caching_probs"]
    if not isinstance(probs, (list, tuple)):
        out.append(Violation("InvalidType", f"tier {k}: caching_probs must be an array", k))
        return None
    return TierConfig(
        density=raw["density"],
        tx_power=raw["tx_power"],
        pathloss_exponent=raw["pathloss_exponent"],
        activity_prob=raw["activity_prob"],
        caching_probs=tuple(probs),
        cache_size=raw["cache_size"],
    )


def validate_network(raw: Mapping[str, Any] | NetworkConfig) -> NetworkConfig:
    """Validate a parsed config document and build a :class:`NetworkConfig`.

    Every violation is collected before raising :class:`ConfigInvalid`, so a
    config with three typos reports all three. A file cached by no tier is
    accepted here; queries on it fail later with ``FileUncached``.
    """
    if isinstance(raw, NetworkConfig):
        return NetworkConfig(raw.tiers, raw.num_files)
    if not isinstance(raw, Mapping):
        raise ConfigInvalid([Violation("InvalidType", f"config must be an object, got {type(raw).__name__}")])

    problems: list[Violation] = []
    for key in sorted(set(raw) - set(TOP_KEYS)):
        problems.append(Violation("UnknownKey", f"unknown top-level key {key!r}"))
    for key in TOP_KEYS:
        if key not in raw:
            problems.append(Violation("MissingKey", f"missing top-level key {key!r}"))

    tiers: list[TierConfig] = []
    numbers: list[int] = []
    raw_tiers = raw.get("tiers", [])
    if not isinstance(raw_tiers, (list, tuple)):
        problems.append(Violation("InvalidType", "tiers must be an array"))
        raw_tiers = []
    parse_failed = False
    for k, rt in enumerate(raw_tiers, start=1):
        t = _parse_tier(rt, k, problems)
        if t is None:
            parse_failed = True
        else:
            tiers.append(t)
            numbers.append(k)

    num_files = raw.get("num_files")
    if parse_failed:
        # still report value-level problems of the tiers that did parse
        for k, t in zip(numbers, tiers):
            problems.extend(_check_tier(t, k, num_files if isinstance(num_files, int) else None))
    else:
        problems.extend(_check(tiers, num_files))
    if problems:
        raise ConfigInvalid(problems)
    return NetworkConfig(tuple(tiers), num_files, _validated=True)


def load_config(path: str | Path) -> NetworkConfig:
    """Read and validate a JSON config file."""
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigInvalid([Violation("ParseError", f"{path}: {exc}")]) from exc
    return validate_network(raw)


def save_config(config: NetworkConfig, path: str | Path) -> None:
    Path(path).write_text(config.to_json() + "\n")


def thinned_density(config: NetworkConfig, tier: int, file: int) -> float:
    """Density of tier-``tier`` BSs that cache ``file``: p_{file,tier} * lambda_tier."""
    return config.caching_prob(file, tier) * config.tier(tier).density


@dataclass(frozen=True)
class QueryParams:
    """Evaluation target: 1-based file index and linear SIR threshold."""

    file: int
    sir_threshold: float

    def __post_init__(self):
        if not _is_real(self.sir_threshold) or self.sir_threshold <= 0:
            raise ValueError(f"sir_threshold must be positive, got {self.sir_threshold!r}")
        if isinstance(self.file, bool) or not isinstance(self.file, int) or self.file < 1:
            raise ValueError(f"file must be a positive integer, got {self.file!r}")


def two_tier_example(strategy: str = "IS", density_ratio: float = 1.0,
                     activity: Iterable[float] = (1.0, 1.0)) -> NetworkConfig:
    """The two-tier, two-file reference network.

    ``strategy`` is ``"IS"`` (same caching probabilities in both tiers) or
    ``"DS"`` (tier 1 splits evenly, tier 2 favours file 2).
    """
    a1, a2 = activity
    if strategy == "IS":
        p1, p2 = (0.2, 0.8), (0.2, 0.8)
    elif strategy == "DS":
        p1, p2 = (0.5, 0.5), (0.2, 0.8)
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    return validate_network({
        "tiers": [
            {"density": 1.0, "tx_power": 10.0, "pathloss_exponent": 4.0,
             "activity_prob": a1, "caching_probs": list(p1), "cache_size": 1.0},
            {"density": density_ratio, "tx_power": 0.1, "pathloss_exponent": 4.0,
             "activity_prob": a2, "caching_probs": list(p2), "cache_size": 1.0},
        ],
        "num_files": 2,
    })
