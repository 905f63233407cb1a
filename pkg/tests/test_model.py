import json

import pytest

from cachenet.errors import ConfigInvalid, IndexOutOfRange
from cachenet.model import (
    CACHE_SIZE_TOL,
    NetworkConfig,
    QueryParams,
    TierConfig,
    load_config,
    save_config,
    thinned_density,
    two_tier_example,
    validate_network,
)

from conftest import tier_dict


def kinds(exc):
    return sorted(v.kind for v in exc.value.violations)


def test_reference_ds_network_is_valid():
    cfg = validate_network({
        "tiers": [tier_dict(1.0, 10.0, 4.0, 1.0, (0.5, 0.5)),
                  tier_dict(1.0, 0.1, 4.0, 1.0, (0.2, 0.8))],
        "num_files": 2,
    })
    assert cfg.num_tiers == 2 and cfg.num_files == 2
    assert cfg.tier(1).tx_power == pytest.approx(100 * cfg.tier(2).tx_power)
    assert cfg == two_tier_example("DS")


def test_cache_size_mismatch():
    with pytest.raises(ConfigInvalid) as exc:
        validate_network({"tiers": [tier_dict(probs=(0.3, 0.6), size=1.0)], "num_files": 2})
    assert kinds(exc) == ["CacheSizeMismatch"]


def test_cache_size_tolerance_is_absolute_1e9():
    ok = tier_dict(probs=(0.5, 0.5), size=1.0 + 0.5 * CACHE_SIZE_TOL)
    validate_network({"tiers": [ok], "num_files": 2})
    bad = tier_dict(probs=(0.5, 0.5), size=1.0 + 2 * CACHE_SIZE_TOL)
    with pytest.raises(ConfigInvalid):
        validate_network({"tiers": [bad], "num_files": 2})


def test_pathloss_two_rejected():
    with pytest.raises(ConfigInvalid) as exc:
        validate_network({"tiers": [tier_dict(alpha=2.0)], "num_files": 1})
    assert kinds(exc) == ["PathlossTooSmall"]


def test_every_violation_is_reported():
    raw = {
        "tiers": [
            tier_dict(density=0.0, power=-1.0, alpha=1.5, activity=1.5, probs=(1.2, -0.2), size=0.0),
            {"density": 1.0, "bogus": 3},
        ],
        "num_files": 2,
        "extra": True,
    }
    with pytest.raises(ConfigInvalid) as exc:
        validate_network(raw)
    found = set(kinds(exc))
    assert {"NonPositiveDensity", "NonPositivePower", "PathlossTooSmall", "ActivityOutOfRange",
            "NonPositiveCacheSize", "CachingProbOutOfRange", "UnknownKey", "MissingKey"} <= found
    tiers = {v.tier for v in exc.value.violations if v.kind == "MissingKey"}
    assert tiers == {2}


def test_dimension_mismatch():
    with pytest.raises(ConfigInvalid) as exc:
        validate_network({"tiers": [tier_dict(probs=(1.0,))], "num_files": 2})
    assert "DimensionMismatch" in kinds(exc)


def test_invalid_types():
    with pytest.raises(ConfigInvalid) as exc:
        validate_network({"tiers": [tier_dict(density="dense")], "num_files": 1})
    assert "InvalidType" in kinds(exc)
    with pytest.raises(ConfigInvalid):
        validate_network([1, 2])


def test_uncached_file_is_legal():
    cfg = validate_network({"tiers": [tier_dict(probs=(1.0, 0.0))], "num_files": 2})
    assert not cfg.is_cached(2)
    assert cfg.is_cached(1)


def test_direct_construction_validates():
    t = TierConfig(1.0, 1.0, 4.0, 1.0, (0.5, 0.4), 1.0)
    with pytest.raises(ConfigInvalid):
        NetworkConfig((t,), 2)


def test_thinned_density():
    cfg = two_tier_example("DS", density_ratio=4.0)
    assert thinned_density(cfg, 2, 1) == pytest.approx(0.2 * 4.0)
    zero = validate_network({"tiers": [tier_dict(probs=(1.0, 0.0))], "num_files": 2})
    assert thinned_density(zero, 1, 2) == 0.0
    assert thinned_density(zero, 1, 1) == 1.0


def test_indices_are_one_based():
    cfg = two_tier_example("IS")
    assert cfg.caching_prob(1, 1) == 0.2
    assert cfg.file_probs(2) == (0.8, 0.8)
    for bad in (0, 3, True, 1.0):
        with pytest.raises(IndexOutOfRange):
            cfg.caching_prob(bad, 1)
    with pytest.raises(IndexOutOfRange):
        cfg.tier(3)


def test_replace_tier_revalidates():
    cfg = two_tier_example("IS")
    assert cfg.replace_tier(1, activity_prob=0.5).tier(1).activity_prob == 0.5
    assert cfg.tier(1).activity_prob == 1.0
    with pytest.raises(ConfigInvalid):
        cfg.replace_tier(2, density=-1.0)


def test_round_trip(tmp_path):
    cfg = two_tier_example("DS", density_ratio=2.5, activity=(0.5, 0.25))
    path = tmp_path / "net.json"
    save_config(cfg, path)
    assert load_config(path) == cfg
    assert json.loads(path.read_text())["num_files"] == 2


def test_unparseable_file(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ConfigInvalid) as exc:
        load_config(path)
    assert kinds(exc) == ["ParseError"]


def test_query_params():
    assert QueryParams(1, 0.5).sir_threshold == 0.5
    for bad in (0.0, -1.0, float("nan")):
        with pytest.raises(ValueError):
            QueryParams(1, bad)
    with pytest.raises(ValueError):
        QueryParams(0, 1.0)
