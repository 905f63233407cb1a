import math

import pytest

from cachenet.model import two_tier_example, validate_network


def db(x):
    return 10.0 ** (x / 10.0)


def single_tier(p=1.0, activity=1.0, alpha=4.0, density=1.0, power=1.0):
    """K=1, M=2 network where file 1 has caching probability ``p``."""
    return validate_network({
        "tiers": [{"density": density, "tx_power": power, "pathloss_exponent": alpha,
                   "activity_prob": activity, "caching_probs": [p, 1.0 - p], "cache_size": 1.0}],
        "num_files": 2,
    })


def tier_dict(density=1.0, power=1.0, alpha=4.0, activity=1.0, probs=(1.0,), size=None):
    return {"density": density, "tx_power": power, "pathloss_exponent": alpha,
            "activity_prob": activity, "caching_probs": list(probs),
            "cache_size": math.fsum(probs) if size is None else size}


@pytest.fixture
def is_config():
    return two_tier_example("IS")


@pytest.fixture
def ds_config():
    return two_tier_example("DS")


@pytest.fixture
def ds_ratio4():
    return two_tier_example("DS", density_ratio=4.0)
