from __future__ import annotations

import numpy as np
import pytest

from perscap.estimator import (
    capacity_table_for,
    evaluate_events,
    generate_geometry_events,
)
from perscap.scenario import PRESETS
from perscap.serving import ServingPolicy


@pytest.fixture(scope="session")
def melbourne():
    return PRESETS["melbourne"].build()


@pytest.fixture(scope="session")
def helsinki():
    return PRESETS["helsinki"].build()


@pytest.fixture(scope="session")
def melbourne_fixed15(melbourne):
    return melbourne.with_policy(ServingPolicy(15.0, 15.0, 1.0))


@pytest.fixture(scope="session")
def small_events(melbourne):
    """A small shared batch of evaluated renewal events (Melbourne, unconstrained)."""
    geo = generate_geometry_events(melbourne, 60, 101)
    table = capacity_table_for(melbourne)
    return evaluate_events(geo, melbourne.gamma, melbourne.fading, table)


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
