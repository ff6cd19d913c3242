from __future__ import annotations

import pytest

import acdsim
from scenario_gen import random_scenario  # noqa: F401  (re-export for tests)


@pytest.fixture(scope="session")
def mvp_config():
    return acdsim.load_bundled("mvp-2host")


@pytest.fixture(scope="session")
def oracle_config():
    return acdsim.load_bundled("mvp-2host-oracle")


@pytest.fixture(scope="session")
def stopping_config():
    return acdsim.load_bundled("mvp-2host-stopping")


@pytest.fixture(scope="session")
def sparse_config():
    return acdsim.load_bundled("mvp-2host-sparse")


@pytest.fixture(scope="session")
def no_red_config():
    return acdsim.load_bundled("no-red")


@pytest.fixture(scope="session")
def noisy_config():
    return acdsim.load_bundled("two-subnet-noisy")
