import numpy as np
import pytest

from pursuitbench import data, sim


@pytest.fixture(scope="session")
def small_config():
    # Short runs keep the data-level tests fast; semantics are unchanged.
    return sim.SimConfig(max_steps=600, seed=7)


@pytest.fixture(scope="session")
def small_dataset(small_config):
    return sim.generate_dataset(small_config, 6)


@pytest.fixture(scope="session")
def full_config():
    return sim.SimConfig(seed=42)


@pytest.fixture(scope="session")
def full_dataset(full_config):
    return sim.generate_dataset(full_config, 100)


@pytest.fixture(scope="session")
def full_split(full_dataset):
    return data.split_test(full_dataset, data.SplitSpec(seed=42))
