import datetime as dt

import pytest

from redispatch import net_demand, synth


@pytest.fixture(scope="session")
def small_config():
    # Three months, no lockdown window inside: cheap fixture for unit tests.
    return synth.GeneratorConfig(
        start=dt.date(2019, 1, 1), end=dt.date(2019, 3, 31), seed=42, lockdown=None
    )


@pytest.fixture(scope="session")
def small_dataset(small_config):
    dataset, _ = synth.generate(small_config)
    return dataset


@pytest.fixture(scope="session")
def small_panel(small_dataset):
    return net_demand.build_panel(small_dataset)
