import pytest

from spinmag.config import (
    load_config,
    reference_sensitivity_config_path,
    reference_spin_noise_config_path,
)


@pytest.fixture(scope="session")
def spin_noise_config():
    return load_config(reference_spin_noise_config_path())


@pytest.fixture(scope="session")
def sensitivity_config():
    return load_config(reference_sensitivity_config_path())
