import numpy as np
import pytest

from detbank import BankConfig


@pytest.fixture
def default_config() -> BankConfig:
    return BankConfig(categories=["person", "car", "flag"])


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240901)
