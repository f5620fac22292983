import pytest

from core.labs.mc_engine import MonteCarloEngine
from core.settings import GaussianMethod

SEED = 20240917


@pytest.fixture(scope='session')
def engine() -> MonteCarloEngine:
    return MonteCarloEngine(threads=2, method=GaussianMethod.ZIGGURAT)


@pytest.fixture(scope='session')
def seed() -> int:
    return SEED
