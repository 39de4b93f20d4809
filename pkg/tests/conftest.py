import numpy as np
import pytest

from ratchetlab import corpus


@pytest.fixture(scope="session")
def named():
    return corpus.named_corpus()


@pytest.fixture(scope="session")
def gm():
    return corpus.golden_mean()


@pytest.fixture(scope="session")
def p2():
    return corpus.period2()


@pytest.fixture(scope="session")
def iid():
    return corpus.iid_coin()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
