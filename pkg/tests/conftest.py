import numpy as np
import pytest

from acka.core import ProtocolParams, validate_params
from acka.netsim import ChannelFabric
from acka.quantum import DirectRates


@pytest.fixture
def fabric():
    return ChannelFabric(4, seed=7)


@pytest.fixture
def rngs():
    return [np.random.default_rng(100 + j) for j in range(4)]


@pytest.fixture
def small_params():
    """Five parties, two receivers and a short key phase."""
    return validate_params(ProtocolParams(n=5, m=2, L=5000, p=0.1, seed=11))


@pytest.fixture
def quiet_noise():
    """Source well below the 2% thresholds, so verification never fires."""
    return DirectRates(0.005, 0.01)
