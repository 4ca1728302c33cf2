import numpy as np
import pytest

from spikekit.neurons import make_neuron_params
from spikekit.network import SpikingMLP


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def asn_net():
    """8 -> 16 -> 4 ASN net with a shifted window in both layers."""
    params = [make_neuron_params("asn", alpha=-0.6, d=4), make_neuron_params("asn", alpha=1.3, d=4)]
    return SpikingMLP(8, [16, 12], 4, params, seed=7)


@pytest.fixture
def nasn_net():
    params = make_neuron_params("nasn", alpha=0.7, d=4)
    return SpikingMLP(8, [16, 12], 4, params, seed=11, gain=2.0)


@pytest.fixture
def time_major_input(rng):
    x = rng.uniform(-1.0, 3.0, size=(8, 8))
    return np.repeat(x[None], 2, axis=0)
