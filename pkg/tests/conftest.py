import numpy as np
import pytest

from spiking_seizure_prediction.cnn_reference import (
    Conv1D,
    FullyConnected,
    MaxPool1D,
    NetworkSpec,
    Relu,
    WeightContainer,
)


def tiny_network_spec() -> NetworkSpec:
    """Conv -> Relu -> MaxPool -> FC -> Relu -> FC on a [1, 2, 8] input."""
    return NetworkSpec(
        input_shape=(1, 2, 8),
        layers=[
            Conv1D(kernel_h=1, kernel_w=3, c_in=1, c_out=2),
            Relu(),
            MaxPool1D(window=2),
            FullyConnected(in_dim=12, out_dim=3),
            Relu(),
            FullyConnected(in_dim=3, out_dim=2),
        ],
    )


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def tiny_spec():
    return tiny_network_spec()


@pytest.fixture
def tiny_weights(tiny_spec):
    return WeightContainer.random(tiny_spec, seed=1)
