import numpy as np
import pytest

from batkit.model import ModelConfig
from batkit.precision import float64_mode


@pytest.fixture
def f64():
    """Run the test in the 64-bit verification mode."""
    with float64_mode():
        yield


@pytest.fixture
def tiny_cfg():
    return ModelConfig(d_model=8, n_heads=2, d_head=4, d_ff=16,
                       n_layers=1, max_seq_len=16)


@pytest.fixture
def zero_layer_cfg():
    return ModelConfig(d_model=8, n_heads=2, d_head=4, d_ff=16,
                       n_layers=0, max_seq_len=16)
