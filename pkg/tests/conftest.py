import hypothesis
import numpy as np
import pytest

hypothesis.settings.register_profile(
    "ddc", deadline=None, max_examples=30, derandomize=True
)
hypothesis.settings.load_profile("ddc")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
