import numpy as np
import pytest
from hypothesis import settings

from densemodel.core import FunctionFamily

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def split_family():
    return FunctionFamily.from_rows([[1.0, -1.0]], ["split"])
