"""Shared test configuration.

Keeps hypothesis quiet about the slower integration tests and provides a
fresh seeded generator per test so no test depends on execution order.
"""

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(0)
