"""Shared fixtures: one-time kernel compilation and common model objects."""
import numpy as np
import pytest

from latticeldp import PiecewiseLinearPath, RateParams
from latticeldp._kernels import warmup


@pytest.fixture(scope="session", autouse=True)
def compiled_kernels():
    """Compile all jit kernels once so timed tests measure run time only."""
    warmup()


@pytest.fixture
def unit_params() -> RateParams:
    return RateParams.unit()


@pytest.fixture
def diagonal() -> PiecewiseLinearPath:
    return PiecewiseLinearPath([(0.0, 0.0, 0.0), (1.0, 1.0, 1.0)])


@pytest.fixture
def ramp_two() -> PiecewiseLinearPath:
    """The target (t, 2t) whose rate functional is 2 under unit rates."""
    return PiecewiseLinearPath([(0.0, 0.0, 0.0), (1.0, 1.0, 2.0)])


def random_params(gen: np.random.Generator) -> RateParams:
    lam = 0.1 + 3.0 * gen.random(5)
    return RateParams(*lam)
