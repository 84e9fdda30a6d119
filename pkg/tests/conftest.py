import pytest

from aggdiff.core import make_grid, make_params
from aggdiff.riesz import cached_kernel
from aggdiff.steady import calibrated_steady


@pytest.fixture(scope="session")
def ref_params():
    return make_params(3, 1.25)


@pytest.fixture(scope="session")
def ref_grid():
    return make_grid(60.0, 512, 3)


@pytest.fixture(scope="session")
def ref_kernel(ref_grid, ref_params):
    return cached_kernel(ref_grid, ref_params)


@pytest.fixture(scope="session")
def ref_steady(ref_grid, ref_params, ref_kernel):
    return calibrated_steady(1.0, ref_grid, ref_params, ref_kernel)


@pytest.fixture(scope="session")
def small_kernel():
    """Cheap kernel for tests that only need the structure, not accuracy."""
    p = make_params(3, 1.25)
    return cached_kernel(make_grid(30.0, 96, 3), p)
