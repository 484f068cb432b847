import pytest

from gencoag import (
    AdditiveKernel,
    ConstantKernel,
    ExponentialProfile,
    SingularProductKernel,
    make_grid,
    sample_initial,
    truncate,
)


@pytest.fixture
def grid10():
    return make_grid(10.0, 8)


@pytest.fixture
def grid30():
    return make_grid(30.0, 16)


@pytest.fixture
def exp_density(grid30):
    return sample_initial(ExponentialProfile(), grid30)


@pytest.fixture
def const_trunc():
    return truncate(ConstantKernel(1.0), 30.0)


def kernel_trio(n):
    """The three stock families, truncated to (1/n, n)."""
    return [
        truncate(ConstantKernel(1.0), n),
        truncate(SingularProductKernel(k=1.0, sigma=0.2), n),
        truncate(AdditiveKernel(), n),
    ]


def random_density(grid, rng, scale=1.0):
    from gencoag import NumberDensity

    return NumberDensity(grid, scale * rng.random(grid.size), 0.0)
