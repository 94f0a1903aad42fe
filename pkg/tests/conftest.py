import math

import pytest

from igdist import ModelParams, Rank1Params, derived_scalars, rank1_build


@pytest.fixture(scope="session")
def scalar4():
    """K=J=1, n=m=1000, p=0.002, so tau = p^2 m n = 4."""
    return ModelParams(n=[1000], m=[1000], P=[[0.002]])


@pytest.fixture(scope="session")
def scalar4_spec(scalar4):
    return derived_scalars(scalar4)


@pytest.fixture(scope="session")
def scalar2():
    """K=J=1, n=m=10^4, p = sqrt(2)*1e-4, so tau = 2."""
    return ModelParams(n=[10**4], m=[10**4], P=[[math.sqrt(2.0) * 1e-4]])


@pytest.fixture(scope="session")
def scalar2_spec(scalar2):
    return derived_scalars(scalar2)


@pytest.fixture(scope="session")
def rank1_fixture():
    """K=2, J=1, n=(200,300), m=(500,), P = alpha beta^T, tau = 4.9."""
    r = Rank1Params(alpha=[0.005, 0.004], beta=[1.0])
    params, tau, mu, nu = rank1_build(r, [200, 300], [500])
    return r, params, tau, mu, nu


@pytest.fixture(scope="session")
def two_by_two():
    """Supercritical 2x2 model (tau ~ 2.62) with dense P."""
    return ModelParams(
        n=[300, 400], m=[350, 450], P=[[0.004, 0.001], [0.0008, 0.003]]
    )


@pytest.fixture(scope="session")
def two_by_two_spec(two_by_two):
    return derived_scalars(two_by_two)
