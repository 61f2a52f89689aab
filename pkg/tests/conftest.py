import pytest

from cpwm.potentials import DoubleGaussian, Eckart, SquareBarrier, UphillRamp
from cpwm.units import cm1_to_hartree

V0 = cm1_to_hartree(400.0)


@pytest.fixture
def eckart():
    return Eckart(v0=V0, alpha=3.0)


@pytest.fixture
def square():
    return SquareBarrier(v0=V0, x1=-1.0, x2=1.0)


@pytest.fixture
def ramp():
    return UphillRamp(v0=V0, alpha=0.2)


@pytest.fixture
def double_gaussian():
    return DoubleGaussian(v0=V0, beta=9.0, center=0.75)


@pytest.fixture(scope="session")
def eckart_run():
    """Converged constant-velocity run, Eckart at E = V0, N=31, dt=10."""
    from cpwm.lagrangian import EngineConfig, LagrangianEngine
    from cpwm.relaxation import relax

    engine = LagrangianEngine(Eckart(v0=V0, alpha=3.0), V0, EngineConfig(n_points=31, dt=10.0, t_max=1e4))
    result = relax(engine)
    return engine, result
