import numpy as np
import pytest
from scipy.integrate import solve_ivp

from cpwm.errors import (
    ConfigError,
    EnergyBelowThresholdError,
    IncompatibleSchemeError,
    NotConvergedError,
    TurningPointError,
)
from cpwm.lagrangian import (
    CLASSICAL_TRAJ,
    CONST_VEL_TWO_REGION,
    EngineConfig,
    LagrangianEngine,
    fit_kink,
    run_to_convergence,
)
from cpwm.oracle import transfer_matrix_solve
from cpwm.potentials import Eckart, UphillRamp, free_potential
from cpwm.units import cm1_to_hartree

from conftest import V0

E450 = cm1_to_hartree(450.0)


def test_config_validation():
    with pytest.raises(ConfigError):
        EngineConfig(scheme="bogus")
    with pytest.raises(ConfigError):
        EngineConfig(n_points=4)
    with pytest.raises(ConfigError):
        EngineConfig(dt=0.0)
    with pytest.raises(ConfigError):
        EngineConfig(dt=10.0, t_max=5.0)
    with pytest.raises(ConfigError):
        EngineConfig(scheme=CONST_VEL_TWO_REGION, x_divider=4.0)
    assert EngineConfig(n_points=31).spacing == pytest.approx(0.2)


def test_initial_state(eckart):
    engine = LagrangianEngine(eckart, V0, EngineConfig(n_points=31))
    plus, minus = engine.sample(engine.nodes)
    assert np.allclose(np.abs(plus), 1.0, atol=1e-12)
    assert np.all(minus == 0)
    assert engine.sample_counts() == [31, 31]
    assert np.allclose(np.diff(engine.regions[0].plus.x), 0.2)


def test_incompatible_schemes(eckart, square, ramp):
    with pytest.raises(TurningPointError):
        LagrangianEngine(eckart, V0, EngineConfig(scheme=CLASSICAL_TRAJ, dt=1.0))
    with pytest.raises(IncompatibleSchemeError):
        LagrangianEngine(square, E450, EngineConfig(scheme=CLASSICAL_TRAJ, dt=1.0))
    with pytest.raises(IncompatibleSchemeError):
        LagrangianEngine(ramp, E450, EngineConfig())
    with pytest.raises(EnergyBelowThresholdError):
        LagrangianEngine(ramp, 0.9 * V0, EngineConfig(scheme=CONST_VEL_TWO_REGION))


def test_commensurate_step_count_is_odd(eckart):
    engine = LagrangianEngine(eckart, V0, EngineConfig(n_points=31, dt=10.0))
    assert engine.steps_per_period % 2 == 1
    assert engine.dt <= 10.0
    assert engine.dt * engine.steps_per_period == pytest.approx(0.2 * 2000 / engine.p_left, rel=1e-14)
    # roughly one injection every 14-15 steps at E = 400 cm-1
    assert engine.steps_per_period == 15


def test_free_step_is_exact_rotation_and_shift():
    e = cm1_to_hartree(400.0)
    engine = LagrangianEngine(free_potential(), e, EngineConfig(dt=10.0, commensurate=False))
    before = [(ens.x.copy(), ens.psi.copy()) for ens in engine.ensembles()]
    engine.advance()
    shift = engine.p_left / 2000.0 * 10.0
    for ens, (x0, psi0), sign in zip(engine.ensembles(), before, (+1, -1)):
        common = np.isin(np.round(ens.x - sign * shift, 12), np.round(x0, 12))
        assert common.sum() >= 31
        idx = np.searchsorted(x0, ens.x[common] - sign * shift - 1e-12)
        assert np.max(np.abs(ens.x[common] - (x0[idx] + sign * shift))) < 1e-12
        ratio = ens.psi[common] - psi0[idx] * np.exp(1j * e * 10.0)
        assert np.max(np.abs(ratio)) <= 1e-10


def test_free_run_converges_immediately():
    e = cm1_to_hartree(400.0)
    result = run_to_convergence(free_potential(), e, EngineConfig())
    assert result.converged
    assert result.p_refl == pytest.approx(0.0, abs=1e-14)
    assert result.p_trans == pytest.approx(1.0, abs=1e-10)
    assert result.steps == result.metadata["check_interval"]


def test_sample_count_bookkeeping(eckart):
    engine = LagrangianEngine(eckart, V0, EngineConfig(n_points=31))
    counts = []
    for _ in range(1000):
        engine.advance()
        counts += engine.sample_counts()
    assert min(counts) >= 29 and max(counts) <= 33


def test_classical_positions_follow_exact_trajectories(eckart):
    engine = LagrangianEngine(eckart, E450, EngineConfig(scheme=CLASSICAL_TRAJ, dt=1.0, t_max=1e4))
    start = engine.regions[0].plus.x.copy()
    for _ in range(150):
        engine.advance()

    def velocity(_t, x):
        return eckart.classical_momentum(x, E450) / 2000.0

    now = engine.regions[0].plus.x
    for x0 in start[3:10]:
        ref = solve_ivp(velocity, (0.0, engine.t), [x0], method="DOP853", rtol=1e-13, atol=1e-13).y[0, -1]
        assert np.min(np.abs(now - ref)) < 1e-10


def test_trajectories_do_not_depend_on_field(eckart):
    a = LagrangianEngine(eckart, E450, EngineConfig(scheme=CLASSICAL_TRAJ, dt=1.0))
    b = LagrangianEngine(eckart, E450, EngineConfig(scheme=CLASSICAL_TRAJ, dt=1.0))
    for ens in b.ensembles():
        ens.psi *= 3.7 - 1.1j
    for _ in range(60):
        a.advance()
        b.advance()
    for ea, eb in zip(a.ensembles(), b.ensembles()):
        assert np.array_equal(ea.x, eb.x)


def test_two_region_degenerate_divider_is_transparent():
    flat = UphillRamp(v0=0.0, alpha=0.2)
    result = run_to_convergence(flat, cm1_to_hartree(500.0), EngineConfig(scheme=CONST_VEL_TWO_REGION))
    assert result.p_refl == pytest.approx(0.0, abs=1e-12)
    assert result.p_trans == pytest.approx(1.0, abs=1e-10)


def test_not_converged_error_carries_result(eckart):
    with pytest.raises(NotConvergedError) as info:
        run_to_convergence(eckart, V0, EngineConfig(t_max=300.0))
    assert info.value.result is not None
    assert not info.value.result.converged
    assert info.value.result.history.shape[1] == 4


def test_kink_fit_reproduces_stationary_components(square):
    e = E450
    p = np.sqrt(2 * 2000 * e)
    sol = transfer_matrix_solve(square, e)
    xp = np.linspace(-1.5, -0.5, 11) + 0.037
    xm = xp + 0.05
    pp, _ = sol.components(xp, p)
    _, pm = sol.components(xm, p)
    fit_plus, fit_minus = fit_kink(-1.0, xp, pp, xm, pm, 0.0, V0, e, 2000.0, p)
    q = np.linspace(-1.3, -0.7, 13)
    plus, minus = sol.components(q, p)
    assert np.max(np.abs(fit_plus(q) - plus)) < 1e-12
    assert np.max(np.abs(fit_minus(q) - minus)) < 1e-12
    value, slope = fit_plus(np.array([-1.2, -0.8]), derivative=True)
    h = 1e-6
    fd = (fit_plus(np.array([-1.2, -0.8]) + h) - fit_plus(np.array([-1.2, -0.8]) - h)) / (2 * h)
    assert np.allclose(slope, fd, atol=1e-7)


def test_converged_run_is_periodic(eckart_run):
    engine, result = eckart_run
    assert result.converged
    assert engine.has_full_period
    assert engine.period_residual() < 1e-5
