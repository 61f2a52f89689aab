import numpy as np
import pytest

from cpwm.errors import NoOpenChannelError, TurningPointError
from cpwm.oracle import (
    eckart_probabilities,
    eckart_transmission,
    ramp_probabilities,
    square_barrier_probabilities,
    transfer_matrix_solve,
    wkb_components,
)
from cpwm.potentials import Eckart, PiecewiseConstant, UphillRamp, free_potential
from cpwm.units import cm1_to_hartree

from conftest import V0

M = 2000.0

# (R, T) frozen from the closed forms after cross-checking against the
# transfer-matrix solver (agreement better than 1e-11).
ECKART_400 = (0.2833580500725413, 0.7166419499274587)
ECKART_450 = (0.2187556915066307, 0.7812443084933692)
SQUARE_450 = (0.6126791343057764, 0.38732086569422364)
RAMP_500 = (0.026074807077281558, 0.9739251929227183)
DOUBLE_GAUSSIAN_400 = (0.7011329645291645, 0.29886703547084664)


def test_eckart_frozen_values():
    assert eckart_probabilities(V0, 3.0, M, V0) == pytest.approx(ECKART_400, abs=1e-13)
    assert eckart_probabilities(V0, 3.0, M, cm1_to_hartree(450.0)) == pytest.approx(ECKART_450, abs=1e-13)


def test_eckart_limits_and_monotonicity():
    assert eckart_transmission(V0, 3.0, M, 50 * V0) == pytest.approx(1.0, abs=1e-12)
    energies = cm1_to_hartree(np.linspace(100, 1200, 26))
    t = np.array([eckart_transmission(V0, 3.0, M, e) for e in energies])
    assert np.all(np.diff(t) > 0)
    assert 0 < eckart_transmission(V0, 3.0, M, cm1_to_hartree(200.0)) < 1
    with pytest.raises(ValueError):
        eckart_transmission(V0, 3.0, M, 0.0)


@pytest.mark.parametrize("e_cm", [200.0, 400.0, 450.0, 800.0])
def test_eckart_dual_oracle(eckart, e_cm):
    e = cm1_to_hartree(e_cm)
    tm = transfer_matrix_solve(eckart, e)
    r, t = eckart_probabilities(V0, 3.0, M, e)
    assert tm.reflection == pytest.approx(r, abs=1e-8)
    assert tm.transmission == pytest.approx(t, abs=1e-8)


def test_square_barrier_closed_form(square):
    assert square_barrier_probabilities(0.0, -1, 1, M, V0) == (0.0, 1.0)
    r, t = square_barrier_probabilities(V0, -1.0, 1.0, M, cm1_to_hartree(450.0))
    assert (r, t) == pytest.approx(SQUARE_450, abs=1e-14)
    assert r + t == pytest.approx(1.0, abs=1e-14)
    r, t = square_barrier_probabilities(V0, -1.0, 1.0, M, V0)
    assert t == pytest.approx(1.0 / (1.0 + M * V0 * 4.0 / 2.0), abs=1e-15)
    tm = transfer_matrix_solve(square, V0)
    assert tm.transmission == pytest.approx(t, abs=1e-10)


@pytest.mark.parametrize("e_cm", [150.0, 399.0, 401.0, 450.0, 1100.0])
def test_square_barrier_dual_oracle(square, e_cm):
    e = cm1_to_hartree(e_cm)
    tm = transfer_matrix_solve(square, e)
    assert (tm.reflection, tm.transmission) == pytest.approx(
        square_barrier_probabilities(V0, -1.0, 1.0, M, e), abs=1e-10)


def test_ramp_closed_form(ramp):
    assert ramp_probabilities(0.0, 0.2, M, V0) == pytest.approx((0.0, 1.0), abs=1e-15)
    e = cm1_to_hartree(500.0)
    assert ramp_probabilities(V0, 0.2, M, e) == pytest.approx(RAMP_500, abs=1e-13)
    tm = transfer_matrix_solve(ramp, e)
    assert (tm.reflection, tm.transmission) == pytest.approx(RAMP_500, abs=1e-8)
    pl, pr = np.sqrt(2 * M * e), np.sqrt(2 * M * (e - V0))
    assert ramp_probabilities(V0, 0.0, M, e)[0] == pytest.approx(((pl - pr) / (pl + pr)) ** 2, rel=1e-14)
    assert ramp_probabilities(V0, 0.2, M, 0.9 * V0) == (1.0, 0.0)


def test_transfer_matrix_single_step():
    e = cm1_to_hartree(500.0)
    step = PiecewiseConstant(edges=(0.0,), values=(0.0, V0))
    tm = transfer_matrix_solve(step, e)
    pl, pr = np.sqrt(2 * M * e), np.sqrt(2 * M * (e - V0))
    assert tm.reflection == pytest.approx(((pl - pr) / (pl + pr)) ** 2, abs=1e-14)
    assert tm.transmission == pytest.approx(4 * pl * pr / (pl + pr) ** 2, abs=1e-14)
    with pytest.raises(NoOpenChannelError):
        transfer_matrix_solve(step, 0.5 * V0)


def test_transfer_matrix_double_gaussian_ground_truth(double_gaussian):
    coarse = transfer_matrix_solve(double_gaussian, V0)
    fine = transfer_matrix_solve(double_gaussian, V0, step_dx=5e-4)
    assert (coarse.reflection, coarse.transmission) == pytest.approx(DOUBLE_GAUSSIAN_400, abs=1e-12)
    assert abs(fine.reflection - coarse.reflection) < 1e-8
    assert coarse.reflection + coarse.transmission == pytest.approx(1.0, abs=1e-12)


def test_transfer_matrix_is_second_order_without_extrapolation(eckart):
    e = V0
    exact = eckart_probabilities(V0, 3.0, M, e)[1]
    errs = [abs(transfer_matrix_solve(eckart, e, step_dx=dx, richardson=False, keep_states=False).transmission
                - exact) for dx in (4e-3, 2e-3)]
    assert errs[0] / errs[1] >= 3.5


def test_transfer_matrix_wavefunction_solves_schrodinger(eckart):
    e = cm1_to_hartree(450.0)
    sol = transfer_matrix_solve(eckart, e)
    h = 1e-3
    x = np.linspace(-2, 2, 41)
    psi = sol.wavefunction(x)
    d2 = (sol.wavefunction(x + h) - 2 * psi + sol.wavefunction(x - h)) / h**2
    res = -d2 / (2 * M) + (eckart.evaluate(x) - e) * psi
    assert np.max(np.abs(res)) / e < 1e-5
    # free region: unit incident wave plus reflected wave
    far = np.array([-5.0])
    r_amp = sol.r_amplitude
    p = np.sqrt(2 * M * e)
    assert sol.wavefunction(far)[0] == pytest.approx(np.exp(1j * p * far[0]) + r_amp * np.exp(-1j * p * far[0]))


def test_wkb_free_particle_and_flux():
    e = cm1_to_hartree(450.0)
    x = np.linspace(-3, 3, 7)
    plus, minus = wkb_components(free_potential(), e, x)
    p = np.sqrt(2 * M * e)
    assert np.allclose(plus, np.exp(1j * p * x), atol=1e-10)
    assert np.allclose(minus, np.exp(-1j * p * x), atol=1e-10)
    ek = Eckart(v0=V0, alpha=3.0)
    e3 = 3 * V0
    plus, _ = wkb_components(ek, e3, x)
    flux = np.abs(plus) ** 2 * ek.classical_momentum(x, e3) / M
    assert np.allclose(flux, np.sqrt(2 * M * e3) / M, rtol=1e-10)
    with pytest.raises(TurningPointError):
        wkb_components(ek, 0.5 * V0, x)
