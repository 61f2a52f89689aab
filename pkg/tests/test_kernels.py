import numpy as np
import pytest

from cpwm.errors import EnergyBelowThresholdError, TurningPointError
from cpwm.kernels import (
    CLASSICAL,
    CONSTANT_VELOCITY,
    LocalState,
    classical_rhs,
    constant_velocity_rhs,
    density_rates,
    eulerian_rhs,
    lagrangian_rhs,
    product_region_rhs,
    step_match,
)
from cpwm.numerics import rk4_step
from cpwm.units import cm1_to_hartree

E = cm1_to_hartree(450.0)
V0 = cm1_to_hartree(400.0)


def random_states(n=200, seed=3):
    rng = np.random.default_rng(seed)
    return LocalState(
        psi_plus=rng.normal(size=n) + 1j * rng.normal(size=n),
        psi_minus=rng.normal(size=n) + 1j * rng.normal(size=n),
        energy=E,
        v=rng.uniform(0, V0, n),
        p=rng.uniform(0.5, 3.0, n),
        pprime=rng.normal(size=n),
    )


def test_classical_free_rotation():
    s = LocalState(psi_plus=1.0, psi_minus=0.0, energy=E, v=0.0, p=2.0, pprime=0.0)
    d_plus, d_minus = classical_rhs(s)
    assert d_plus == pytest.approx(1j * E)
    assert d_minus == 0.0


def test_classical_reflection_source():
    s = LocalState(psi_plus=1.0, psi_minus=0.0, energy=E, v=V0 / 2, p=1.0, pprime=0.37)
    _, d_minus = classical_rhs(s)
    assert d_minus == pytest.approx(-0.37 / (2 * 2000.0))


def test_classical_needs_positive_momentum():
    with pytest.raises(TurningPointError):
        classical_rhs(LocalState(psi_plus=1.0, psi_minus=0.0, energy=E, v=E, p=0.0))


def test_classical_flux_relation():
    s = random_states()
    d_plus, d_minus = classical_rhs(s)
    r_plus, r_minus = density_rates(s.psi_plus, s.psi_minus, d_plus, d_minus)
    exchange = (s.pprime / s.mass) * np.real(np.conj(s.psi_plus) * s.psi_minus)
    rho_plus, rho_minus = np.abs(s.psi_plus) ** 2, np.abs(s.psi_minus) ** 2
    assert np.allclose(r_plus, -(s.pprime / s.mass) * rho_plus + exchange, atol=1e-14)
    assert np.allclose(r_minus, (s.pprime / s.mass) * rho_minus - exchange, atol=1e-14)


def test_constant_velocity_free_and_coupled():
    d_plus, d_minus = constant_velocity_rhs(LocalState(psi_plus=0.3 + 0.1j, psi_minus=0.2j, energy=E, v=0.0))
    assert d_plus == pytest.approx(1j * E * (0.3 + 0.1j))
    assert d_minus == pytest.approx(1j * E * 0.2j)
    _, d_minus = constant_velocity_rhs(LocalState(psi_plus=1.0, psi_minus=0.0, energy=E, v=V0))
    assert d_minus == pytest.approx(-1j * V0)


def test_constant_velocity_conserves_total_locally():
    s = random_states()
    r_plus, r_minus = density_rates(s.psi_plus, s.psi_minus, *constant_velocity_rhs(s))
    assert np.max(np.abs(r_plus + r_minus)) < 1e-15


def test_product_region():
    s = random_states()
    assert np.array_equal(np.array(product_region_rhs(s, 0.0)), np.array(constant_velocity_rhs(s)))
    vinf = cm1_to_hartree(100.0)
    at_asymptote = LocalState(psi_plus=1.0, psi_minus=0.5, energy=E, v=vinf)
    d_plus, d_minus = product_region_rhs(at_asymptote, vinf)
    assert d_plus == pytest.approx(1j * (E - 2 * vinf))
    assert d_minus == pytest.approx(1j * (E - 2 * vinf) * 0.5)
    e_ramp = cm1_to_hartree(500.0)
    _, d_minus = product_region_rhs(LocalState(psi_plus=1.0, psi_minus=0.0, energy=e_ramp, v=V0 / 2), V0)
    assert d_minus == pytest.approx(1j * V0 / 2)
    with pytest.raises(EnergyBelowThresholdError):
        product_region_rhs(LocalState(psi_plus=1.0, psi_minus=0.0, energy=V0, v=0.0), V0)


def test_lagrangian_dispatch_rejects_unknown():
    with pytest.raises(ValueError):
        lagrangian_rhs(random_states(2), "nonsense")


def test_eulerian_constant_fields_equal_lagrangian():
    s = random_states()
    zero = np.zeros_like(s.psi_plus)
    for scheme in (CLASSICAL, CONSTANT_VELOCITY):
        assert np.array_equal(np.array(eulerian_rhs(s, zero, zero, scheme)), np.array(lagrangian_rhs(s, scheme)))


def test_eulerian_plane_wave_rotates_at_energy():
    p = np.sqrt(2 * 2000 * E)
    x = np.linspace(-3, 3, 7)
    psi = np.exp(1j * p * x)

    def rhs(_t, y):
        s = LocalState(psi_plus=y, psi_minus=np.zeros_like(y), energy=E, v=0.0, x=x, p=p)
        return eulerian_rhs(s, 1j * p * y, np.zeros_like(y), CONSTANT_VELOCITY)[0]

    assert np.allclose(rhs(0, psi), -1j * E * psi, rtol=0, atol=1e-15)
    stepped = rk4_step(psi, rhs, 10.0)
    # one RK4 step of a pure rotation is off by the fifth-order term only
    assert np.max(np.abs(stepped - psi * np.exp(-1j * E * 10.0))) <= 1.01 * (E * 10.0) ** 5 / 120


def test_step_match():
    a, b = 0.3 - 0.2j, 0.1 + 0.4j
    assert step_match(2.0, 2.0, a, b) == (pytest.approx(a), pytest.approx(b))
    pl, pr = 2.7, 1.2
    t, r = step_match(pl, pr, 1.0, 0.0)
    assert t == pytest.approx(2 * pl / (pl + pr))
    assert r == pytest.approx(-(pr - pl) / (pl + pr))
    with pytest.raises(ValueError):
        step_match(0.0, 1.0, 1.0, 0.0)


def test_step_match_flux_identity():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        pl, pr = rng.uniform(0.1, 5.0, 2)
        lp, rm = rng.normal(size=2) + 1j * rng.normal(size=2)
        rp, lm = step_match(pl, pr, lp, rm)
        left = pl * (abs(lp) ** 2 - abs(lm) ** 2)
        right = pr * (abs(rp) ** 2 - abs(rm) ** 2)
        assert abs(left - right) <= 1e-12 * max(1.0, abs(left))


def test_step_match_round_trip():
    pl, pr = 2.7, 1.2
    lp = 0.7 + 0.2j
    rp, _ = step_match(pl, pr, lp, 0.0)
    back, _ = step_match(pr, pl, rp, 0.0)
    # the transmitted wave is scaled by 2pl/(pl+pr) then 2pr/(pl+pr)
    assert back == pytest.approx(lp * 4 * pl * pr / (pl + pr) ** 2, abs=1e-14)
