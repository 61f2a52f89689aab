"""Right-hand sides of the coupled component equations (hbar = 1).

All functions are pure and vectorised; ``LocalState`` fields may be scalars
or equally shaped arrays. Lagrangian rates are total time derivatives along
the component's own trajectories; :func:`eulerian_rhs` adds the advection
term to get partial time derivatives at fixed x.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from cpwm.errors import EnergyBelowThresholdError, TurningPointError

CLASSICAL = "classical"
CONSTANT_VELOCITY = "constant_velocity"
PRODUCT_REGION = "product_region"


@dataclass
class LocalState:
    """Field values and potential data at one (or many) points.

    ``p`` is the trajectory momentum magnitude: the local classical momentum
    for the classical scheme, the constant asymptotic momentum otherwise.
    ``pprime`` is only used by the classical scheme.
    """

    psi_plus: complex | np.ndarray
    psi_minus: complex | np.ndarray
    energy: float
    v: float | np.ndarray
    x: float | np.ndarray = 0.0
    vprime: float | np.ndarray = 0.0
    p: float | np.ndarray = 0.0
    pprime: float | np.ndarray = 0.0
    mass: float = 2000.0


def classical_rhs(s: LocalState):
    """d(psi_pm)/dt = [-+p'/2m + i(E - 2V)] psi_pm +- (p'/2m) psi_mp."""
    if np.any(np.asarray(s.p) <= 0.0):
        raise TurningPointError("classical kernel needs p > 0")
    half = s.pprime / (2.0 * s.mass)
    phase = 1j * (s.energy - 2.0 * s.v)
    d_plus = (phase - half) * s.psi_plus + half * s.psi_minus
    d_minus = (phase + half) * s.psi_minus - half * s.psi_plus
    return d_plus, d_minus


def constant_velocity_rhs(s: LocalState):
    """d(psi_pm)/dt = i(E - V) psi_pm - i V psi_mp."""
    d_plus = 1j * ((s.energy - s.v) * s.psi_plus - s.v * s.psi_minus)
    d_minus = 1j * ((s.energy - s.v) * s.psi_minus - s.v * s.psi_plus)
    return d_plus, d_minus


def product_region_rhs(s: LocalState, v_inf: float):
    """Constant-velocity equations measured from the product asymptote ``v_inf``.

    d(psi_pm)/dt = i(E - V - V_inf) psi_pm - i (V - V_inf) psi_mp
    """
    if s.energy <= v_inf:
        raise EnergyBelowThresholdError(f"E={s.energy:.6g} <= V(+inf)={v_inf:.6g}")
    coupling = s.v - v_inf
    d_plus = 1j * ((s.energy - s.v - v_inf) * s.psi_plus - coupling * s.psi_minus)
    d_minus = 1j * ((s.energy - s.v - v_inf) * s.psi_minus - coupling * s.psi_plus)
    return d_plus, d_minus


def lagrangian_rhs(s: LocalState, scheme: str, v_inf: float = 0.0):
    if scheme == CLASSICAL:
        return classical_rhs(s)
    if scheme == CONSTANT_VELOCITY:
        return constant_velocity_rhs(s)
    if scheme == PRODUCT_REGION:
        return product_region_rhs(s, v_inf)
    raise ValueError(f"unknown scheme {scheme!r}")


def eulerian_rhs(s: LocalState, dpsi_plus_dx, dpsi_minus_dx, scheme: str, v_inf: float = 0.0):
    """Partial time derivatives: Lagrangian rate minus/plus (p/m) d(psi_pm)/dx."""
    d_plus, d_minus = lagrangian_rhs(s, scheme, v_inf)
    velocity = s.p / s.mass
    return d_plus - velocity * dpsi_plus_dx, d_minus + velocity * dpsi_minus_dx


def step_match(p_left: float, p_right: float, psi_left_plus, psi_right_minus):
    """Outgoing values at a dividing point from the two incoming ones.

    Continuity of psi and psi' across the divider, with psi' = i p (psi+ - psi-)
    on each side, gives

        psi_R+ = 2 pL/(pL+pR) psi_L+ + (pR-pL)/(pL+pR) psi_R-
        psi_L- = 2 pR/(pL+pR) psi_R- - (pR-pL)/(pL+pR) psi_L+
    """
    if p_left <= 0.0 or p_right <= 0.0:
        raise ValueError("step_match needs positive momenta on both sides")
    total = p_left + p_right
    skew = (p_right - p_left) / total
    psi_right_plus = (2.0 * p_left / total) * psi_left_plus + skew * psi_right_minus
    psi_left_minus = (2.0 * p_right / total) * psi_right_minus - skew * psi_left_plus
    return psi_right_plus, psi_left_minus


def density_rates(psi_plus, psi_minus, d_plus, d_minus):
    """d|psi_pm|^2/dt from amplitudes and their rates."""
    return (2.0 * np.real(np.conj(psi_plus) * d_plus),
            2.0 * np.real(np.conj(psi_minus) * d_minus))
