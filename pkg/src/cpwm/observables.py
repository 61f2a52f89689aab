"""Densities, fluxes, edge probabilities, residuals and conservation audits.

The functions here read an engine through a small common surface shared by
:class:`~cpwm.lagrangian.LagrangianEngine` and
:class:`~cpwm.eulerian.FixedGridEngine`: ``sample``, ``rates``,
``edge_values``, ``partition``, ``nodes`` and a few scalar attributes.

Residuals are reported relative to the rotation rate E of the incident
component (whose amplitude is 1), so they are dimensionless.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson

from cpwm.kernels import CLASSICAL, PRODUCT_REGION
from cpwm.numerics import fd4_derivative


@dataclass
class ScatteringResult:
    """Outcome of one relaxation run at one energy."""

    energy: float
    p_refl: float
    p_trans: float
    converged: bool
    t: float
    steps: int
    residual: float
    schrodinger_residual: float
    profile: dict
    history: np.ndarray
    metadata: dict = field(default_factory=dict)
    snapshots: list = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def unitarity_error(self) -> float:
        return abs(self.p_refl + self.p_trans - 1.0)


def extract_probabilities(engine):
    """(P_refl, P_trans) = (|psi_-(x_L)|^2, (p_R/p_L) |psi_+(x_R)|^2)."""
    minus_left, plus_right = engine.edge_values()
    ratio = engine.p_right / engine.p_left
    return float(abs(minus_left) ** 2), float(ratio * abs(plus_right) ** 2)


def reconstruct_total(engine, x, source="current"):
    """psi = psi_+ + psi_- at ``x``."""
    plus, minus = engine.sample(x, source=source)
    return plus + minus


def densities_and_fluxes(engine, x=None, source="current"):
    """Component densities, fluxes and the inter-component exchange rate.

    The exchange rate is the part of d(rho_+)/dt along a trajectory carried
    by the other component: (p'/m) Re[psi_+* psi_-] for classical
    trajectories, 2 (V - V_inf) Im[psi_+* psi_-] for constant velocity. ``source`` is
    passed to ``engine.sample``.
    """
    x = engine.nodes if x is None else np.atleast_1d(np.asarray(x, dtype=float))
    plus, minus = engine.sample(x, source=source)
    rho_plus, rho_minus = np.abs(plus) ** 2, np.abs(minus) ** 2
    speed = np.zeros(x.size)
    coupling = np.zeros(x.size)
    model = engine.model
    for mask, r, kernel, v_inf in engine.partition(x):
        q = x[mask]
        overlap = np.conj(plus[mask]) * minus[mask]
        speed[mask] = engine.speed_in_region(r, q)
        if kernel == CLASSICAL:
            coupling[mask] = (-model.derivative(q) / model.classical_momentum(q, engine.energy)) * np.real(overlap)
        else:
            shift = v_inf if kernel == PRODUCT_REGION else 0.0
            coupling[mask] = 2.0 * (model.evaluate(q) - shift) * np.imag(overlap)
    return {
        "x": x,
        "psi_plus": plus,
        "psi_minus": minus,
        "rho_plus": rho_plus,
        "rho_minus": rho_minus,
        "rho_total": np.abs(plus + minus) ** 2,
        "j_plus": speed * rho_plus,
        "j_minus": -speed * rho_minus,
        "coupling": coupling,
    }


def _near_steps(engine, x, width):
    mask = np.zeros(x.size, dtype=bool)
    for d in engine.model.discontinuities:
        mask |= np.abs(x - d) < width
    return mask


def phase_residual(engine, x=None, per_component=False, method="auto", source="current"):
    """max |d(psi_pm)/dt + i E psi_pm| / E.

    ``method="kernel"`` evaluates the Eulerian rates at the reporting nodes
    (for trajectory engines this needs interpolated slopes, whose error sets
    a floor well above the dynamics' own). Nodes whose stencils straddle a
    potential step are skipped: the components have kinks there.
    ``method="period"`` uses the trajectory engine's one-period comparison,
    which needs neither. ``"auto"`` picks the period form once available.
    """
    if method in ("auto", "period") and hasattr(engine, "period_residual"):
        value = engine.period_residual(per_component=per_component)
        if method == "period" or not np.any(np.isnan(value)):
            return value
    x = engine.nodes if x is None else np.atleast_1d(np.asarray(x, dtype=float))
    x = x[~_near_steps(engine, x, 2.5 * engine.spacing)]
    plus, minus, d_plus, d_minus = engine.rates(x, source=source)
    e = engine.energy
    r_plus = np.max(np.abs(d_plus + 1j * e * plus)) / e
    r_minus = np.max(np.abs(d_minus + 1j * e * minus)) / e
    return (float(r_plus), float(r_minus)) if per_component else float(max(r_plus, r_minus))


def schrodinger_residual(engine, points=None, source="period"):
    """max |-psi''/2m + (V - E) psi| / E of the reconstructed total wavefunction.

    Both components are resampled on a uniform grid of ``points`` (default
    4N) nodes spanning the region, extended past the edges when the engine
    holds samples there, and psi'' comes from two passes of the fourth-order
    difference. Nodes near potential steps, and the two outermost nodes when
    the grid cannot be extended, are skipped. Trajectory engines resample
    from the samples of the whole last period by default (``source``),
    which keeps interpolation error far below the quantity being tested.
    """
    n = 4 * engine.config.n_points if points is None else int(points)
    lo, hi = engine.x_left, engine.x_right
    h = (hi - lo) / (n - 1)
    pad = 4 if engine.has_outer_samples else 0
    x = lo + h * np.arange(-pad, n + pad)
    psi = reconstruct_total(engine, x, source=source)
    d2 = fd4_derivative(fd4_derivative(psi, h), h)
    model = engine.model
    res = -d2 / (2.0 * model.mass) + (model.evaluate(x) - engine.energy) * psi
    keep = (x >= lo - 1e-12) & (x <= hi + 1e-12)
    if pad == 0:
        keep[:2] = keep[-2:] = False
    keep &= ~_near_steps(engine, x, 2.5 * engine.spacing)
    return float(np.max(np.abs(res[keep])) / engine.energy)


def stationarity_residual(engine, source="period"):
    """(phase-rotation residual, Schrodinger residual), both relative to E."""
    return phase_residual(engine), schrodinger_residual(engine, source=source)


def probability_balance(engine, refine: int = 4, source="current"):
    """d/dt of the two-component probability in the region plus net outflow.

    Per region: integral of d(rho_+ + rho_-)/dt (Simpson on a grid ``refine``
    times finer than the native spacing) plus [v (rho_+ - rho_-)] between the
    region's edges. Summed over regions; zero for exact dynamics.
    """
    total = 0.0
    for r, (lo, hi) in enumerate(engine.region_bounds()):
        n = max(int(round((hi - lo) / engine.spacing)), 1) * refine
        x = np.linspace(lo, hi, n + 1)
        plus, minus, d_plus, d_minus = engine.rates(x, region_index=r, source=source)
        drho = 2.0 * np.real(np.conj(plus) * d_plus + np.conj(minus) * d_minus)
        net = np.abs(plus) ** 2 - np.abs(minus) ** 2
        speed = engine.speed_in_region(r, x[[0, -1]])
        total += simpson(drho, x=x) + speed[1] * net[-1] - speed[0] * net[0]
    return float(total)


def plateau(x, values, lo, hi):
    """(mean, peak-to-peak) of ``values`` for lo <= x <= hi."""
    x = np.asarray(x)
    v = np.asarray(values)[(x >= lo) & (x <= hi)]
    return float(np.mean(v)), float(np.ptp(v))


def exponential_fit(times, errors, floor=0.0):
    """Least-squares line through log(errors) vs time.

    Only points with ``errors > floor`` enter the fit. Returns
    (rate, r_squared, n_points); ``rate`` is the decay constant per unit time.
    """
    t = np.asarray(times, dtype=float)
    e = np.asarray(errors, dtype=float)
    keep = e > max(floor, 0.0)
    t, y = t[keep], np.log(e[keep])
    if t.size < 3:
        return float("nan"), float("nan"), int(t.size)
    slope, intercept = np.polyfit(t, y, 1)
    fit = slope * t + intercept
    ss_res = float(np.sum((y - fit) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(-slope), r2, int(t.size)
