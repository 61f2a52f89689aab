"""Time-stepping loop shared by the trajectory and fixed-grid engines."""

from __future__ import annotations

import time

import numpy as np

from cpwm.errors import NotConvergedError
from cpwm.observables import (
    ScatteringResult,
    densities_and_fluxes,
    extract_probabilities,
    phase_residual,
    schrodinger_residual,
)

HISTORY_COLUMNS = ("t", "P_refl", "P_trans", "residual")


def _profile(engine, source="current"):
    prof = densities_and_fluxes(engine, source=source)
    keys = ("x", "psi_plus", "psi_minus", "rho_plus", "rho_minus", "rho_total")
    return {k: prof[k] for k in keys}


def relax(engine, raise_on_failure: bool = True) -> ScatteringResult:
    """Step ``engine`` until P_refl and P_trans settle or t_max is reached.

    Every ``engine.check_interval`` steps the probabilities are compared
    with the previous check; the run has converged when both changed by less than ``tol`` and
    the relative phase-rotation residual is below ``residual_gate``. Every
    step appends (t, P_refl, P_trans, residual) to the history.
    """
    cfg = engine.config
    clock = time.perf_counter()
    history = []

    def record():
        p_refl, p_trans = extract_probabilities(engine)
        history.append((engine.t, p_refl, p_trans, phase_residual(engine)))

    record()
    checkpoint = history[0]
    snapshots = []
    max_counts = list(engine.sample_counts())
    converged = False
    while engine.t < cfg.t_max - 1e-9 * engine.dt:
        engine.advance()
        record()
        max_counts = [max(a, b) for a, b in zip(max_counts, engine.sample_counts())]
        if cfg.snapshot_stride and engine.steps % cfg.snapshot_stride == 0:
            snapshots.append({"t": engine.t, **_profile(engine)})
        if engine.steps % engine.check_interval == 0:
            current = history[-1]
            change = max(abs(current[1] - checkpoint[1]), abs(current[2] - checkpoint[2]))
            if change < cfg.tol and current[3] < cfg.residual_gate:
                converged = True
                break
            checkpoint = current

    p_refl, p_trans = history[-1][1], history[-1][2]
    result = ScatteringResult(
        energy=engine.energy,
        p_refl=p_refl,
        p_trans=p_trans,
        converged=converged,
        t=engine.t,
        steps=engine.steps,
        residual=history[-1][3],
        schrodinger_residual=schrodinger_residual(engine),
        profile=_profile(engine, "period" if converged else "current"),
        history=np.array(history),
        metadata={
            "scheme": cfg.scheme,
            "potential": engine.model.describe(),
            "n_points": cfg.n_points,
            "dt": engine.dt,
            "t_max": cfg.t_max,
            "tol": cfg.tol,
            "window": cfg.window,
            "check_interval": engine.check_interval,
            "residual_gate": cfg.residual_gate,
            "max_samples": max_counts,
        },
        snapshots=snapshots,
        wall_time=time.perf_counter() - clock,
    )
    if not converged and raise_on_failure:
        raise NotConvergedError(
            f"not converged by t={engine.t:g} (P_refl={p_refl:.8f}, P_trans={p_trans:.8f}, "
            f"residual={result.residual:.3g})", result=result)
    return result
