"""Five-point interpolation/differentiation stencils and the RK4 stepper.

With as many stencil points as polynomial coefficients, moving least squares
degenerates to exact local interpolation, so :func:`mls_interpolate` builds
the Lagrange quartic through the five nodes nearest each query directly.
"""

from __future__ import annotations

import warnings

import numpy as np

from cpwm.errors import ExtrapolationWarning, InsufficientPointsError

STENCIL = 5

# One-sided fourth-order first-derivative weights for the two outermost nodes.
_EDGE0 = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0
_EDGE1 = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / 12.0


def stencil_start(nodes, query):
    """Index of the first node of the 5-point window for each query.

    The window is centred on the nearest node and shifted inward at the ends.
    """
    nodes = np.asarray(nodes)
    query = np.asarray(query, dtype=float)
    n = nodes.size
    right = np.clip(np.searchsorted(nodes, query), 1, n - 1)
    nearest = np.where(query - nodes[right - 1] <= nodes[right] - query, right - 1, right)
    return np.clip(nearest - STENCIL // 2, 0, n - STENCIL)


def lagrange_weights(xs, query, derivative=False):
    """Weights of the interpolating polynomial through ``xs[m, :]`` at ``query[m]``.

    ``xs`` has shape (M, K) and ``query`` shape (M,). Returns (M, K) value
    weights, plus (M, K) first-derivative weights when ``derivative`` is true.
    """
    k = xs.shape[1]
    eye = np.eye(k, dtype=bool)
    gaps = xs[:, :, None] - xs[:, None, :]
    denom = np.prod(np.where(eye, 1.0, gaps), axis=2)
    diff = query[:, None] - xs
    terms = np.where(eye, 1.0, diff[:, None, :])
    value = np.prod(terms, axis=2) / denom
    if not derivative:
        return value
    # d/dq of prod_{i != j} (q - x_i) = sum_{s != j} prod_{i != j, s} (q - x_i)
    skip = np.where(eye[None, :, :, None] | eye[None, None, :, :] | eye[None, :, None, :],
                    1.0, diff[:, None, None, :])
    slope = np.sum(np.where(eye[None], 0.0, np.prod(skip, axis=3)), axis=2) / denom
    return value, slope


def mls_interpolate(nodes, values, query, derivative=False, on_extrapolate="warn"):
    """Quartic moving interpolation of scattered samples.

    Parameters
    ----------
    nodes : array_like, shape (n,)
        Strictly increasing sample positions, n >= 5.
    values : array_like, shape (n,)
        Real or complex samples.
    query : float or array_like
        Evaluation positions.
    derivative : bool
        Also return d/dx of the local quartic.
    on_extrapolate : {"warn", "ignore", "raise"}
        What to do with queries outside [nodes[0], nodes[-1]].
    """
    nodes = np.asarray(nodes, dtype=float)
    values = np.asarray(values)
    if nodes.size < STENCIL:
        raise InsufficientPointsError(f"need at least {STENCIL} samples, got {nodes.size}")
    scalar = np.ndim(query) == 0
    q = np.atleast_1d(np.asarray(query, dtype=float))
    if on_extrapolate != "ignore":
        outside = (q < nodes[0]) | (q > nodes[-1])
        if np.any(outside):
            msg = f"{int(outside.sum())} queries outside [{nodes[0]:.6g}, {nodes[-1]:.6g}]"
            if on_extrapolate == "raise":
                raise ValueError(msg)
            warnings.warn(msg, ExtrapolationWarning, stacklevel=2)
    start = stencil_start(nodes, q)
    idx = start[:, None] + np.arange(STENCIL)
    weights = lagrange_weights(nodes[idx], q, derivative=derivative)
    if derivative:
        w, dw = weights
        out = (np.sum(w * values[idx], axis=1), np.sum(dw * values[idx], axis=1))
        return (out[0][0], out[1][0]) if scalar else out
    out = np.sum(weights * values[idx], axis=1)
    return out[0] if scalar else out


def fd4_derivative(field, h):
    """Fourth-order first derivative on a uniform grid of spacing ``h``.

    Centred 5-point stencils inside, one-sided 5-point stencils on the two
    outermost nodes at each end.
    """
    f = np.asarray(field)
    if f.shape[-1] < STENCIL:
        raise InsufficientPointsError(f"need at least {STENCIL} grid points, got {f.shape[-1]}")
    out = np.empty_like(f, dtype=np.result_type(f, float))
    out[..., 2:-2] = (f[..., :-4] - 8.0 * f[..., 1:-3] + 8.0 * f[..., 3:-1] - f[..., 4:]) / 12.0
    head = f[..., :5]
    tail = f[..., -5:][..., ::-1]
    out[..., 0] = head @ _EDGE0
    out[..., 1] = head @ _EDGE1
    out[..., -1] = -(tail @ _EDGE0)
    out[..., -2] = -(tail @ _EDGE1)
    return out / h


def rk4_step(state, rhs, dt, t=0.0):
    """Classical fourth-order Runge-Kutta update of ``y' = rhs(t, y)``."""
    k1 = rhs(t, state)
    k2 = rhs(t + 0.5 * dt, state + 0.5 * dt * k1)
    k3 = rhs(t + 0.5 * dt, state + 0.5 * dt * k2)
    k4 = rhs(t + dt, state + dt * k3)
    return state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def simpson(values, h):
    """Composite Simpson rule on a uniform grid (odd node count)."""
    v = np.asarray(values)
    if v.size % 2 == 0:
        raise ValueError("Simpson's rule needs an odd number of nodes")
    return h / 3.0 * (v[0] + v[-1] + 4.0 * v[1:-1:2].sum() + 2.0 * v[2:-1:2].sum())
