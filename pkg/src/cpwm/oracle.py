"""Independent ground truth for the relaxation engines.

Closed forms for the Eckart barrier, rectangular barrier and smooth (Fermi
function) step, plus a transfer-matrix solver that works for any potential
by exact propagation of (psi, psi') across many thin constant slabs. The
transfer matrix is the reference wherever no textbook formula exists; the
closed forms are checked against it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from cpwm.errors import NoOpenChannelError, TurningPointError
from cpwm.potentials import PiecewiseConstant, PotentialModel


def eckart_transmission(v0, alpha, mass, energy):
    """T for V = V0 sech^2(alpha x) at energy E > 0."""
    if energy <= 0:
        raise ValueError("energy must be positive")
    k = np.sqrt(2.0 * mass * energy)
    a = np.pi * k / alpha
    lam = 8.0 * mass * v0 / alpha**2 - 1.0
    if lam >= 0.0:
        barrier = np.cosh(0.5 * np.pi * np.sqrt(lam)) ** 2
    else:
        barrier = np.cos(0.5 * np.pi * np.sqrt(-lam)) ** 2
    with np.errstate(over="ignore"):
        ratio = barrier / np.sinh(a) ** 2
    return float(1.0 / (1.0 + ratio))


def eckart_probabilities(v0, alpha, mass, energy):
    t = eckart_transmission(v0, alpha, mass, energy)
    k = np.sqrt(2.0 * mass * energy)
    a = np.pi * k / alpha
    lam = 8.0 * mass * v0 / alpha**2 - 1.0
    barrier = np.cosh(0.5 * np.pi * np.sqrt(lam)) ** 2 if lam >= 0 else np.cos(0.5 * np.pi * np.sqrt(-lam)) ** 2
    with np.errstate(over="ignore"):
        s2 = np.sinh(a) ** 2
    r = float(barrier / (s2 + barrier)) if np.isfinite(s2) else 0.0
    return r, t


def square_barrier_probabilities(v0, x1, x2, mass, energy):
    """(R, T) for a rectangular barrier of height V0 on [x1, x2)."""
    if energy <= 0:
        raise ValueError("energy must be positive")
    if v0 == 0.0:
        return 0.0, 1.0
    width = x2 - x1
    if abs(energy - v0) <= 1e-13 * v0:
        g = mass * v0 * width**2 / 2.0
    elif energy < v0:
        kappa = np.sqrt(2.0 * mass * (v0 - energy))
        g = v0**2 * np.sinh(kappa * width) ** 2 / (4.0 * energy * (v0 - energy))
    else:
        q = np.sqrt(2.0 * mass * (energy - v0))
        g = v0**2 * np.sin(q * width) ** 2 / (4.0 * energy * (energy - v0))
    return float(g / (1.0 + g)), float(1.0 / (1.0 + g))


def ramp_probabilities(v0, alpha, mass, energy):
    """(R, T) for V = V0 / (1 + exp(-x/alpha)) = (V0/2)(1 + tanh(x/2alpha))."""
    if energy <= 0:
        raise ValueError("energy must be positive")
    if energy <= v0:
        return 1.0, 0.0
    k1 = np.sqrt(2.0 * mass * energy)
    k2 = np.sqrt(2.0 * mass * (energy - v0))
    if alpha == 0.0:
        r = ((k1 - k2) / (k1 + k2)) ** 2
        return float(r), float(4.0 * k1 * k2 / (k1 + k2) ** 2)
    a = np.pi * alpha
    # ratios of sinh written with exponentials so large arguments do not overflow
    def log_sinh(z):
        return z + np.log1p(-np.exp(-2.0 * z)) - np.log(2.0)

    lr = 2.0 * (log_sinh(a * (k1 - k2)) - log_sinh(a * (k1 + k2))) if k1 > k2 else -np.inf
    lt = log_sinh(2.0 * a * k1) + log_sinh(2.0 * a * k2) - 2.0 * log_sinh(a * (k1 + k2))
    return float(np.exp(lr)), float(np.exp(lt))


@dataclass
class TransferMatrixResult:
    reflection: float
    transmission: float
    r_amplitude: complex
    t_amplitude: complex
    energy: float
    model: PotentialModel
    step_dx: float
    _edges: np.ndarray | None = None
    _states: np.ndarray | None = None
    _slab_q2: np.ndarray | None = None
    _blend: tuple = ()

    def wavefunction(self, x, derivative=False):
        """psi(x) with unit incident amplitude from the left (and psi'(x))."""
        if self._blend:
            parts = [(w, r.wavefunction(x, derivative=True)) for w, r in self._blend]
            psi = sum(w * v[0] for w, v in parts)
            dpsi = sum(w * v[1] for w, v in parts)
            return (psi, dpsi) if derivative else psi
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self._states is None:
            raise ValueError("solve with keep_states=True to evaluate the wavefunction")
        edges, states, q2 = self._edges, self._states, self._slab_q2
        p_left, p_right = self.model.asymptotic_momenta(self.energy)
        psi = np.empty(x.shape, dtype=complex)
        dpsi = np.empty(x.shape, dtype=complex)
        left = x < edges[0]
        right = x > edges[-1]
        inner = ~(left | right)
        inc, out = np.exp(1j * p_left * x[left]), self.r_amplitude * np.exp(-1j * p_left * x[left])
        psi[left] = inc + out
        dpsi[left] = 1j * p_left * (inc - out)
        psi[right] = self.t_amplitude * np.exp(1j * p_right * x[right])
        dpsi[right] = 1j * p_right * psi[right]
        xi = x[inner]
        k = np.clip(np.searchsorted(edges, xi, side="right") - 1, 0, edges.size - 2)
        m = _slab_matrices(q2[k], xi - edges[k])
        s = states[k]
        psi[inner] = m[:, 0, 0] * s[:, 0] + m[:, 0, 1] * s[:, 1]
        dpsi[inner] = m[:, 1, 0] * s[:, 0] + m[:, 1, 1] * s[:, 1]
        return (psi, dpsi) if derivative else psi

    def density(self, x):
        return np.abs(self.wavefunction(x)) ** 2

    def components(self, x, momentum):
        """Stationary counter-propagating pair for trajectory momentum ``momentum``.

        With psi' = i p (psi_+ - psi_-), psi_pm = (psi +- psi'/(i p)) / 2.
        """
        psi, dpsi = self.wavefunction(x, derivative=True)
        return 0.5 * (psi + dpsi / (1j * momentum)), 0.5 * (psi - dpsi / (1j * momentum))


def _slab_matrices(q2, d):
    """Forward propagators of (psi, psi') across slabs with k^2 = q2 and width d."""
    q2 = np.asarray(q2, dtype=float)
    d = np.asarray(d, dtype=float) * np.ones_like(q2)
    q = np.sqrt(np.abs(q2))
    m = np.empty(q2.shape + (2, 2))
    osc = q2 > 0
    eva = q2 < 0
    flat = ~(osc | eva)
    qd = q * d
    m[osc, 0, 0] = np.cos(qd[osc])
    m[osc, 0, 1] = np.sin(qd[osc]) / q[osc]
    m[osc, 1, 0] = -q[osc] * np.sin(qd[osc])
    m[osc, 1, 1] = np.cos(qd[osc])
    m[eva, 0, 0] = np.cosh(qd[eva])
    m[eva, 0, 1] = np.sinh(qd[eva]) / q[eva]
    m[eva, 1, 0] = q[eva] * np.sinh(qd[eva])
    m[eva, 1, 1] = np.cosh(qd[eva])
    m[flat, 0, 0] = 1.0
    m[flat, 0, 1] = d[flat]
    m[flat, 1, 0] = 0.0
    m[flat, 1, 1] = 1.0
    return m


def _slab_edges(model, step_dx, domain):
    lo, hi = domain if domain is not None else model.extent(1e-16)
    cuts = [lo] + [e for e in model.discontinuities if lo < e < hi] + [hi]
    pieces = []
    for a, b in zip(cuts, cuts[1:]):
        n = max(1, int(np.ceil((b - a) / step_dx - 1e-9)))
        pieces.append(np.linspace(a, b, n + 1)[:-1])
    pieces.append(np.array([hi]))
    return np.concatenate(pieces)


def _solve_once(model, energy, step_dx, domain, keep_states):
    p_left, p_right = model.asymptotic_momenta(energy)
    if energy <= model.v_right or p_right <= 0.0:
        raise NoOpenChannelError(f"E={energy:.6g} <= V(+inf)={model.v_right:.6g}")
    edges = _slab_edges(model, step_dx, domain)
    widths = np.diff(edges)
    mids = 0.5 * (edges[:-1] + edges[1:])
    q2 = 2.0 * model.mass * (energy - model.evaluate(mids))
    fwd = _slab_matrices(q2, widths)
    # inverse of a unit-determinant 2x2 matrix
    inv = np.empty_like(fwd)
    inv[:, 0, 0] = fwd[:, 1, 1]
    inv[:, 1, 1] = fwd[:, 0, 0]
    inv[:, 0, 1] = -fwd[:, 0, 1]
    inv[:, 1, 0] = -fwd[:, 1, 0]

    n = inv.shape[0]
    chunk = max(1, int(np.sqrt(n)))
    n_chunks = -(-n // chunk)
    padded = np.broadcast_to(np.eye(2), (n_chunks * chunk, 2, 2)).copy()
    padded[:n] = inv
    blocks = padded.reshape(n_chunks, chunk, 2, 2)
    products = np.broadcast_to(np.eye(2), (n_chunks, 2, 2)).copy()
    for j in range(chunk):
        products = products @ blocks[:, j]

    b = edges[-1]
    end_state = np.array([np.exp(1j * p_right * b), 1j * p_right * np.exp(1j * p_right * b)])
    chunk_end = np.empty((n_chunks + 1, 2), dtype=complex)
    chunk_end[n_chunks] = end_state
    for c in range(n_chunks - 1, -1, -1):
        chunk_end[c] = products[c] @ chunk_end[c + 1]

    a = edges[0]
    psi_a, dpsi_a = chunk_end[0]
    incoming = 0.5 * (psi_a + dpsi_a / (1j * p_left)) * np.exp(-1j * p_left * a)
    outgoing = 0.5 * (psi_a - dpsi_a / (1j * p_left)) * np.exp(1j * p_left * a)
    t_amp = 1.0 / incoming
    r_amp = outgoing / incoming
    result = TransferMatrixResult(
        reflection=float(abs(r_amp) ** 2),
        transmission=float(p_right / p_left * abs(t_amp) ** 2),
        r_amplitude=complex(r_amp),
        t_amplitude=complex(t_amp),
        energy=energy,
        model=model,
        step_dx=step_dx,
    )
    if keep_states:
        states = np.empty((n_chunks * chunk + 1, 2), dtype=complex)
        cur = chunk_end[1:].copy()
        for j in range(chunk - 1, -1, -1):
            cur = np.einsum("cij,cj->ci", blocks[:, j], cur)
            states[np.arange(n_chunks) * chunk + j] = cur
        states[n_chunks * chunk] = chunk_end[n_chunks]
        states = states[: n + 1]
        states[n] = end_state
        result._edges = edges
        result._states = states[:n] * t_amp
        result._slab_q2 = q2
    return result


def transfer_matrix_solve(model: PotentialModel, energy: float, step_dx: float = 1e-3,
                          domain=None, richardson: bool = True, keep_states: bool = True):
    """Exact plane-wave matching across slabs of width ``step_dx``.

    Each slab carries V at its midpoint; declared discontinuities are always
    slab edges. The slab error is O(step_dx^2); with ``richardson`` the result
    from ``step_dx`` and ``step_dx/2`` is combined to cancel that term for
    smooth potentials. The returned object evaluates the wavefunction.
    """
    if step_dx <= 0:
        raise ValueError("step_dx must be positive")
    fine = _solve_once(model, energy, step_dx / 2.0 if richardson else step_dx, domain, keep_states)
    if not richardson or isinstance(model, PiecewiseConstant):
        return fine
    coarse = _solve_once(model, energy, step_dx, domain, keep_states)
    combined = TransferMatrixResult(
        reflection=(4.0 * fine.reflection - coarse.reflection) / 3.0,
        transmission=(4.0 * fine.transmission - coarse.transmission) / 3.0,
        r_amplitude=(4.0 * fine.r_amplitude - coarse.r_amplitude) / 3.0,
        t_amplitude=(4.0 * fine.t_amplitude - coarse.t_amplitude) / 3.0,
        energy=energy,
        model=model,
        step_dx=step_dx,
    )
    if keep_states:
        combined._blend = ((4.0 / 3.0, fine), (-1.0 / 3.0, coarse))
    return combined


@dataclass(frozen=True)
class WkbReference:
    """Left-incident WKB pair psi_pm = r exp(+-i s) with invariant flux F."""

    model: PotentialModel
    energy: float
    x_ref: float

    @property
    def flux(self):
        return np.sqrt(2.0 * self.model.mass * (self.energy - self.model.v_left)) / self.model.mass

    def momentum(self, x):
        return self.model.classical_momentum(x, self.energy)

    def amplitude(self, x):
        return np.sqrt(self.model.mass * self.flux / self.momentum(x))

    def action(self, x):
        """s(x) = p_inf * x_ref + integral of p from x_ref to x."""
        p_inf = self.model.mass * self.flux
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        vals = np.empty(xs.shape)
        for i, xi in enumerate(xs):
            vals[i], _ = quad(lambda u: float(self.momentum(u)), self.x_ref, xi, epsabs=1e-10, epsrel=1e-12,
                              limit=200)
        vals += p_inf * self.x_ref
        return vals if np.ndim(x) else float(vals[0])


def wkb_components(model: PotentialModel, energy: float, x, x_ref: float = -3.0):
    """(psi_plus_sc, psi_minus_sc) at ``x``; phases referenced to p_inf * x_ref."""
    ref = WkbReference(model, energy, x_ref)
    try:
        r = ref.amplitude(x)
    except TurningPointError:
        raise
    s = ref.action(x)
    return r * np.exp(1j * s), r * np.exp(-1j * s)
