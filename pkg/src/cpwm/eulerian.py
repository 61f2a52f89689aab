"""Fixed-grid relaxation of the constant-velocity equations.

Both components live on the same uniform grid for all time, so no
interpolation is needed; the price is the advection term, whose slope comes
from fourth-order differences (one-sided at the two outermost nodes of each
end). The inflow values psi_+(x_left) and psi_-(x_right) are pinned to the
incident plane wave and to zero.
"""

from __future__ import annotations

import numpy as np

from cpwm.errors import CFLInstabilityError, ConfigError, IncompatibleSchemeError
from cpwm.kernels import CONSTANT_VELOCITY, LocalState, eulerian_rhs
from cpwm.lagrangian import CONST_VEL_FIXED, EngineConfig, check_compatibility
from cpwm.numerics import fd4_derivative, mls_interpolate, rk4_step
from cpwm.potentials import PotentialModel

# Field max-norm beyond which the run is declared divergent.
DIVERGENCE_BOUND = 1.0e3


class FixedGridEngine:
    """Method-of-lines propagation on N uniform nodes for one energy."""

    has_outer_samples = False

    def __init__(self, model: PotentialModel, energy: float, config: EngineConfig | None = None):
        config = config or EngineConfig(scheme=CONST_VEL_FIXED, dt=0.1)
        if config.scheme != CONST_VEL_FIXED:
            raise ConfigError("scheme", f"the fixed-grid engine runs {CONST_VEL_FIXED!r} only")
        if not model.symmetric_asymptotes:
            raise IncompatibleSchemeError(
                "scheme", "the fixed-grid scheme needs V(-inf) == V(+inf); use const_vel_two_region")
        check_compatibility(model, energy, config)
        self.model = model
        self.energy = float(energy)
        self.config = config
        self.mass = model.mass
        self.p_left, self.p_right = model.asymptotic_momenta(self.energy)
        self.x_left, self.x_right = config.x_left, config.x_right
        self.spacing = config.spacing
        self.dt = config.dt
        self.check_interval = max(config.window, int(np.ceil(config.window_time / self.dt - 1e-9)))
        self.nodes = np.linspace(self.x_left, self.x_right, config.n_points)
        self._v = model.evaluate(self.nodes)
        self.initialize()

    @property
    def scheme(self) -> str:
        return self.config.scheme

    def initialize(self):
        """Plane wave in psi_+, zero psi_-, at t = 0."""
        self.t = 0.0
        self.steps = 0
        self.psi_plus = np.exp(1j * self.p_left * self.nodes)
        self.psi_minus = np.zeros(self.nodes.size, complex)

    def _inflow(self, t):
        return np.exp(1j * (self.p_left * self.x_left - self.energy * t))

    def _split(self, y):
        n = self.nodes.size
        return y[:n].copy(), y[n:].copy()

    def _pin(self, plus, minus, t):
        plus[0] = self._inflow(t)
        minus[-1] = 0.0

    def _rates(self, t, y):
        plus, minus = self._split(y)
        self._pin(plus, minus, t)
        d_plus, d_minus = self._field_rates(plus, minus)
        d_plus[0] = -1j * self.energy * plus[0]
        d_minus[-1] = 0.0
        return np.concatenate([d_plus, d_minus])

    def _field_rates(self, plus, minus):
        h = self.spacing
        state = LocalState(psi_plus=plus, psi_minus=minus, energy=self.energy, v=self._v, x=self.nodes,
                           p=self.p_left, mass=self.mass)
        return eulerian_rhs(state, fd4_derivative(plus, h), fd4_derivative(minus, h), CONSTANT_VELOCITY)

    def advance(self, dt: float | None = None):
        """One RK4 step; the inflow pins are reasserted inside every stage."""
        dt = self.dt if dt is None else dt
        y = rk4_step(np.concatenate([self.psi_plus, self.psi_minus]), self._rates, dt, self.t)
        self.t += dt
        self.steps += 1
        self.psi_plus, self.psi_minus = self._split(y)
        self._pin(self.psi_plus, self.psi_minus, self.t)
        norm = max(np.max(np.abs(self.psi_plus)), np.max(np.abs(self.psi_minus)))
        if not np.isfinite(norm) or norm > DIVERGENCE_BOUND:
            raise CFLInstabilityError(
                f"field max-norm {norm:.3g} exceeded {DIVERGENCE_BOUND:g} at t={self.t:g} "
                f"(dt={dt:g}, h={self.spacing:g}); reduce dt")

    # ------------------------------------------------------------ read-outs
    def partition(self, x):
        return [(np.ones(np.shape(x), dtype=bool), 0, CONSTANT_VELOCITY, 0.0)]

    def speed_in_region(self, r: int, x):
        return np.full(np.shape(x), self.p_left / self.mass)

    def region_bounds(self) -> list[tuple[float, float]]:
        return [(self.x_left, self.x_right)]

    def _at(self, values, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.size == self.nodes.size and np.array_equal(x, self.nodes):
            return values.copy()
        return mls_interpolate(self.nodes, values, x)

    def sample(self, x, source: str = "current"):
        """(psi_plus, psi_minus) at ``x``; grid values at the nodes themselves.

        ``source`` is accepted for interface parity with the trajectory
        engine and ignored.
        """
        return self._at(self.psi_plus, x), self._at(self.psi_minus, x)

    def rates(self, x, region_index: int | None = None, source: str = "current"):
        """Fields and the propagator's own partial time derivatives at ``x``."""
        d_plus, d_minus = self._field_rates(self.psi_plus, self.psi_minus)
        d_plus[0] = -1j * self.energy * self.psi_plus[0]
        d_minus[-1] = 0.0
        return (self._at(self.psi_plus, x), self._at(self.psi_minus, x),
                self._at(d_plus, x), self._at(d_minus, x))

    def edge_values(self):
        """(psi_minus(x_left), psi_plus(x_right)): plain grid values."""
        return self.psi_minus[0], self.psi_plus[-1]

    def sample_counts(self) -> list[int]:
        return [self.nodes.size, self.nodes.size]


def run_fixed_to_convergence(model: PotentialModel, energy: float, config: EngineConfig | None = None,
                             raise_on_failure: bool = True):
    """Fixed-grid counterpart of :func:`cpwm.lagrangian.run_to_convergence`."""
    from cpwm.relaxation import relax

    return relax(FixedGridEngine(model, energy, config), raise_on_failure=raise_on_failure)
