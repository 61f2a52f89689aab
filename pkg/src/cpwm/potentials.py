"""Benchmark scattering potentials in atomic units.

Every model is immutable and vectorised over ``x``. Smooth models return the
analytic derivative; piecewise-constant models report zero derivative and
list their discontinuities instead (steps are handled by matching, never by
forces).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from cpwm.errors import TurningPointError

DEFAULT_MASS = 2000.0


@dataclass(frozen=True, kw_only=True)
class PotentialModel:
    """Base class. Subclasses implement :meth:`evaluate` and :meth:`derivative`."""

    mass: float = DEFAULT_MASS

    kind = "base"

    @property
    def discontinuities(self) -> tuple:
        return ()

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError("mass must be positive")

    def evaluate(self, x):
        raise NotImplementedError

    def derivative(self, x):
        raise NotImplementedError

    @property
    def v_left(self) -> float:
        """V(-inf)."""
        return 0.0

    @property
    def v_right(self) -> float:
        """V(+inf)."""
        return 0.0

    def __call__(self, x):
        return self.evaluate(x)

    def classical_momentum(self, x, energy):
        """p(x) = sqrt(2m(E - V(x))); raises TurningPointError where E <= V."""
        kinetic = energy - self.evaluate(x)
        if np.any(kinetic <= 0.0):
            raise TurningPointError(
                f"E={energy:.6g} hartree is at or below V(x) (min E-V = {np.min(kinetic):.3g})"
            )
        return np.sqrt(2.0 * self.mass * kinetic)

    def momentum_derivative(self, x, energy):
        """p'(x) = -m V'(x) / p(x), analytic in V'."""
        return -self.mass * self.derivative(x) / self.classical_momentum(x, energy)

    def asymptotic_momenta(self, energy):
        """(p_L, p_R) at x -> -inf and x -> +inf."""
        if energy <= self.v_left:
            raise TurningPointError("incident channel closed")
        p_left = np.sqrt(2.0 * self.mass * (energy - self.v_left))
        p_right = np.sqrt(2.0 * self.mass * (energy - self.v_right)) if energy > self.v_right else 0.0
        return float(p_left), float(p_right)

    def maximum(self, lo: float, hi: float) -> float:
        """max V on [lo, hi] (dense scan polished by a bounded 1D search)."""
        xs = np.linspace(lo, hi, 4001)
        vs = self.evaluate(xs)
        i = int(np.argmax(vs))
        best = float(vs[i])
        if not self.discontinuities:
            a, b = xs[max(i - 1, 0)], xs[min(i + 1, xs.size - 1)]
            if b > a:
                res = minimize_scalar(lambda s: -float(self.evaluate(s)), bounds=(a, b), method="bounded",
                                      options={"xatol": 1e-12})
                best = max(best, -float(res.fun))
        return best

    def extent(self, tol: float = 1e-14) -> tuple[float, float]:
        """Interval outside of which |V - V(+-inf)| < tol * scale."""
        scale = max(abs(self.v_left), abs(self.v_right), self.scale, 1e-300)
        lo, hi = -1.0, 1.0
        while abs(float(self.evaluate(lo)) - self.v_left) > tol * scale and lo > -1e6:
            lo *= 1.25
        while abs(float(self.evaluate(hi)) - self.v_right) > tol * scale and hi < 1e6:
            hi *= 1.25
        if self.discontinuities:
            lo = min(lo, self.discontinuities[0] - 1.0)
            hi = max(hi, self.discontinuities[-1] + 1.0)
        return lo, hi

    @property
    def scale(self) -> float:
        return 1.0

    def asymptotic_error(self, x_left: float, x_right: float) -> tuple[float, float]:
        """(|V(x_left) - V(-inf)|, |V(x_right) - V(+inf)|)."""
        return (abs(float(self.evaluate(x_left)) - self.v_left),
                abs(float(self.evaluate(x_right)) - self.v_right))

    @property
    def symmetric_asymptotes(self) -> bool:
        return self.v_left == self.v_right

    def describe(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True, kw_only=True)
class Eckart(PotentialModel):
    """V = V0 sech^2(alpha x)."""

    v0: float = 0.0
    alpha: float = 1.0

    kind = "eckart"

    def __post_init__(self):
        super().__post_init__()
        if self.v0 < 0:
            raise ValueError("V0 must be >= 0")

    def evaluate(self, x):
        return self.v0 / np.cosh(self.alpha * np.asarray(x, dtype=float)) ** 2

    def derivative(self, x):
        ax = self.alpha * np.asarray(x, dtype=float)
        return -2.0 * self.v0 * self.alpha * np.tanh(ax) / np.cosh(ax) ** 2

    @property
    def scale(self):
        return self.v0 or 1.0

    def describe(self):
        return {"kind": self.kind, "V0": self.v0, "alpha": self.alpha, "mass": self.mass}


@dataclass(frozen=True, kw_only=True)
class UphillRamp(PotentialModel):
    """V = (V0/2)(1 + tanh(x / (2 alpha))), rising from 0 to V0."""

    v0: float = 0.0
    alpha: float = 1.0

    kind = "uphill_ramp"

    def __post_init__(self):
        super().__post_init__()
        if self.v0 < 0:
            raise ValueError("V0 must be >= 0")

    def evaluate(self, x):
        return 0.5 * self.v0 * (1.0 + np.tanh(np.asarray(x, dtype=float) / (2.0 * self.alpha)))

    def derivative(self, x):
        u = np.asarray(x, dtype=float) / (2.0 * self.alpha)
        return self.v0 / (4.0 * self.alpha * np.cosh(u) ** 2)

    @property
    def v_right(self):
        return self.v0

    @property
    def scale(self):
        return self.v0 or 1.0

    def describe(self):
        return {"kind": self.kind, "V0": self.v0, "alpha": self.alpha, "mass": self.mass}


@dataclass(frozen=True, kw_only=True)
class DoubleGaussian(PotentialModel):
    """V = V0 [exp(-beta (x - c)^2) + exp(-beta (x + c)^2)]."""

    v0: float = 0.0
    beta: float = 1.0
    center: float = 0.0

    kind = "double_gaussian"

    def __post_init__(self):
        super().__post_init__()
        if self.v0 < 0:
            raise ValueError("V0 must be >= 0")

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        return self.v0 * (np.exp(-self.beta * (x - self.center) ** 2)
                          + np.exp(-self.beta * (x + self.center) ** 2))

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        a, b = x - self.center, x + self.center
        return -2.0 * self.beta * self.v0 * (a * np.exp(-self.beta * a**2) + b * np.exp(-self.beta * b**2))

    @property
    def scale(self):
        return self.v0 or 1.0

    def describe(self):
        return {"kind": self.kind, "V0": self.v0, "beta": self.beta, "x0": self.center, "mass": self.mass}


@dataclass(frozen=True, kw_only=True)
class PiecewiseConstant(PotentialModel):
    """Steps at ``edges``; ``values[k]`` holds on [edges[k-1], edges[k]).

    ``values`` has one more entry than ``edges``. Intervals are left-closed.
    """

    edges: tuple = ()
    values: tuple = (0.0,)

    kind = "custom_piecewise"

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, "edges", tuple(float(e) for e in self.edges))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if len(self.values) != len(self.edges) + 1:
            raise ValueError("need len(values) == len(edges) + 1")
        if any(b <= a for a, b in zip(self.edges, self.edges[1:])):
            raise ValueError("edges must be strictly increasing")

    @property
    def discontinuities(self):
        return tuple(e for e, a, b in zip(self.edges, self.values, self.values[1:]) if a != b)

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(np.asarray(self.edges), x, side="right")
        return np.asarray(self.values)[idx]

    def derivative(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    @property
    def v_left(self):
        return self.values[0]

    @property
    def v_right(self):
        return self.values[-1]

    @property
    def scale(self):
        return max(abs(v) for v in self.values) or 1.0

    def extent(self, tol=1e-14):
        if not self.edges:
            return -1.0, 1.0
        return self.edges[0], self.edges[-1]

    def describe(self):
        return {"kind": self.kind, "edges": list(self.edges), "values": list(self.values), "mass": self.mass}


@dataclass(frozen=True, kw_only=True)
class SquareBarrier(PiecewiseConstant):
    """Rectangular barrier of height V0 on [x1, x2)."""

    v0: float = 0.0
    x1: float = -1.0
    x2: float = 1.0
    edges: tuple = field(init=False, default=())
    values: tuple = field(init=False, default=(0.0,))

    kind = "square_barrier"

    def __post_init__(self):
        if self.v0 < 0:
            raise ValueError("V0 must be >= 0")
        object.__setattr__(self, "edges", (self.x1, self.x2))
        object.__setattr__(self, "values", (0.0, self.v0, 0.0))
        super().__post_init__()

    def describe(self):
        return {"kind": self.kind, "V0": self.v0, "x1": self.x1, "x2": self.x2, "mass": self.mass}


def free_potential(mass: float = DEFAULT_MASS) -> PiecewiseConstant:
    """V identically zero."""
    return PiecewiseConstant(mass=mass, edges=(), values=(0.0,))
