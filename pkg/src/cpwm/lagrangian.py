"""Relaxation of the two components on moving trajectory grids.

Each component lives on an ordered set of samples moving with dx/dt = +-p/m.
Samples enter at the inflow edge of their region and are dropped a few
spacings past the outflow edge. A strip of ``buffer`` spacings beyond each
edge keeps every five-point stencil used inside the region an interpolation:

* past the inflow edge the samples are ghosts, reset after every step from
  the boundary condition (incident plane wave, zero, or step matching at the
  dividing point);
* past the outflow edge the samples keep evolving until they leave the strip.

The asymmetric (two-region) mode runs a left pair of ensembles on
[x_left, x_divider] with momentum p_L and a right pair on
[x_divider, x_right] with momentum p_R, tied together by step matching.
"""

from __future__ import annotations

import warnings
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from cpwm.errors import (
    ConfigError,
    EnergyBelowThresholdError,
    ExtrapolationWarning,
    IncompatibleSchemeError,
    TurningPointError,
)
from cpwm.kernels import (
    CLASSICAL,
    CONSTANT_VELOCITY,
    PRODUCT_REGION,
    LocalState,
    eulerian_rhs,
    lagrangian_rhs,
    step_match,
)
from cpwm.numerics import STENCIL, mls_interpolate, rk4_step, stencil_start
from cpwm.oracle import wkb_components
from cpwm.potentials import PotentialModel

CLASSICAL_TRAJ = "classical_traj"
CONST_VEL_TRAJ = "const_vel_traj"
CONST_VEL_FIXED = "const_vel_fixed"
CONST_VEL_TWO_REGION = "const_vel_two_region"
SCHEMES = (CLASSICAL_TRAJ, CONST_VEL_TRAJ, CONST_VEL_FIXED, CONST_VEL_TWO_REGION)

# Energies closer than this to the barrier top are refused by the classical scheme.
CLASSICAL_MARGIN = 1e-6


@dataclass
class EngineConfig:
    """Numerical parameters of one relaxation run (atomic units).

    Parameters
    ----------
    scheme : str
        One of ``classical_traj``, ``const_vel_traj``, ``const_vel_fixed``,
        ``const_vel_two_region``.
    x_left, x_right : float
        Edges of the interaction region.
    x_divider : float
        Dividing point of the two-region mode.
    n_points : int
        Initial samples per ensemble on [x_left, x_right]; sets the spacing.
    dt, t_max : float
        Time step and propagation limit.
    tol : float
        Convergence threshold on the change of P_refl and P_trans between
        two consecutive checks.
    window, window_time : int, float
        Checks are at least ``window`` steps and ``window_time`` apart; the
        trajectory engine also rounds the interval up to whole periods.
    residual_gate : float
        The relative stationarity residual must also be below this value.
    buffer : int
        Width of the strips beyond the region edges, in spacings.
    demodulate : bool
        Interpolate each component with its plane-wave carrier divided out
        when computing the coupling. Off by default: inside a barrier the
        components carry both carriers and raw values interpolate better.
    commensurate : bool
        Shrink ``dt`` so that an integer number of steps moves every sample
        by exactly one spacing. All samples then see identical histories and
        the discrete stationary state is exactly periodic. The count is
        rounded up to an odd number: with an even count the opposing lattices
        only meet at half of the possible relative offsets, interpolation
        errors stop averaging out and P_refl + P_trans drifts by ~1e-4.
    initial : {"plane_wave", "wkb"}
        Initial right-moving component for the classical scheme.
    snapshot_stride : int
        Record a profile every this many steps (0 disables).
    """

    scheme: str = CONST_VEL_TRAJ
    x_left: float = -3.0
    x_right: float = 3.0
    x_divider: float = 0.0
    n_points: int = 31
    dt: float = 10.0
    t_max: float = 1.0e4
    tol: float = 1e-6
    window: int = 50
    window_time: float = 500.0
    residual_gate: float = 1e-3
    buffer: int = 3
    demodulate: bool = False
    commensurate: bool = True
    initial: str = "plane_wave"
    snapshot_stride: int = 0

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError("scheme", f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if not self.x_left < self.x_right:
            raise ConfigError("x_left", "need x_left < x_right")
        if self.scheme == CONST_VEL_TWO_REGION and not self.x_left < self.x_divider < self.x_right:
            raise ConfigError("x_divider", "need x_left < x_divider < x_right")
        if self.n_points < STENCIL:
            raise ConfigError("n_points", f"need at least {STENCIL} points")
        if not self.dt > 0:
            raise ConfigError("dt", "dt must be positive")
        if not self.t_max > self.dt:
            raise ConfigError("t_max", "t_max must exceed dt")
        if not self.tol > 0:
            raise ConfigError("tol", "tol must be positive")
        if self.window < 1:
            raise ConfigError("window", "window must be at least one step")
        if self.window_time < 0:
            raise ConfigError("window_time", "window_time must be >= 0")
        if self.buffer < 2:
            raise ConfigError("buffer", "buffer must be at least 2 spacings")
        if self.initial not in ("plane_wave", "wkb"):
            raise ConfigError("initial", "initial must be 'plane_wave' or 'wkb'")
        if self.snapshot_stride < 0:
            raise ConfigError("snapshot_stride", "snapshot_stride must be >= 0")

    @property
    def spacing(self) -> float:
        return (self.x_right - self.x_left) / (self.n_points - 1)


@dataclass
class TrajectoryEnsemble:
    """Ordered samples of one component on one region [lo, hi]."""

    sign: int
    x: np.ndarray
    psi: np.ndarray
    lo: float
    hi: float
    spacing: float

    def active(self) -> np.ndarray:
        """Mask of samples inside the region proper."""
        slack = 1e-9 * (self.hi - self.lo)
        return (self.x >= self.lo - slack) & (self.x <= self.hi + slack)

    def ghosts(self) -> np.ndarray:
        """Mask of samples beyond the inflow edge."""
        return self.x < self.lo if self.sign > 0 else self.x > self.hi

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.active()))


@dataclass
class Region:
    """A pair of counter-moving ensembles sharing one kernel."""

    plus: TrajectoryEnsemble
    minus: TrajectoryEnsemble
    kernel: str
    momentum: float
    v_inf: float = 0.0
    lo: float = field(init=False)
    hi: float = field(init=False)

    def __post_init__(self):
        self.lo, self.hi = self.plus.lo, self.plus.hi


def _cos_sinc(k, d):
    """cos(k d) and sin(k d)/k for complex k (the latter finite at k = 0)."""
    return np.cos(k * d), d * np.sinc(k * d / np.pi)


@dataclass
class KinkFit:
    """Stationary local model of one component across a potential step at ``b``.

    With V constant on each side, a stationary component is a pair of
    counter-running plane waves there: psi = a cos(k d) + s sin(k d)/k on
    the left of d = x - b = 0 and a cos(k d) + (s + jump) sin(k d)/k on
    the right, with k = sqrt(2m(E - V)) on each side.
    """

    b: float
    value: complex
    slope: complex
    jump: complex
    k_left: complex
    k_right: complex

    def __call__(self, x, derivative=False):
        d = np.asarray(x, dtype=float) - self.b
        right = d > 0
        k = np.where(right, self.k_right, self.k_left)
        s = self.slope + np.where(right, self.jump, 0.0)
        c, sc = _cos_sinc(k, d)
        value = self.value * c + s * sc
        if not derivative:
            return value
        return value, -self.value * k * k * sc + s * c


def fit_kink(b, nodes_plus, psi_plus, nodes_minus, psi_minus, v_left, v_right, energy, mass, momentum):
    """Joint least-squares fit of both components around a potential step at ``b``.

    Continuity of psi and of the partial time derivatives across the step
    fixes the slope jump of each component at
    -+ i m (V_right - V_left) psi(b) / p, with psi = psi_+ + psi_- and p
    the trajectories' momentum. Both components are described by their
    value and left slope at ``b`` (four unknowns), fitted to the five nodes
    of each lattice nearest ``b``. The model is exact once the field is
    stationary.

    Returns (plus, minus) :class:`KinkFit` models.
    """
    k_left = np.sqrt(complex(2.0 * mass * (energy - v_left)))
    k_right = np.sqrt(complex(2.0 * mass * (energy - v_right)))
    slope_jump = 1j * mass * (v_right - v_left) / momentum  # jump = -sign * slope_jump * psi(b)
    matrix = np.zeros((2 * STENCIL, 4), complex)
    rhs = np.zeros(2 * STENCIL, complex)
    for block, (nodes, psi, sign) in enumerate(((nodes_plus, psi_plus, +1), (nodes_minus, psi_minus, -1))):
        idx = stencil_start(nodes, np.array([b]))[0] + np.arange(STENCIL)
        d = nodes[idx] - b
        right = d > 0
        c, sc = _cos_sinc(np.where(right, k_right, k_left), d)
        rows = slice(STENCIL * block, STENCIL * (block + 1))
        matrix[rows, 2 * block] = c
        matrix[rows, 2 * block + 1] = sc
        coupling = np.where(right, -sign * slope_jump * sc, 0.0)
        matrix[rows, 0] += coupling
        matrix[rows, 2] += coupling
        rhs[rows] = psi[idx]
    a = np.linalg.lstsq(matrix, rhs, rcond=None)[0]
    psi_b = a[0] + a[2]
    return (KinkFit(b, a[0], a[1], -slope_jump * psi_b, k_left, k_right),
            KinkFit(b, a[2], a[3], slope_jump * psi_b, k_left, k_right))


def check_compatibility(model: PotentialModel, energy: float, config: EngineConfig):
    """Raise if the scheme cannot handle this potential/energy pair."""
    if energy <= model.v_left:
        raise EnergyBelowThresholdError("the incident channel is closed")
    if config.scheme == CONST_VEL_TWO_REGION:
        if energy <= model.v_right:
            raise EnergyBelowThresholdError(
                f"E={energy:.6g} <= V(+inf)={model.v_right:.6g}: no open product channel")
        return
    if not model.symmetric_asymptotes:
        raise IncompatibleSchemeError(
            "scheme", f"{config.scheme} needs V(-inf) == V(+inf); use const_vel_two_region for this potential")
    if config.scheme == CLASSICAL_TRAJ:
        if model.discontinuities:
            raise IncompatibleSchemeError(
                "scheme", "classical trajectories need a continuous potential (p' is singular at a step)")
        top = model.maximum(config.x_left, config.x_right)
        if energy < top + CLASSICAL_MARGIN:
            raise TurningPointError(
                f"classical trajectories need E > max V + {CLASSICAL_MARGIN:g} hartree "
                f"(E={energy:.6g}, max V={top:.6g})")


class LagrangianEngine:
    """Trajectory-grid relaxation for one energy.

    The engine owns its state; :meth:`advance` performs one RK4 step followed
    by injection/discard and the boundary refresh.
    """

    def __init__(self, model: PotentialModel, energy: float, config: EngineConfig | None = None):
        config = config or EngineConfig()
        if config.scheme == CONST_VEL_FIXED:
            raise ConfigError("scheme", "const_vel_fixed runs on the fixed-grid engine")
        check_compatibility(model, energy, config)
        self.model = model
        self.energy = float(energy)
        self.config = config
        self.mass = model.mass
        self.p_left, self.p_right = model.asymptotic_momenta(self.energy)
        self.x_left, self.x_right = config.x_left, config.x_right
        self.spacing = config.spacing
        # time for an inflow sample to cross one spacing
        self.period = self.spacing * self.mass / self.p_left
        if config.commensurate:
            steps = int(np.ceil(self.period / config.dt - 1e-9))
            # an odd count makes the two lattices visit every relative offset
            self.steps_per_period = steps + 1 - steps % 2
            self.dt = self.period / self.steps_per_period
        else:
            self.steps_per_period = 0
            self.dt = config.dt
        self.t = 0.0
        self.steps = 0
        self.extrapolated = 0
        self.regions: list[Region] = []
        interval = max(config.window, int(np.ceil(config.window_time / self.dt - 1e-9)))
        if self.steps_per_period:
            interval = -(-interval // self.steps_per_period) * self.steps_per_period
        self.check_interval = interval
        self._past = deque(maxlen=self.steps_per_period + 1)
        self.initialize()

    # ------------------------------------------------------------------ setup
    @property
    def scheme(self) -> str:
        return self.config.scheme

    @property
    def nodes(self) -> np.ndarray:
        """Uniform reporting grid: the N initial positions on [x_left, x_right]."""
        return np.linspace(self.x_left, self.x_right, self.config.n_points)

    def _lattice(self, lo, hi, h):
        b = self.config.buffer
        k1 = int(np.floor((hi - lo) / h + 1e-9)) + b
        return lo + h * np.arange(-b, k1 + 1)

    def _classical_lattice(self, sign):
        """Positions one period apart along a single discrete trajectory.

        Walking one trajectory with the engine's own RK4 steps from the
        inflow strip gives the lattice that injected samples will occupy
        anyway, so the sample layout repeats exactly after every period.
        """
        b, h = self.config.buffer, self.spacing
        lo, hi = self.x_left - b * h, self.x_right + b * h

        def velocity(_t, x):
            return sign * self.model.classical_momentum(x, self.energy) / self.mass

        x = np.array([lo if sign > 0 else hi])
        points = [x[0]]
        while lo <= points[-1] <= hi:
            for _ in range(self.steps_per_period):
                x = rk4_step(x, velocity, self.dt)
            points.append(x[0])
        points = np.array(points[:-1])
        return points if sign > 0 else points[::-1]

    def initialize(self):
        """Plane-wave right-moving component, zero left-moving component.

        In two-region mode the right-region lattice spacing is scaled by
        p_R/p_L so that both regions take in a new sample at the same cadence.
        """
        cfg = self.config
        pl, e, h = self.p_left, self.energy, self.spacing

        def pair(lo, hi, spacing, psi_plus, kernel, momentum, v_inf=0.0):
            xs = self._lattice(lo, hi, spacing)
            return Region(
                plus=TrajectoryEnsemble(+1, xs.copy(), psi_plus(xs).astype(complex), lo, hi, spacing),
                minus=TrajectoryEnsemble(-1, xs.copy(), np.zeros(xs.size, complex), lo, hi, spacing),
                kernel=kernel, momentum=momentum, v_inf=v_inf)

        if cfg.scheme == CONST_VEL_TWO_REGION:
            x0, pr = cfg.x_divider, self.p_right
            amp = 2.0 * pl / (pl + pr)
            self.regions = [
                pair(self.x_left, x0, h, lambda x: np.exp(1j * pl * x), CONSTANT_VELOCITY, pl),
                pair(x0, self.x_right, h * pr / pl, lambda x: amp * np.exp(1j * (pl * x0 + pr * (x - x0))),
                     PRODUCT_REGION, pr, self.model.v_right),
            ]
        elif cfg.scheme == CLASSICAL_TRAJ:
            if cfg.initial == "wkb":
                def start(x):
                    return wkb_components(self.model, e, x, x_ref=self.x_left)[0]
            else:
                def start(x):
                    return np.exp(1j * pl * x)
            region = pair(self.x_left, self.x_right, h, start, CLASSICAL, pl)
            if self.steps_per_period:
                for e in (region.plus, region.minus):
                    e.x = self._classical_lattice(e.sign)
                    e.psi = start(e.x).astype(complex) if e.sign > 0 else np.zeros(e.x.size, complex)
            self.regions = [region]
        else:
            self.regions = [pair(self.x_left, self.x_right, h, lambda x: np.exp(1j * pl * x),
                                 CONSTANT_VELOCITY, pl)]
        self.t = 0.0
        self.steps = 0
        self._refresh_ghosts()
        self._past.clear()
        self._remember()

    def ensembles(self) -> list[TrajectoryEnsemble]:
        out = []
        for r in self.regions:
            out += [r.plus, r.minus]
        return out

    # --------------------------------------------------------- interpolation
    def _interp(self, x, psi, sign, momentum, query, derivative=False, demodulate=None, kinks=()):
        """Component value (and slope) at ``query`` from samples (x, psi).

        Queries whose five-point window straddles a potential step are
        evaluated from the matching :class:`KinkFit` in ``kinks`` instead.
        """
        if query.size == 0:
            empty = np.zeros(0, complex)
            return (empty, empty) if derivative else empty
        self.extrapolated += int(np.count_nonzero((query < x[0]) | (query > x[-1])))
        out = self._smooth_interp(x, psi, sign, momentum, query, derivative, demodulate)
        if not kinks:
            return out
        start = stencil_start(x, query)
        tol = 1e-9 * self.spacing
        for fit in kinks:
            near = (x[start] < fit.b - tol) & (x[start + STENCIL - 1] > fit.b + tol)
            if not np.any(near):
                continue
            if derivative:
                value, slope = fit(query[near], derivative=True)
                out[0][near], out[1][near] = value, slope
            else:
                out[near] = fit(query[near])
        return out

    def _kink_fits(self, region, xp, pp, xm, pm):
        """(plus, minus) lists of :class:`KinkFit` for steps inside both hulls."""
        plus, minus = [], []
        tol = 1e-9 * self.spacing
        for b in self.model.discontinuities:
            if not (max(xp[0], xm[0]) + 2 * region.plus.spacing < b < min(xp[-1], xm[-1]) - 2 * region.plus.spacing):
                continue
            fp, fm = fit_kink(b, xp, pp, xm, pm, float(self.model.evaluate(b - tol)),
                              float(self.model.evaluate(b + tol)), self.energy, self.mass, region.momentum)
            plus.append(fp)
            minus.append(fm)
        return plus, minus

    def _smooth_interp(self, x, psi, sign, momentum, query, derivative, demodulate):
        if not (self.config.demodulate if demodulate is None else demodulate):
            return mls_interpolate(x, psi, query, derivative=derivative, on_extrapolate="ignore")
        k = sign * momentum
        envelope = psi * np.exp(-1j * k * x)
        carrier = np.exp(1j * k * query)
        if not derivative:
            return carrier * mls_interpolate(x, envelope, query, on_extrapolate="ignore")
        u, du = mls_interpolate(x, envelope, query, derivative=True, on_extrapolate="ignore")
        return carrier * u, carrier * (du + 1j * k * u)

    def _local_state(self, region, x, psi_plus, psi_minus, side=0.0):
        """Kernel inputs at ``x``; ``side`` picks one-sided limits of V.

        At a potential step, V is read a hair to the side of ``x`` given by
        the sign of ``side`` (times the direction of motion), so that an RK4
        step whose path ends or starts exactly on the step sees the value
        on the side it actually travels through.
        """
        if side and self.model.discontinuities:
            x_v = x + side * 1e-9 * self.spacing
        else:
            x_v = x
        v = self.model.evaluate(x_v)
        if region.kernel == CLASSICAL:
            p = self.model.classical_momentum(x, self.energy)
            pprime = -self.mass * self.model.derivative(x) / p
        else:
            p, pprime = region.momentum, 0.0
        return LocalState(psi_plus=psi_plus, psi_minus=psi_minus, energy=self.energy, v=v, x=x,
                          p=p, pprime=pprime, mass=self.mass)

    def speed(self, region: Region, x):
        """|dx/dt| of the region's trajectories at ``x``."""
        if region.kernel == CLASSICAL:
            return self.model.classical_momentum(x, self.energy) / self.mass
        return np.full(np.shape(x), region.momentum / self.mass)

    # ------------------------------------------------------------ propagation
    def _pack(self):
        ens = self.ensembles()
        self._sizes = [e.x.size for e in ens]
        return np.concatenate([e.x for e in ens] + [e.psi.view(float) for e in ens])

    def _unpack(self, y):
        sizes = self._sizes
        total = sum(sizes)
        xs, psis = [], []
        i, j = 0, total
        for n in sizes:
            xs.append(y[i:i + n])
            psis.append(y[j:j + 2 * n].view(complex))
            i += n
            j += 2 * n
        return xs, psis

    def _rates(self, t, y):
        xs, psis = self._unpack(y)
        dx, dpsi = [], []
        # first RK4 stage looks ahead along the path, last stage looks back
        dt = getattr(self, "_step_dt", self.dt)
        stage = 1.0 if abs(t - self.t) < 1e-9 * dt else (-1.0 if t > self.t + 0.75 * dt else 0.0)
        for r, region in enumerate(self.regions):
            xp, pp = xs[2 * r], psis[2 * r]
            xm, pm = xs[2 * r + 1], psis[2 * r + 1]
            kp, km = self._kink_fits(region, xp, pp, xm, pm)
            minus_at_plus = self._interp(xm, pm, -1, region.momentum, xp, kinks=km)
            plus_at_minus = self._interp(xp, pp, +1, region.momentum, xm, kinks=kp)
            d_plus, _ = lagrangian_rhs(self._local_state(region, xp, pp, minus_at_plus, stage),
                                       region.kernel, region.v_inf)
            _, d_minus = lagrangian_rhs(self._local_state(region, xm, plus_at_minus, pm, -stage),
                                        region.kernel, region.v_inf)
            dx += [self.speed(region, xp), -self.speed(region, xm)]
            dpsi += [d_plus.view(float), d_minus.view(float)]
        return np.concatenate(dx + dpsi)

    def advance(self, dt: float | None = None):
        """One RK4 step of positions and amplitudes, then boundary bookkeeping."""
        dt = self.dt if dt is None else dt
        self._step_dt = dt
        y = rk4_step(self._pack(), self._rates, dt, self.t)
        xs, psis = self._unpack(y)
        for e, x, psi in zip(self.ensembles(), xs, psis):
            e.x = x.copy()
            e.psi = psi.copy()
        self.t += dt
        self.steps += 1
        self.inject_and_discard()
        self._refresh_ghosts()
        self._remember()

    def _remember(self):
        if self.steps_per_period:
            self._past.append((self.t, [(e.x.copy(), e.psi.copy()) for e in self.ensembles()]))

    @property
    def has_full_period(self) -> bool:
        """True once the states of a whole period back are stored."""
        return bool(self.steps_per_period) and len(self._past) > self.steps_per_period

    def _period_samples(self, r: int):
        """Region ``r``'s samples over the last period, rotated to the current time.

        For a stationary state psi(x, t) = psi(x) exp(-iEt), so the positions
        swept by the lattice during one period fill in the gaps between the
        current samples (spacing ~ h / steps_per_period) without any spatial
        interpolation. Meaningless before the state has relaxed.
        """
        out = []
        for k in (2 * r, 2 * r + 1):
            xs, psis = [], []
            for t, states in list(self._past)[1:]:
                x, psi = states[k]
                xs.append(x)
                psis.append(psi * np.exp(-1j * self.energy * (self.t - t)))
            x, psi = np.concatenate(xs), np.concatenate(psis)
            order = np.argsort(x, kind="stable")
            out.append((x[order], psi[order]))
        return out

    def inject_and_discard(self):
        """Add samples at the inflow strip, drop samples past the outflow strip.

        New samples continue the inflow lattice at one spacing; their values
        are filled by the boundary refresh that follows.
        """
        for e in self.ensembles():
            h = e.spacing
            ghost_width = self.config.buffer * h
            keep_width = (self.config.buffer + 1) * h
            slack = 1e-9 * h
            if e.sign > 0:
                keep = e.x <= e.hi + keep_width + slack
                x, psi = e.x[keep], e.psi[keep]
                n_new = int(np.floor((x[0] - (e.lo - ghost_width)) / h + slack / h))
                if n_new > 0:
                    fresh = x[0] - h * np.arange(n_new, 0, -1)
                    x = np.concatenate([fresh, x])
                    psi = np.concatenate([np.zeros(n_new, complex), psi])
            else:
                keep = e.x >= e.lo - keep_width - slack
                x, psi = e.x[keep], e.psi[keep]
                n_new = int(np.floor(((e.hi + ghost_width) - x[-1]) / h + slack / h))
                if n_new > 0:
                    fresh = x[-1] + h * np.arange(1, n_new + 1)
                    x = np.concatenate([x, fresh])
                    psi = np.concatenate([psi, np.zeros(n_new, complex)])
            e.x, e.psi = x, psi

    def _refresh_ghosts(self):
        first, last = self.regions[0], self.regions[-1]
        g = first.plus.ghosts()
        first.plus.psi[g] = np.exp(1j * (self.p_left * first.plus.x[g] - self.energy * self.t))
        last.minus.psi[last.minus.ghosts()] = 0.0
        if len(self.regions) == 2:
            self.match_at_divider()

    def match_at_divider(self):
        """Fill the ghosts on both sides of the dividing point by step matching.

        Right-region ghosts (x < x0) take the transmitted amplitude and
        left-region ghosts (x > x0) the reflected one, from the two incoming
        components interpolated at the ghost positions.
        """
        left, right = self.regions
        pl, pr = self.p_left, self.p_right
        before = self.extrapolated
        g = right.plus.ghosts()
        xq = right.plus.x[g]
        l_plus = self._interp(left.plus.x, left.plus.psi, +1, pl, xq)
        r_minus = self._interp(right.minus.x, right.minus.psi, -1, pr, xq)
        right.plus.psi[g] = step_match(pl, pr, l_plus, r_minus)[0]
        g = left.minus.ghosts()
        xq = left.minus.x[g]
        l_plus = self._interp(left.plus.x, left.plus.psi, +1, pl, xq)
        r_minus = self._interp(right.minus.x, right.minus.psi, -1, pr, xq)
        left.minus.psi[g] = step_match(pl, pr, l_plus, r_minus)[1]
        if self.extrapolated > before:
            warnings.warn(f"{self.extrapolated - before} divider values extrapolated", ExtrapolationWarning,
                          stacklevel=2)

    # ------------------------------------------------------------ read-outs
    def _region_of(self, x):
        """Region index for each query point (left region owns x <= x0)."""
        if len(self.regions) == 1:
            return np.zeros(np.shape(x), dtype=int)
        return (np.asarray(x) > self.config.x_divider).astype(int)

    has_outer_samples = True

    def partition(self, x):
        """[(mask, region index, kernel, V_inf)] covering the query points."""
        owner = self._region_of(x)
        return [(owner == r, r, reg.kernel, reg.v_inf) for r, reg in enumerate(self.regions)]

    def speed_in_region(self, r: int, x):
        return self.speed(self.regions[r], np.asarray(x, dtype=float))

    def region_bounds(self) -> list[tuple[float, float]]:
        return [(r.lo, r.hi) for r in self.regions]

    def _sources(self, r: int, source: str):
        if source == "period" and self.has_full_period:
            return self._period_samples(r)
        if source not in ("current", "period"):
            raise ValueError(f"unknown sample source {source!r}")
        region = self.regions[r]
        return [(region.plus.x, region.plus.psi), (region.minus.x, region.minus.psi)]

    def sample_region(self, r: int, x, source: str = "current"):
        """(psi_plus, psi_minus) of region ``r``'s decomposition at ``x``.

        ``source="period"`` interpolates the samples of the whole last period
        (see :meth:`_period_samples`) instead of the current ones; it falls
        back to the current samples until a period has been stored.
        """
        region = self.regions[r]
        x = np.atleast_1d(np.asarray(x, dtype=float))
        (xp, pp), (xm, pm) = self._sources(r, source)
        return (self._interp(xp, pp, +1, region.momentum, x),
                self._interp(xm, pm, -1, region.momentum, x))

    def sample(self, x, source: str = "current"):
        """(psi_plus, psi_minus) interpolated at ``x``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        plus = np.zeros(x.size, complex)
        minus = np.zeros(x.size, complex)
        owner = self._region_of(x)
        for r in range(len(self.regions)):
            m = owner == r
            if np.any(m):
                plus[m], minus[m] = self.sample_region(r, x[m], source)
        return plus, minus

    def rates(self, x, region_index: int | None = None, source: str = "current", demodulate=None):
        """Fields and their partial time derivatives at fixed ``x``.

        Returns (psi_plus, psi_minus, dpsi_plus_dt, dpsi_minus_dt): the
        Lagrangian kernel rate minus the advection along the trajectory,
        with slopes from the interpolant. ``source`` as in :meth:`sample_region`;
        ``demodulate`` overrides the configured interpolation mode.
        """
        x = np.atleast_1d(np.asarray(x, dtype=float))
        owner = self._region_of(x) if region_index is None else np.full(x.size, region_index)
        out = [np.zeros(x.size, complex) for _ in range(4)]
        for r, region in enumerate(self.regions):
            m = owner == r
            if not np.any(m):
                continue
            q = x[m]
            (xp, ppsi), (xm, mpsi) = self._sources(r, source)
            pp, dpp = self._interp(xp, ppsi, +1, region.momentum, q, derivative=True, demodulate=demodulate)
            pm, dpm = self._interp(xm, mpsi, -1, region.momentum, q, derivative=True, demodulate=demodulate)
            d_plus, d_minus = eulerian_rhs(self._local_state(region, q, pp, pm), dpp, dpm,
                                           region.kernel, region.v_inf)
            for arr, val in zip(out, (pp, pm, d_plus, d_minus)):
                arr[m] = val
        return tuple(out)

    def edge_values(self):
        """(psi_minus(x_left), psi_plus(x_right))."""
        first, last = self.regions[0], self.regions[-1]
        q_left = np.array([self.x_left])
        q_right = np.array([self.x_right])
        minus = self._interp(first.minus.x, first.minus.psi, -1, first.momentum, q_left, demodulate=True)[0]
        plus = self._interp(last.plus.x, last.plus.psi, +1, last.momentum, q_right, demodulate=True)[0]
        return minus, plus

    def period_residual(self, per_component=False):
        """Stationarity test without spatial derivatives or interpolation.

        After one period every sample occupies the position its predecessor
        held, so for a stationary state psi_now(x) = exp(-iE tau) psi_then(x).
        Returns max |psi_now - exp(-iE tau) psi_then| / (E tau) over samples
        inside the region, an average of |d psi/dt + iE psi| / E over tau.
        ``nan`` before one full period has elapsed, without commensurate steps,
        or while the lattice does not yet repeat itself.
        """
        nan = (float("nan"),) * 2 if per_component else float("nan")
        if not self.has_full_period:
            return nan
        t_then, states = self._past[0]
        tau = self.t - t_then
        rotation = np.exp(-1j * self.energy * tau)
        worst = [0.0, 0.0]
        for e, (x_then, psi_then) in zip(self.ensembles(), states):
            keep = e.active()
            x_now, psi_now = e.x[keep], e.psi[keep]
            j = np.clip(np.searchsorted(x_then, x_now), 1, x_then.size - 1)
            j = np.where(np.abs(x_then[j - 1] - x_now) < np.abs(x_then[j] - x_now), j - 1, j)
            if np.max(np.abs(x_then[j] - x_now), initial=0.0) > 1e-6 * e.spacing:
                return nan
            dev = np.max(np.abs(psi_now - rotation * psi_then[j]), initial=0.0) / (self.energy * tau)
            k = 0 if e.sign > 0 else 1
            worst[k] = max(worst[k], float(dev))
        return tuple(worst) if per_component else max(worst)

    def sample_counts(self) -> list[int]:
        """Samples inside each ensemble's region, in ensemble order."""
        return [e.count for e in self.ensembles()]


def run_to_convergence(model: PotentialModel, energy: float, config: EngineConfig | None = None,
                       raise_on_failure: bool = True):
    """Relax a trajectory-grid state until P_refl and P_trans stop changing.

    Raises
    ------
    NotConvergedError
        If ``t_max`` is reached first; the partial result is attached as
        ``err.result``. Pass ``raise_on_failure=False`` to get it returned.
    """
    from cpwm.relaxation import relax

    return relax(LagrangianEngine(model, energy, config), raise_on_failure=raise_on_failure)
