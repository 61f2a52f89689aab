"""Exact 1D scattering states from coupled counter-propagating wave components.

The total stationary wavefunction is split as ``psi = psi_plus + psi_minus``;
the two components are relaxed in time along right- and left-moving
trajectory grids (or on a fixed grid) until they rotate as ``exp(-iEt)``.
Reflection and transmission probabilities are then read off at the edges of
the interaction region.
"""

from cpwm.errors import (
    CFLInstabilityError,
    ConfigError,
    EnergyBelowThresholdError,
    ExtrapolationWarning,
    IncompatibleSchemeError,
    InsufficientPointsError,
    NoOpenChannelError,
    NotConvergedError,
    TurningPointError,
)
from cpwm.units import CM1_PER_HARTREE, cm1_to_hartree, hartree_to_cm1
from cpwm.potentials import (
    DoubleGaussian,
    Eckart,
    PiecewiseConstant,
    PotentialModel,
    SquareBarrier,
    UphillRamp,
    free_potential,
)
from cpwm.lagrangian import EngineConfig, LagrangianEngine, run_to_convergence
from cpwm.eulerian import FixedGridEngine, run_fixed_to_convergence
from cpwm.observables import ScatteringResult

__all__ = [
    "CFLInstabilityError",
    "ConfigError",
    "EnergyBelowThresholdError",
    "ExtrapolationWarning",
    "IncompatibleSchemeError",
    "InsufficientPointsError",
    "NoOpenChannelError",
    "NotConvergedError",
    "TurningPointError",
    "CM1_PER_HARTREE",
    "cm1_to_hartree",
    "hartree_to_cm1",
    "DoubleGaussian",
    "Eckart",
    "PiecewiseConstant",
    "PotentialModel",
    "SquareBarrier",
    "UphillRamp",
    "free_potential",
    "EngineConfig",
    "LagrangianEngine",
    "run_to_convergence",
    "FixedGridEngine",
    "run_fixed_to_convergence",
    "ScatteringResult",
]

__version__ = "0.1.0"
