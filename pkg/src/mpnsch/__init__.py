"""Phase-field micropolar two-phase flow with dynamic wetting boundary conditions."""
from .errors import *  # noqa: F401,F403
from .grid import Grid, VelocityField, WallBC
from .potentials import BoundaryKind, BoundaryPotential, PotentialKind, SplitPotential
from .state import MixtureState, PhysParams
from .stepper import StepConfig, StepReport, step

__version__ = "0.1.0"
