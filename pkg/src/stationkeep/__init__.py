"""Station-keeping laboratory for a planar marine craft in a current.

The package simulates the true craft, identifies its unknown hydrodynamic
parameters online from recorded data, and learns an approximately optimal
station-keeping policy with a model-based actor-critic, all checked against
a Riccati oracle for the linearized problem.
"""

from .adp import (ActorState, AdpModel, CostWeights, CriticState,
                  QuadraticBasis)
from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .dynamics import (BodyVelocity, Current, ParameterVector, Pose, State,
                       VehicleParams)
from .riccati import LinearModel, RiccatiSolution, linearize, solve_are
from .sim import CurrentField, NoiseConfig, SimConfig, Trajectory
from .sysid import HistoryStack, IdentifierState

__version__ = "0.1.0"
