"""Deterministic multi-blimp swarm simulator.

Subsystems: rigid-body bicopter dynamics with closed-form allocation
(:mod:`blimpsim.dynamics`), the hybrid feedback/feedforward flight
controller (:mod:`blimpsim.control`), color-family camera perception with
log-odds filtering (:mod:`blimpsim.perception`), the four-state autonomy
machine (:mod:`blimpsim.autonomy`), the simulated ground-station radio
(:mod:`blimpsim.comms`), the arena/scheduler (:mod:`blimpsim.world`,
:mod:`blimpsim.rendering`) and the experiment harness
(:mod:`blimpsim.experiments`).
"""

from blimpsim.autonomy import AutonomyConfig, AutonomyState, Mode
from blimpsim.comms import Message, MsgKind, ParamStore, RadioModel, decode, encode
from blimpsim.control import (
    ControlConfig,
    FlightController,
    Gains,
    ManualCommand,
    ServoTarget,
)
from blimpsim.dynamics import (
    ActuatorCommand,
    BlimpParams,
    NonFiniteState,
    RigidState,
    Wrench,
    allocate,
    external_wrench,
    step,
    thrust_wrench,
)
from blimpsim.perception import (
    ColorFamily,
    Detection,
    Frame,
    GoalDetection,
    GoalShape,
    LogOddsGrid,
    PerceptionConfig,
    rgb_to_lab,
    train_color_family,
)
from blimpsim.world import World, WorldConfig

__all__ = [
    "ActuatorCommand",
    "AutonomyConfig",
    "AutonomyState",
    "BlimpParams",
    "ColorFamily",
    "ControlConfig",
    "Detection",
    "FlightController",
    "Frame",
    "Gains",
    "GoalDetection",
    "GoalShape",
    "LogOddsGrid",
    "ManualCommand",
    "Message",
    "Mode",
    "MsgKind",
    "NonFiniteState",
    "ParamStore",
    "PerceptionConfig",
    "RadioModel",
    "RigidState",
    "ServoTarget",
    "World",
    "WorldConfig",
    "Wrench",
    "allocate",
    "decode",
    "encode",
    "external_wrench",
    "rgb_to_lab",
    "step",
    "thrust_wrench",
    "train_color_family",
]

__version__ = "0.1.0"
