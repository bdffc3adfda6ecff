"""Per-blimp four-state autonomy machine.

States: Manual (operator-driven, entered and exited only by central
command), RandomWalk (timed forward motion on a random heading),
MoveToGoal (visual servoing toward the current objective) and
PassThroughGoal (committed charge at a close target).

The objective is a balloon until a capture flips ``carrying``, then the
goal hoops until a delivery flips it back; this sequencing is what turns
the two detectors into a pickup-and-delivery loop.  Transitions are
evaluated at the perception cadence, and capture/delivery events arrive
out-of-band from the world.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from blimpsim.control import ManualCommand, ServoTarget, charge_trigger
from blimpsim.perception import Detection, GoalDetection


class Mode(enum.Enum):
    MANUAL = "Manual"
    RANDOM_WALK = "RandomWalk"
    MOVE_TO_GOAL = "MoveToGoal"
    PASS_THROUGH_GOAL = "PassThroughGoal"


@dataclass
class AutonomyConfig:
    """Transition thresholds and walk/cruise tuning (all central-tunable)."""

    n_persist: int = 3           # consecutive detections to lock on
    loss_timeout: float = 2.0    # s without detection before giving up
    charge_timeout: float = 5.0  # s of committed charge
    walk_min: float = 4.0        # random-walk leg duration bounds, s
    walk_max: float = 8.0
    charge_cells: int = 6        # balloon cluster size that triggers a charge
    charge_px: int = 1200        # goal blob size that triggers a charge
    cruise_accel: float = 0.08   # forward feedforward while walking/servoing
    cruise_height: float = 2.0   # held altitude while walking, m


@dataclass
class AutonomyState:
    mode: Mode = Mode.RANDOM_WALK
    carrying: bool = False
    rw_heading: float = 0.0
    rw_deadline: float = -1.0
    persist_count: int = 0
    last_valid_t: float = 0.0
    ptg_entered_t: float = 0.0
    last_manual: ManualCommand | None = None

    @property
    def objective(self) -> str:
        return "goal" if self.carrying else "balloon"


@dataclass
class BehaviorCommand:
    """Desired motion handed to the flight controller.

    Exactly one of ``target`` / ``manual`` / ``hold`` is active; ``heading``
    and ``height`` ride along with hold to steer the random walk, and
    ``forward``/``charge`` carry the feedforward request.
    """

    target: ServoTarget | None = None
    manual: ManualCommand | None = None
    hold: bool = False
    heading: float | None = None
    height: float | None = None
    forward: float = 0.0
    charge: bool = False

    def __post_init__(self):
        active = sum((self.target is not None, self.manual is not None, self.hold))
        if active != 1:
            raise ValueError("exactly one of target/manual/hold must be active")


def _objective_detection(state: AutonomyState, det_balloon: Detection,
                         det_goal: GoalDetection):
    return det_goal if state.carrying else det_balloon


def _objective_size_threshold(state: AutonomyState, cfg: AutonomyConfig) -> int:
    return cfg.charge_px if state.carrying else cfg.charge_cells


def _detection_size(det) -> int:
    return det.n_g if isinstance(det, GoalDetection) else det.n_b


def transition(state: AutonomyState, det_balloon: Detection,
               det_goal: GoalDetection, now: float,
               central: Mode | None = None,
               cfg: AutonomyConfig | None = None) -> AutonomyState:
    """Advance the state machine one perception frame.

    A central command overrides everything (it is the only way in or out
    of Manual).  Otherwise: RandomWalk locks on after ``n_persist``
    consecutive detections of the current objective; MoveToGoal commits to
    a charge once the objective looks close, or abandons after
    ``loss_timeout`` without detection; PassThroughGoal expires after
    ``charge_timeout`` (capture/delivery events end it early, see
    :func:`apply_capture` / :func:`apply_delivery`).
    """
    cfg = cfg or AutonomyConfig()
    if central is not None:
        if state.mode is not central:
            state.mode = central
            state.persist_count = 0
            if central is Mode.RANDOM_WALK:
                state.rw_deadline = -1.0
            if central is Mode.PASS_THROUGH_GOAL:
                state.ptg_entered_t = now
            if central is Mode.MOVE_TO_GOAL:
                state.last_valid_t = now
        return state

    det = _objective_detection(state, det_balloon, det_goal)

    if state.mode is Mode.MANUAL:
        return state

    if state.mode is Mode.RANDOM_WALK:
        state.persist_count = state.persist_count + 1 if det.valid else 0
        if state.persist_count >= cfg.n_persist:
            state.mode = Mode.MOVE_TO_GOAL
            state.persist_count = 0
            state.last_valid_t = now
        return state

    if state.mode is Mode.MOVE_TO_GOAL:
        if det.valid:
            state.last_valid_t = now
            if _detection_size(det) >= _objective_size_threshold(state, cfg):
                state.mode = Mode.PASS_THROUGH_GOAL
                state.ptg_entered_t = now
        elif now - state.last_valid_t > cfg.loss_timeout:
            state.mode = Mode.RANDOM_WALK
            state.rw_deadline = -1.0
        return state

    # PassThroughGoal: commit until timeout (detection loss does not abort)
    if now - state.ptg_entered_t > cfg.charge_timeout:
        state.mode = Mode.RANDOM_WALK
        state.rw_deadline = -1.0
    return state


def apply_capture(state: AutonomyState):
    """World-reported capture: start carrying and drop back to search."""
    state.carrying = True
    state.persist_count = 0
    if state.mode is not Mode.MANUAL:
        state.mode = Mode.RANDOM_WALK
        state.rw_deadline = -1.0


def apply_delivery(state: AutonomyState):
    """World-reported delivery: payload released, resume balloon search."""
    state.carrying = False
    state.persist_count = 0
    if state.mode is not Mode.MANUAL:
        state.mode = Mode.RANDOM_WALK
        state.rw_deadline = -1.0


def behavior(state: AutonomyState, det, now: float,
             rng: np.random.Generator,
             cfg: AutonomyConfig | None = None) -> BehaviorCommand:
    """Produce the motion command for the current mode.

    ``det`` is the current objective's detection.  RandomWalk redraws its
    heading/duration from ``rng`` whenever the leg expires, which makes
    the walk reproducible under a seeded generator.
    """
    cfg = cfg or AutonomyConfig()
    if state.mode is Mode.MANUAL:
        if state.last_manual is None:
            return BehaviorCommand(hold=True)
        return BehaviorCommand(manual=state.last_manual)

    if state.mode is Mode.RANDOM_WALK:
        if now >= state.rw_deadline or state.rw_deadline < 0:
            u = rng.random()
            state.rw_heading = -math.pi + 2.0 * math.pi * (1.0 - u)  # (-pi, pi]
            state.rw_deadline = now + rng.uniform(cfg.walk_min, cfg.walk_max)
        return BehaviorCommand(hold=True, heading=state.rw_heading,
                               height=cfg.cruise_height, forward=cfg.cruise_accel)

    kind = state.objective
    if state.mode is Mode.MOVE_TO_GOAL:
        if det is not None and det.valid:
            c = det.c_g if isinstance(det, GoalDetection) else det.c_b
            n = _detection_size(det)
            charging = charge_trigger(
                n, _objective_size_threshold(state, cfg), 1.0) > 0.0
            return BehaviorCommand(target=ServoTarget(c_d=c, kind=kind, n=n),
                                   forward=cfg.cruise_accel, charge=charging)
        return BehaviorCommand(hold=True, forward=cfg.cruise_accel)

    # PassThroughGoal: keep servoing if the target is visible, charge always
    if det is not None and det.valid:
        c = det.c_g if isinstance(det, GoalDetection) else det.c_b
        return BehaviorCommand(
            target=ServoTarget(c_d=c, kind=kind, n=_detection_size(det)),
            charge=True)
    return BehaviorCommand(hold=True, charge=True)
