"""Rigid-body model of a buoyancy-supported bicopter vehicle.

The vehicle is a spherical envelope with two tiltable servo-rotor stacks
mounted on a lateral arm below the center of mass, at body-frame positions
p1 = [0, -d, l_b] and p2 = [0, d, l_b].  Each stack produces a thrust f_i
along [cos(a_i), 0, sin(a_i)] in the body frame, so no lateral (y) force is
ever available; yaw comes from the thrust differential and climb from tilt.

World frame {W}: x north, z up.  Body frame {B}: x forward, z up, origin at
the COM.  Orientation is stored as ZYX (yaw-pitch-roll) Euler angles; the
vehicle is passively stable in roll and pitch, so gimbal lock is treated as
a runtime fault rather than a reachable configuration.

Newton-Euler with first-order (low Reynolds) drag:

    m r''     = R f + f_e - D_f (r' - wind)
    J w' + w x J w = tau + tau_e - D_tau w

where f_e = [0, 0, f_b - m g] is the net buoyancy/gravity force in {W} and
tau_e is the righting torque from the buoyancy center sitting a distance
l = -l_b above the COM, expressed in the body frame where the rotational
equation lives:

    tau_e = [0, 0, l] x (R^T [0, 0, f_b]) = l f_b [-ct sf, -st, 0]

Integration is semi-implicit Euler with a fixed evaluation order so that
identical inputs produce bit-identical trajectories on any platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

GRAVITY = 9.81

PITCH_LIMIT = math.radians(60.0)


class NonFiniteState(RuntimeError):
    """Integration produced a non-finite or out-of-envelope state."""


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = math.fmod(a, 2.0 * math.pi)
    if a > math.pi:
        a -= 2.0 * math.pi
    elif a <= -math.pi:
        a += 2.0 * math.pi
    return a


def rotation_matrix(euler) -> np.ndarray:
    """ZYX rotation matrix R = Rz(psi) @ Ry(theta) @ Rx(phi), body -> world."""
    phi, theta, psi = float(euler[0]), float(euler[1]), float(euler[2])
    cf, sf = math.cos(phi), math.sin(phi)
    ct, st = math.cos(theta), math.sin(theta)
    cp, sp = math.cos(psi), math.sin(psi)
    return np.array(
        [
            [cp * ct, cp * st * sf - sp * cf, cp * st * cf + sp * sf],
            [sp * ct, sp * st * sf + cp * cf, sp * st * cf - cp * sf],
            [-st, ct * sf, ct * cf],
        ]
    )


@dataclass(frozen=True)
class BlimpParams:
    """Physical constants of one blimp.

    ``J``, ``d_f`` and ``d_tau`` hold the diagonals of the (diagonal)
    inertia, translational drag and rotational drag matrices.  ``l_b`` is
    the signed z-offset of the rotor arm below the COM (negative = below);
    the buoyancy center is assumed to sit at -l_b above the COM.
    """

    m: float = 0.130
    J: np.ndarray = field(default_factory=lambda: np.array([8e-3, 8e-3, 8e-3]))
    d_f: np.ndarray = field(default_factory=lambda: np.array([0.08, 0.10, 0.10]))
    d_tau: np.ndarray = field(default_factory=lambda: np.array([0.04, 0.04, 0.012]))
    f_b: float = 0.130 * GRAVITY
    g: float = GRAVITY
    d: float = 0.35
    l_b: float = -0.45
    f_max: float = 0.343
    alpha_range: tuple[float, float] = (-math.pi / 2.0, math.pi / 2.0)

    def __post_init__(self):
        object.__setattr__(self, "J", np.asarray(self.J, dtype=float))
        object.__setattr__(self, "d_f", np.asarray(self.d_f, dtype=float))
        object.__setattr__(self, "d_tau", np.asarray(self.d_tau, dtype=float))
        if not self.m > 0:
            raise ValueError("mass must be positive")
        for name in ("J", "d_f", "d_tau"):
            v = getattr(self, name)
            if v.shape != (3,) or not np.all(v > 0):
                raise ValueError(f"{name} must be 3 positive diagonal entries")
        if not self.d > 0:
            raise ValueError("rotor offset d must be positive")
        if not self.f_max > 0:
            raise ValueError("f_max must be positive")
        # flat scalar view used by the 200 Hz integration path
        object.__setattr__(
            self, "_c",
            (self.m, *self.J.tolist(), *self.d_f.tolist(), *self.d_tau.tolist(),
             self.f_b, self.g, self.d, self.l_b),
        )

    @classmethod
    def trimmed(cls, **kwargs) -> "BlimpParams":
        """Params ballasted to neutral buoyancy (f_b = m g)."""
        p = cls(**kwargs)
        if "f_b" not in kwargs:
            p = BlimpParams(**{**_params_dict(p), "f_b": p.m * p.g})
        return p


def _params_dict(p: BlimpParams) -> dict:
    return {
        "m": p.m, "J": p.J, "d_f": p.d_f, "d_tau": p.d_tau, "f_b": p.f_b,
        "g": p.g, "d": p.d, "l_b": p.l_b, "f_max": p.f_max,
        "alpha_range": p.alpha_range,
    }


@dataclass
class RigidState:
    """Pose and twist: world position/velocity, ZYX Euler angles, body rates."""

    r: np.ndarray
    euler: np.ndarray
    v: np.ndarray
    omega: np.ndarray

    @classmethod
    def at_rest(cls, r=(0.0, 0.0, 0.0), yaw: float = 0.0) -> "RigidState":
        return cls(
            r=np.array(r, dtype=float),
            euler=np.array([0.0, 0.0, yaw], dtype=float),
            v=np.zeros(3),
            omega=np.zeros(3),
        )

    def copy(self) -> "RigidState":
        return RigidState(self.r.copy(), self.euler.copy(), self.v.copy(),
                          self.omega.copy())

    @property
    def R(self) -> np.ndarray:
        return rotation_matrix(self.euler)


@dataclass(frozen=True)
class ActuatorCommand:
    """Rotor thrusts (N) and servo tilt angles (rad, from x_B toward z_B)."""

    f1: float = 0.0
    f2: float = 0.0
    alpha1: float = 0.0
    alpha2: float = 0.0


@dataclass(frozen=True)
class Wrench:
    """Force/torque pair with an explicit frame tag.

    Frames: ``body`` (both in {B}), ``world`` (both in {W}) and ``mixed``
    (force in {W}, torque in {B} -- the convention of the external
    buoyancy/gravity wrench as it enters the equations of motion).
    """

    f: np.ndarray
    tau: np.ndarray
    frame: str = "body"

    def __post_init__(self):
        if self.frame not in ("body", "world", "mixed"):
            raise ValueError(f"unknown wrench frame {self.frame!r}")

    def __add__(self, other: "Wrench") -> "Wrench":
        if self.frame != other.frame:
            raise ValueError(
                f"cannot add wrench in frame {other.frame!r} to {self.frame!r}")
        return Wrench(self.f + other.f, self.tau + other.tau, self.frame)


def thrust_wrench(cmd: ActuatorCommand, params: BlimpParams) -> Wrench:
    """Net body-frame force and torque produced by the two rotor stacks.

    f   = sum_i f_i [cos a_i, 0, sin a_i]
    tau = sum_i f_i (p_i x [cos a_i, 0, sin a_i]),  p_i = [0, -+d, l_b]

    The y-component of the force is structurally zero.
    """
    c1, s1 = math.cos(cmd.alpha1), math.sin(cmd.alpha1)
    c2, s2 = math.cos(cmd.alpha2), math.sin(cmd.alpha2)
    f1x, f1z = cmd.f1 * c1, cmd.f1 * s1
    f2x, f2z = cmd.f2 * c2, cmd.f2 * s2
    d, l_b = params.d, params.l_b
    f = np.array([f1x + f2x, 0.0, f1z + f2z])
    tau = np.array(
        [
            d * (f2z - f1z),
            l_b * (f1x + f2x),
            d * (f1x - f2x),
        ]
    )
    return Wrench(f, tau, "body")


def external_wrench(state: RigidState, params: BlimpParams) -> Wrench:
    """Buoyancy + gravity wrench: world-frame force, body-frame torque.

    The buoyancy center sits at [0, 0, l] in {B} with l = -l_b; the buoyant
    force f_b z_W acting there rights the hull.  The torque is resolved in
    the body frame (where the rotational equation lives):

        tau_e = [0, 0, l] x (R^T [0, 0, f_b]) = l f_b [-ct sf, -st, 0]

    which is yaw-invariant, as a pendulum restoring torque must be.
    """
    f_e = np.array([0.0, 0.0, params.f_b - params.m * params.g])
    l = -params.l_b
    phi, theta = float(state.euler[0]), float(state.euler[1])
    k = l * params.f_b
    tau_e = np.array([-k * math.cos(theta) * math.sin(phi),
                      -k * math.sin(theta), 0.0])
    return Wrench(f_e, tau_e, "mixed")


def allocate(f_x: float, f_z: float, tau_z: float, params: BlimpParams,
             tau_x: float = 0.0) -> tuple[ActuatorCommand, bool]:
    """Closed-form actuator allocation for a desired (f_x, f_z, tau_z).

    Splits the body wrench across the two stacks,

        f_1x = (f_x + tau_z / d) / 2      f_2x = (f_x - tau_z / d) / 2
        f_1z = (f_z - tau_x / d) / 2      f_2z = (f_z + tau_x / d) / 2

    then f_i = hypot(f_ix, f_iz), a_i = atan2(f_iz, f_ix).  The signs are
    chosen so that feeding the result back through :func:`thrust_wrench`
    recovers (f_x, f_z, tau_z) exactly inside the actuator envelope.  tau_x
    is a kept-but-unused slot; the controller never commands it.

    Thrusts are clamped to [0, f_max] and angles to ``alpha_range`` after
    solving; the second return value flags whether any clamp engaged.
    """
    inv_d = 1.0 / params.d
    f1x = 0.5 * (f_x + tau_z * inv_d)
    f2x = 0.5 * (f_x - tau_z * inv_d)
    f1z = 0.5 * (f_z - tau_x * inv_d)
    f2z = 0.5 * (f_z + tau_x * inv_d)
    f1 = math.hypot(f1x, f1z)
    f2 = math.hypot(f2x, f2z)
    a1 = math.atan2(f1z, f1x)
    a2 = math.atan2(f2z, f2x)
    lo, hi = params.alpha_range
    saturated = False
    if f1 > params.f_max:
        f1, saturated = params.f_max, True
    if f2 > params.f_max:
        f2, saturated = params.f_max, True
    if a1 < lo:
        a1, saturated = lo, True
    elif a1 > hi:
        a1, saturated = hi, True
    if a2 < lo:
        a2, saturated = lo, True
    elif a2 > hi:
        a2, saturated = hi, True
    return ActuatorCommand(f1, f2, a1, a2), saturated


def step(state: RigidState, cmd: ActuatorCommand, wind, params: BlimpParams,
         dt: float) -> RigidState:
    """Advance the state by one semi-implicit Euler step of length dt.

    Drag acts on the air-relative velocity (v - wind).  Velocities are
    updated first, then positions/angles use the updated velocities, which
    makes the zero-input neutral-buoyancy equilibrium exact in floating
    point.  Raises :class:`NonFiniteState` if the result blows up or pitch
    leaves the passive-stability envelope (|theta| > 60 deg).
    """
    if not dt > 0:
        raise ValueError("dt must be positive")

    m, jx, jy, jz, dfx, dfy, dfz, dtx, dty, dtz, f_b, g, d, l_b = params._c
    phi, theta, psi = state.euler.tolist()
    cf, sf = math.cos(phi), math.sin(phi)
    ct, st = math.cos(theta), math.sin(theta)
    cp, sp = math.cos(psi), math.sin(psi)

    # rotation matrix entries (ZYX), body -> world
    r00 = cp * ct
    r01 = cp * st * sf - sp * cf
    r02 = cp * st * cf + sp * sf
    r10 = sp * ct
    r11 = sp * st * sf + cp * cf
    r12 = sp * st * cf - cp * sf
    r20 = -st
    r21 = ct * sf
    r22 = ct * cf

    # thrust in body frame
    c1, s1 = math.cos(cmd.alpha1), math.sin(cmd.alpha1)
    c2, s2 = math.cos(cmd.alpha2), math.sin(cmd.alpha2)
    f1x, f1z = cmd.f1 * c1, cmd.f1 * s1
    f2x, f2z = cmd.f2 * c2, cmd.f2 * s2
    fbx = f1x + f2x
    fbz = f1z + f2z
    tbx = d * (f2z - f1z)
    tby = l_b * fbx
    tbz = d * (f1x - f2x)

    # world-frame thrust force (f_by = 0 structurally)
    fwx = r00 * fbx + r02 * fbz
    fwy = r10 * fbx + r12 * fbz
    fwz = r20 * fbx + r22 * fbz

    # buoyancy/gravity force and body-frame righting torque
    fez = f_b - m * g
    k_r = -l_b * f_b
    tex = -k_r * ct * sf
    tey = -k_r * st

    vx, vy, vz = state.v.tolist()
    wx_, wy_, wz_ = float(wind[0]), float(wind[1]), float(wind[2])
    inv_m = 1.0 / m
    ax = (fwx - dfx * (vx - wx_)) * inv_m
    ay = (fwy - dfy * (vy - wy_)) * inv_m
    az = (fwz + fez - dfz * (vz - wz_)) * inv_m

    ox, oy, oz = state.omega.tolist()
    # w x J w
    gyr_x = oy * jz * oz - oz * jy * oy
    gyr_y = oz * jx * ox - ox * jz * oz
    gyr_z = ox * jy * oy - oy * jx * ox
    odx = (tbx + tex - dtx * ox - gyr_x) / jx
    ody = (tby + tey - dty * oy - gyr_y) / jy
    odz = (tbz - dtz * oz - gyr_z) / jz

    # semi-implicit: velocities first, then poses from the new velocities
    vx += dt * ax
    vy += dt * ay
    vz += dt * az
    ox += dt * odx
    oy += dt * ody
    oz += dt * odz

    r0x, r0y, r0z = state.r.tolist()
    rx = r0x + dt * vx
    ry = r0y + dt * vy
    rz = r0z + dt * vz

    # ZYX Euler kinematics at the old attitude
    tt = st / ct
    phi_dot = ox + sf * tt * oy + cf * tt * oz
    theta_dot = cf * oy - sf * oz
    psi_dot = (sf * oy + cf * oz) / ct
    phi = wrap_angle(phi + dt * phi_dot)
    theta = wrap_angle(theta + dt * theta_dot)
    psi = wrap_angle(psi + dt * psi_dot)

    ok = (
        math.isfinite(rx) and math.isfinite(ry) and math.isfinite(rz)
        and math.isfinite(vx) and math.isfinite(vy) and math.isfinite(vz)
        and math.isfinite(ox) and math.isfinite(oy) and math.isfinite(oz)
        and math.isfinite(phi) and math.isfinite(theta) and math.isfinite(psi)
    )
    if not ok:
        raise NonFiniteState("integration produced a non-finite state")
    if abs(theta) > PITCH_LIMIT:
        raise NonFiniteState(
            f"pitch {math.degrees(theta):.1f} deg outside passive-stability envelope")

    return RigidState(
        r=np.array([rx, ry, rz]),
        euler=np.array([phi, theta, psi]),
        v=np.array([vx, vy, vz]),
        omega=np.array([ox, oy, oz]),
    )
