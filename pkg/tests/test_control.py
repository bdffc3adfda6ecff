import math

import numpy as np
import pytest

from blimpsim.control import (
    ControlConfig,
    FlightController,
    Gains,
    ManualCommand,
    SensorFeedback,
    ServoTarget,
    charge_trigger,
    compose_wrench,
    feedback_from_state,
    pd_accels,
    servo_error,
)
from blimpsim.dynamics import ActuatorCommand, BlimpParams, RigidState, step, thrust_wrench


def trim_feedback(h=2.0, psi=0.0):
    return SensorFeedback(h=h, h_dot=0.0, psi=psi, psi_dot=0.0)


class TestServoError:
    def test_centered_target_zero(self):
        g = Gains()
        t = ServoTarget(c_d=(160.0, 120.0))
        assert servo_error((160.0, 120.0), t, g) == (0.0, 0.0)

    def test_matrix_product_by_hand(self):
        g = Gains(k_px_yaw=0.01, k_px_h=0.002)
        t = ServoTarget(c_d=(140.0, 135.0))  # c_f - c_d = (20, -15)
        e_psi, e_h = servo_error((160.0, 120.0), t, g)
        assert e_psi == pytest.approx(0.2, abs=1e-15)
        assert e_h == pytest.approx(-0.03, abs=1e-15)

    def test_linearity_in_gains(self):
        g1 = Gains(k_px_yaw=0.004, k_px_h=0.003)
        g2 = Gains(k_px_yaw=0.008, k_px_h=0.006)
        t = ServoTarget(c_d=(100.0, 80.0))
        e1 = servo_error((160.0, 120.0), t, g1)
        e2 = servo_error((160.0, 120.0), t, g2)
        assert e2[0] == pytest.approx(2 * e1[0])
        assert e2[1] == pytest.approx(2 * e1[1])

    def test_sign_convention(self):
        g = Gains()
        left_above = ServoTarget(c_d=(100.0, 60.0))
        e_psi, e_h = servo_error((160.0, 120.0), left_above, g)
        assert e_psi > 0  # turn left toward a target left of center
        assert e_h > 0    # climb toward a target above center


class TestPdAccels:
    def test_zero_errors(self):
        assert pd_accels(0, 0, 0, 0, Gains()) == (0.0, 0.0)

    def test_arithmetic(self):
        g = Gains(k=1.0, k_d=0.5)
        rdd_z, _ = pd_accels(0.2, -0.1, 0.0, 0.0, g)
        assert rdd_z == pytest.approx(0.15, abs=1e-15)

    def test_yaw_error_wraps_shortest_way(self):
        # psi_d = +170 deg, psi = -170 deg must give -20 deg, not +340
        from blimpsim.dynamics import wrap_angle
        e = wrap_angle(math.radians(170) - math.radians(-170))
        assert e == pytest.approx(math.radians(-20), abs=1e-12)


class TestComposeWrench:
    def test_equilibrium_zero(self):
        params = BlimpParams.trimmed()
        f_d, tau_d = compose_wrench(
            np.zeros(3), np.zeros(3), 0.0, RigidState.at_rest(), params)
        np.testing.assert_allclose(f_d, 0.0, atol=1e-15)
        np.testing.assert_allclose(tau_d, 0.0, atol=1e-15)

    def test_vertical_acceleration(self):
        params = BlimpParams.trimmed(m=0.13)
        f_d, _ = compose_wrench(
            np.array([0, 0, 0.1]), np.zeros(3), 0.0, RigidState.at_rest(), params)
        np.testing.assert_allclose(f_d, [0.0, 0.0, 0.013], atol=1e-15)

    def test_charge_only(self):
        params = BlimpParams.trimmed()
        f_d, tau_d = compose_wrench(
            np.zeros(3), np.zeros(3), 0.3, RigidState.at_rest(), params)
        np.testing.assert_allclose(f_d, [0.3, 0.0, 0.0], atol=1e-15)
        np.testing.assert_allclose(tau_d, 0.0, atol=1e-15)

    def test_buoyancy_compensation_off_trim(self):
        # heavy blimp: the desired force picks up the weight deficit
        params = BlimpParams(m=0.130, f_b=0.120 * 9.81)
        f_d, _ = compose_wrench(
            np.zeros(3), np.zeros(3), 0.3, RigidState.at_rest(), params)
        assert f_d[0] == pytest.approx(0.3)
        assert f_d[2] == pytest.approx(0.010 * 9.81, abs=1e-12)


class TestChargeTrigger:
    def test_below_threshold(self):
        assert charge_trigger(5, 6, 0.25) == 0.0

    def test_boundary_inclusive(self):
        assert charge_trigger(6, 6, 0.25) == 0.25

    def test_requires_positive_threshold(self):
        with pytest.raises(ValueError):
            charge_trigger(1, 0, 0.25)


class TestFlightController:
    def test_hold_at_trim_zero_command(self):
        params = BlimpParams.trimmed()
        ctl = FlightController(params)
        cmd, sat = ctl.step(trim_feedback())
        assert not sat
        assert cmd.f1 == 0.0 and cmd.f2 == 0.0
        assert cmd.alpha1 == 0.0 and cmd.alpha2 == 0.0

    def test_scalar_path_matches_compose_wrench(self):
        params = BlimpParams.trimmed()
        ctl = FlightController(params)
        rng = np.random.default_rng(9)
        for _ in range(100):
            fb = SensorFeedback(
                h=rng.uniform(0, 5), h_dot=rng.uniform(-1, 1),
                psi=rng.uniform(-3, 3), psi_dot=rng.uniform(-1, 1),
                phi=rng.uniform(-0.3, 0.3), theta=rng.uniform(-0.3, 0.3),
                omega=rng.uniform(-1, 1, 3))
            ctl.reset()
            ctl.h_set = fb.h + rng.uniform(-1, 1)
            ctl.psi_set = fb.psi + rng.uniform(-1, 1)
            gains = ctl.config.gains
            e_h = ctl.h_set - fb.h
            from blimpsim.dynamics import allocate, wrap_angle
            e_psi = wrap_angle(ctl.psi_set - fb.psi)
            rdd_z, omegad_z = pd_accels(e_h, -fb.h_dot, e_psi, -fb.psi_dot, gains)
            pseudo = RigidState(np.zeros(3), np.array([fb.phi, fb.theta, fb.psi]),
                                np.zeros(3), fb.omega)
            f_d, tau_d = compose_wrench((0, 0, rdd_z), (0, 0, omegad_z), 0.13,
                                        pseudo, params)
            ref, _ = allocate(float(f_d[0]), float(f_d[2]), float(tau_d[2]), params)
            got, _ = ctl.step(fb, forward=0.13)
            assert got.f1 == pytest.approx(ref.f1, rel=1e-13, abs=1e-16)
            assert got.f2 == pytest.approx(ref.f2, rel=1e-13, abs=1e-16)
            assert got.alpha1 == pytest.approx(ref.alpha1, rel=1e-13, abs=1e-16)
            assert got.alpha2 == pytest.approx(ref.alpha2, rel=1e-13, abs=1e-16)

    def test_target_above_left_climbs_and_turns(self):
        params = BlimpParams.trimmed()
        ctl = FlightController(params)
        target = ServoTarget(c_d=(100.0, 60.0), kind="balloon", n=2)
        cmd, _ = ctl.step(trim_feedback(), target=target, forward=0.1)
        assert cmd.alpha1 > 0 and cmd.alpha2 > 0          # climbing
        assert cmd.f1 != cmd.f2                           # turning
        assert cmd.f1 > cmd.f2                            # left turn: tau_z > 0

    def test_manual_forward_symmetric(self):
        params = BlimpParams.trimmed()
        ctl = FlightController(params)
        cmd, sat = ctl.step(trim_feedback(), manual=ManualCommand(forward=1.0))
        assert not sat
        assert cmd.f1 == cmd.f2 > 0
        assert cmd.alpha1 == pytest.approx(0.0, abs=1e-15)

    def test_charge_flag_uses_charge_accel(self):
        params = BlimpParams.trimmed()
        ctl = FlightController(params, ControlConfig(charge_accel=0.25))
        cmd, _ = ctl.step(trim_feedback(), charge=True)
        w = thrust_wrench(cmd, params)
        assert w.f[0] == pytest.approx(0.25, abs=1e-12)

    def test_centered_target_equals_hold_exactly(self):
        params = BlimpParams.trimmed()
        fb = trim_feedback(h=1.5, psi=0.3)

        hold = FlightController(params)
        hold.h_set, hold.psi_set = fb.h, fb.psi
        cmd_hold, _ = hold.step(fb)

        servo = FlightController(params)
        target = ServoTarget(c_d=(160.0, 120.0), n=1)
        cmd_servo, _ = servo.step(fb, target=target)
        assert cmd_servo == cmd_hold

    def test_k_scaling_preserves_actuator_signs(self):
        params = BlimpParams.trimmed()
        fb = trim_feedback()
        target = ServoTarget(c_d=(90.0, 70.0), n=3)
        for c in (0.5, 1.0, 2.0, 5.0):
            g = Gains(k_px_yaw=0.005 * c, k_px_h=0.008 * c)
            ctl = FlightController(params, ControlConfig(gains=g))
            cmd, _ = ctl.step(fb, target=target)
            assert math.copysign(1, cmd.f1 - cmd.f2) == 1.0
            assert cmd.alpha1 > 0 and cmd.alpha2 > 0

    def test_rejects_target_and_manual(self):
        ctl = FlightController(BlimpParams.trimmed())
        with pytest.raises(ValueError):
            ctl.step(trim_feedback(), target=ServoTarget(c_d=(0, 0)),
                     manual=ManualCommand())

    def test_yaw_error_bounded_by_pi(self):
        from blimpsim.dynamics import wrap_angle
        rng = np.random.default_rng(4)
        for _ in range(1000):
            e = wrap_angle(rng.uniform(-10, 10) - rng.uniform(-10, 10))
            assert -math.pi < e <= math.pi


class TestClosedLoopHeight:
    def test_height_step_settles(self):
        # 0.5 m step with the default gains: within 2% in < 30 s, bounded 120 s
        params = BlimpParams.trimmed()
        ctl = FlightController(params)
        st = RigidState.at_rest(r=(0.0, 0.0, 2.0))
        ctl.h_set = 2.5
        ctl.psi_set = 0.0
        dt = 0.005
        settled_at = None
        wind = np.zeros(3)
        for i in range(int(120.0 / dt)):
            fb = feedback_from_state(st)
            cmd, _ = ctl.step(fb)
            st = step(st, cmd, wind, params, dt)
            t = (i + 1) * dt
            err = abs(st.r[2] - 2.5)
            if settled_at is None and err <= 0.01:
                settled_at = t
            elif settled_at is not None and err > 0.01:
                settled_at = None  # left the band again
            assert abs(st.r[2]) < 10.0  # bounded
        assert settled_at is not None and settled_at < 30.0

    def test_yaw_step_settles(self):
        params = BlimpParams.trimmed()
        ctl = FlightController(params)
        st = RigidState.at_rest(r=(0.0, 0.0, 2.0))
        ctl.h_set = 2.0
        ctl.psi_set = math.radians(90.0)
        dt = 0.005
        for i in range(int(40.0 / dt)):
            fb = feedback_from_state(st)
            cmd, _ = ctl.step(fb)
            st = step(st, cmd, np.zeros(3), params, dt)
        assert abs(st.euler[2] - math.radians(90.0)) < math.radians(2.0)


class TestFeedbackFromState:
    def test_reads_height_and_heading(self):
        st = RigidState.at_rest(r=(1.0, 2.0, 3.0), yaw=0.4)
        fb = feedback_from_state(st)
        assert fb.h == 3.0
        assert fb.psi == pytest.approx(0.4)
        assert fb.h_dot == 0.0

    def test_psi_dot_from_body_rates(self):
        st = RigidState.at_rest()
        st.omega = np.array([0.0, 0.0, 0.7])
        fb = feedback_from_state(st)
        assert fb.psi_dot == pytest.approx(0.7)
