import numpy as np
import pytest

from gustbench.control import PidConfig, PidController, accel_to_attitude_thrust, pid_step
from gustbench.errors import InfeasibleAttitudeError
from gustbench.guidance import GuidanceOutput
from gustbench.rotations import quat_to_euler, quat_to_rotmat

M = 0.7
G = np.array([0.0, 0.0, -9.81])


def test_mapping_examples():
    c = accel_to_attitude_thrust(np.zeros(3), 0.0, M, G)
    assert c.T_ref == pytest.approx(6.867)
    np.testing.assert_allclose(c.q_ref, [1, 0, 0, 0], atol=1e-12)
    c = accel_to_attitude_thrust(np.array([0, 0, 2.0]), 0.0, M, G)
    assert c.T_ref == pytest.approx(0.7 * 11.81)
    np.testing.assert_allclose(c.q_ref, [1, 0, 0, 0], atol=1e-12)
    c = accel_to_attitude_thrust(np.array([1.0, 0, 0]), 0.0, M, G)
    assert quat_to_euler(c.q_ref)[1] == pytest.approx(np.arctan2(1, 9.81), abs=1e-12)
    assert c.T_ref == pytest.approx(0.7 * np.hypot(1, 9.81))


def test_mapping_realizes_the_acceleration():
    rng = np.random.default_rng(0)
    for _ in range(50):
        a = rng.uniform(-4, 4, 3)
        psi = rng.uniform(-3, 3)
        c = accel_to_attitude_thrust(a, psi, M, G)
        R = quat_to_rotmat(c.q_ref)
        np.testing.assert_allclose(c.T_ref * R[:, 2] / M + G, a, atol=1e-9)
        assert quat_to_euler(c.q_ref)[2] == pytest.approx(psi, abs=1e-9)


def test_tilt_clamp_keeps_altitude_priority():
    c = accel_to_attitude_thrust(np.array([20.0, 0, 0]), 0.0, M, G, tilt_max=0.5)
    R = quat_to_rotmat(c.q_ref)
    assert np.arccos(R[2, 2]) == pytest.approx(0.5)
    assert c.T_ref * R[2, 2] == pytest.approx(M * 9.81)


def test_inverted_flight_rejected():
    with pytest.raises(InfeasibleAttitudeError):
        accel_to_attitude_thrust(np.array([0, 0, -10.0]), 0.0, M, G)


def test_integrator_clamp():
    cfg = PidConfig(integ_limit=0.2)
    integ = np.zeros(3)
    for _ in range(1000):
        _, integ = pid_step(np.array([1.0, -1.0, 0.5]), np.zeros(3), integ, np.zeros(3), cfg, M, 0.01)
        assert np.all(np.abs(integ) <= 0.2 + 1e-15)
    np.testing.assert_allclose(integ, [0.2, -0.2, 0.2])


def test_feedforward_cancels_disturbance():
    cfg = PidConfig()
    f = np.array([1.4, 0.0, -0.7])
    a, _ = pid_step(np.zeros(3), np.zeros(3), np.zeros(3), f, cfg, M)
    np.testing.assert_allclose(a, -f / M)
    a, _ = pid_step(np.full(3, 100.0), np.zeros(3), np.zeros(3), np.zeros(3), cfg, M)
    assert np.linalg.norm(a) == pytest.approx(cfg.a_max)


def test_integrator_idle_under_perfect_compensation():
    """Point-mass loop with constant wind: the feedforward carries the
    disturbance, so the integrator stays at zero."""
    cfg = PidConfig()
    ctrl = PidController(cfg, M, G)
    out = GuidanceOutput(np.array([0, 0, 1.0]), np.zeros(3), 0.0, True, np.zeros(3))
    f = np.array([2.0, -0.5, 0.3])
    p, v, dt = np.array([0, 0, 1.0]), np.zeros(3), 0.01
    for _ in range(500):
        cmd, _ = ctrl.step(p, v, out, f, dt)
        acc = cmd.T_ref * quat_to_rotmat(cmd.q_ref)[:, 2] / M + G + f / M
        v = v + dt * acc
        p = p + dt * v
    np.testing.assert_allclose(ctrl.integ, 0.0, atol=1e-9)
    np.testing.assert_allclose(p, [0, 0, 1.0], atol=1e-9)


def test_config_validation():
    with pytest.raises(ValueError):
        PidConfig(k_p=-1.0)
    with pytest.raises(ValueError):
        PidConfig(integ_limit=0.0)
    with pytest.raises(ValueError):
        PidConfig(tilt_max=2.0)
