"""Disturbance-feedforward PID position controller."""

from dataclasses import dataclass, field

import numpy as np

from gustbench.errors import InfeasibleAttitudeError
from gustbench.rotations import euler_to_quat, quat_normalize


def _vec3(x):
    a = np.asarray(x, dtype=float)
    return np.full(3, float(a)) if a.ndim == 0 else a


@dataclass
class PidConfig:
    k_p: np.ndarray = field(default_factory=lambda: np.array([3.0, 3.0, 8.0]))
    k_d: np.ndarray = field(default_factory=lambda: np.array([3.2, 3.2, 12.0]))
    k_i: np.ndarray = field(default_factory=lambda: np.array([0.8, 0.8, 0.6]))
    integ_limit: np.ndarray = field(default_factory=lambda: np.array([1.0, 1.0, 1.0]))
    a_max: float = 6.0
    tilt_max: float = 0.8

    def __post_init__(self):
        self.k_p = _vec3(self.k_p)
        self.k_d = _vec3(self.k_d)
        self.k_i = _vec3(self.k_i)
        self.integ_limit = _vec3(self.integ_limit)
        if min(self.k_p.min(), self.k_d.min(), self.k_i.min()) < 0:
            raise ValueError("PID gains must be non-negative")
        if self.integ_limit.min() <= 0:
            raise ValueError("integrator limit must be positive")
        if not 0 < self.tilt_max < np.pi / 2:
            raise ValueError("tilt limit must lie in (0, pi/2)")


@dataclass(frozen=True)
class AttitudeThrustCmd:
    T_ref: float
    q_ref: np.ndarray
    # populated by the MPC path only
    euler_ref: np.ndarray | None = None


def pid_step(e_p, e_v, integ, f_ext_hat, cfg: PidConfig, m: float, dt: float = 0.0):
    """One PID evaluation.

    ``a_des = k_p*e_p + k_d*e_v + k_i*integ - f_ext_hat/m``, with the
    integrator advanced by ``e_p*dt`` and clamped first, and ``|a_des|``
    limited to ``a_max`` afterwards. Returns ``(a_des, integ)``.
    """
    e_p = np.asarray(e_p, dtype=float)
    integ = np.clip(np.asarray(integ, dtype=float) + e_p * dt, -cfg.integ_limit, cfg.integ_limit)
    a = cfg.k_p * e_p + cfg.k_d * np.asarray(e_v, dtype=float) + cfg.k_i * integ
    a = a - np.asarray(f_ext_hat, dtype=float) / m
    n = np.linalg.norm(a)
    if n > cfg.a_max:
        a = a * (cfg.a_max / n)
    return a, integ


def accel_to_attitude_thrust(a_des, psi_ref, m, g, T_min=0.0, T_max=np.inf, tilt_max=None) -> AttitudeThrustCmd:
    """Map a desired acceleration to collective thrust and attitude.

    The body z axis is aligned with ``t = m*(a_des - g)`` and the heading is
    fixed by ``psi_ref``. With ``tilt_max`` the horizontal part of ``t`` is
    shortened so the tilt stays within the limit (altitude has priority).
    """
    t = m * (np.asarray(a_des, dtype=float) - np.asarray(g, dtype=float))
    if t[2] <= 0:
        raise InfeasibleAttitudeError(f"desired thrust vector {t} has no upward component")
    if tilt_max is not None:
        h = np.hypot(t[0], t[1])
        h_max = t[2] * np.tan(tilt_max)
        if h > h_max:
            t = np.array([t[0] * h_max / h, t[1] * h_max / h, t[2]])
    T = float(np.linalg.norm(t))
    zb = t / T
    # body x orthogonal to the heading's y axis, so the Z-Y-X yaw is psi_ref
    yc = np.array([-np.sin(psi_ref), np.cos(psi_ref), 0.0])
    xb = np.cross(yc, zb)
    xb /= np.linalg.norm(xb)
    yb = np.cross(zb, xb)
    q = rotmat_to_quat(np.column_stack([xb, yb, zb]))
    return AttitudeThrustCmd(float(np.clip(T, T_min, T_max)), q)


def rotmat_to_quat(R):
    """Rotation matrix to unit quaternion (w >= 0)."""
    tr = np.trace(R)
    if tr > 0:
        s = 2.0 * np.sqrt(tr + 1.0)
        q = [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = 2.0 * np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        q = [(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s]
    elif R[1, 1] > R[2, 2]:
        s = 2.0 * np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2])
        q = [(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s]
    else:
        s = 2.0 * np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1])
        q = [(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s]
    q = quat_normalize(np.array(q))
    return q if q[0] >= 0 else -q


class PidController:
    """Stateful wrapper: integrator plus the attitude/thrust mapping."""

    name = "pid"

    def __init__(self, cfg: PidConfig, m, g, T_min=0.0, T_max=np.inf):
        self.cfg = cfg
        self.m = m
        self.g = np.asarray(g, dtype=float)
        self.T_min = T_min
        self.T_max = T_max
        self.integ = np.zeros(3)

    def step(self, p, v, guidance, f_ext_hat, dt):
        e_p = guidance.p_ref - p
        e_v = guidance.v_ref_vec - v
        a, self.integ = pid_step(e_p, e_v, self.integ, f_ext_hat, self.cfg, self.m, dt)
        cmd = accel_to_attitude_thrust(
            a, guidance.yaw_ref, self.m, self.g, self.T_min, self.T_max, self.cfg.tilt_max
        )
        return cmd, {}


def euler_cmd(T, phi, theta, psi) -> AttitudeThrustCmd:
    e = np.array([phi, theta, psi])
    return AttitudeThrustCmd(float(T), euler_to_quat(e), e)
