"""Low-level quaternion P-D attitude controller and its first-order fit."""

from dataclasses import dataclass, field

import numpy as np

from gustbench.control.pid import AttitudeThrustCmd
from gustbench.dynamics import BodyWrench, VehicleParams, mix_wrench, rk4_flat
from gustbench.rotations import euler_to_quat, quat_conj, quat_mul, quat_to_euler


@dataclass
class AttitudeGains:
    K_q: np.ndarray = field(default_factory=lambda: np.array([2.0, 2.0, 1.0]))
    K_omega: np.ndarray = field(default_factory=lambda: np.array([0.35, 0.35, 0.3]))

    def __post_init__(self):
        self.K_q = np.broadcast_to(np.asarray(self.K_q, dtype=float), (3,)).copy()
        self.K_omega = np.broadcast_to(np.asarray(self.K_omega, dtype=float), (3,)).copy()
        if self.K_q.min() <= 0 or self.K_omega.min() < 0:
            raise ValueError("attitude gains must be positive")


def attitude_torque(q, omega_b, q_ref, gains: AttitudeGains):
    """``eta = 2*K_q*vec(q_err) - K_omega*omega`` with the body-frame error
    ``q_err = q^* ⊗ q_ref`` taken on the short way round."""
    qe = quat_mul(quat_conj(q), q_ref)
    if qe[0] < 0:
        qe = -qe
    return 2.0 * gains.K_q * qe[1:4] - gains.K_omega * np.asarray(omega_b, dtype=float)


def inner_attitude_loop(q, omega_b, cmd: AttitudeThrustCmd, gains: AttitudeGains, params: VehicleParams):
    """Attitude P-D law followed by rotor allocation.

    Returns ``(wrench, rotor_thrusts, saturated)`` where ``wrench`` is what
    the saturated rotors actually produce.
    """
    eta = attitude_torque(q, omega_b, cmd.q_ref, gains)
    f, sat = mix_wrench(BodyWrench(max(cmd.T_ref, 0.0), eta), params)
    w = params.allocation @ f
    return BodyWrench(float(w[0]), w[1:4]), f, sat


def attitude_step_response(axis: int, step: float, gains: AttitudeGains, params: VehicleParams,
                           duration=1.5, dt=1e-3):
    """Closed-loop response of one Euler angle to a reference step, hovering."""
    e = np.zeros(3)
    e[axis] = step
    cmd = AttitudeThrustCmd(params.hover_thrust, euler_to_quat(e))
    y = np.zeros(13)
    y[6] = 1.0
    n = int(round(duration / dt))
    t = np.arange(n + 1) * dt
    out = np.zeros(n + 1)
    zero = np.zeros(3)
    for k in range(n):
        w, _, _ = inner_attitude_loop(y[6:10], y[10:13], cmd, gains, params)
        y = rk4_flat(y, w.T, w.eta_prop, zero, zero, params, dt)
        out[k + 1] = quat_to_euler(y[6:10], check=False)[axis]
    return t, out


def fit_first_order(t, y, step):
    """Least-squares fit of ``k*step*(1 - exp(-t/tau))``; returns ``(k, tau)``."""
    from scipy.optimize import curve_fit

    model = lambda tt, k, tau: k * step * (1.0 - np.exp(-tt / tau))
    (k, tau), _ = curve_fit(model, t, y, p0=(1.0, 0.2), bounds=([0.1, 1e-3], [2.0, 5.0]))
    return float(k), float(tau)


def identify_attitude_model(gains: AttitudeGains, params: VehicleParams, step=0.1):
    """First-order ``(k_phi, tau_phi, k_theta, tau_theta)`` for the MPC model."""
    res = []
    for axis in (0, 1):
        t, y = attitude_step_response(axis, step, gains, params)
        res.extend(fit_first_order(t, y, step))
    return tuple(res)
