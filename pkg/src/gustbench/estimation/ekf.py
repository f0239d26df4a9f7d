"""
Euler-angle extended Kalman filter for external force/torque estimation.

State ``[p, v, phi, theta, psi, omega_b, f_ext, eta_ext]``; the wrench is a
Gaussian random walk. The prediction is a forward-Euler step of the rigid
body dynamics with an analytic Jacobian.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from gustbench.dynamics import VehicleParams
from gustbench.errors import GimbalLockError, InnovationSingularError
from gustbench.estimation.common import (
    ATT, FORCE, NX, NZ, TORQUE, WRENCH, FilterInput, Measurement, NoiseConfig,
    WrenchEstimate, symmetrize,
)
from gustbench.rotations import wrap_angle

GIMBAL_GUARD = np.pi / 2 - 0.05
_H = np.hstack([np.eye(NZ), np.zeros((NZ, NX - NZ))])


@dataclass
class EkfState:
    mean: np.ndarray
    cov: np.ndarray

    @classmethod
    def from_measurement(cls, z: Measurement, noise: NoiseConfig) -> "EkfState":
        mean = np.zeros(NX)
        mean[:NZ] = z.euler_vector()
        return cls(mean, noise.initial_covariance())


def _check_gimbal(theta):
    if abs(theta) > GIMBAL_GUARD:
        raise GimbalLockError(f"EKF pitch {theta:.4f} rad too close to pi/2")


def continuous_dynamics(x, u: FilterInput, params: VehicleParams):
    phi, theta, psi = x[6], x[7], x[8]
    om = x[9:12]
    cp, sp = np.cos(phi), np.sin(phi)
    ct, st = np.cos(theta), np.sin(theta)
    cs, ss = np.cos(psi), np.sin(psi)
    tt = st / ct
    zb = np.array([cp * st * cs + sp * ss, cp * st * ss - sp * cs, cp * ct])
    W = np.array([[1.0, sp * tt, cp * tt], [0.0, cp, -sp], [0.0, sp / ct, cp / ct]])
    J = params.J
    xd = np.zeros(NX)
    xd[0:3] = x[3:6]
    xd[3:6] = (u.T_hat * zb + x[12:15]) / params.m + params.g
    xd[6:9] = W @ om
    xd[9:12] = params.J_inv @ (u.eta_prop_hat + x[15:18] - np.cross(om, J @ om))
    return xd


def discrete_step(x, u: FilterInput, dt, params: VehicleParams):
    """Forward-Euler transition ``x + dt * f(x, u)``."""
    return x + dt * continuous_dynamics(x, u, params)


def discrete_jacobian(x, u: FilterInput, dt, params: VehicleParams):
    """Analytic Jacobian of :func:`discrete_step` with respect to ``x``."""
    phi, theta, psi = x[6], x[7], x[8]
    wx, wy, wz = x[9], x[10], x[11]
    om = x[9:12]
    cp, sp = np.cos(phi), np.sin(phi)
    ct, st = np.cos(theta), np.sin(theta)
    cs, ss = np.cos(psi), np.sin(psi)
    tt = st / ct
    Tm = u.T_hat / params.m

    A = np.zeros((NX, NX))
    A[0:3, 3:6] = np.eye(3)
    # d(C e_z)/d(phi, theta, psi)
    A[3:6, 6] = Tm * np.array([-sp * st * cs + cp * ss, -sp * st * ss - cp * cs, -sp * ct])
    A[3:6, 7] = Tm * np.array([cp * ct * cs, cp * ct * ss, -cp * st])
    A[3:6, 8] = Tm * np.array([-cp * st * ss + sp * cs, cp * st * cs + sp * ss, 0.0])
    A[3:6, 12:15] = np.eye(3) / params.m
    # Euler-rate kinematics
    a = sp * wy + cp * wz
    A[6:9, 6] = [tt * (cp * wy - sp * wz), -sp * wy - cp * wz, (cp * wy - sp * wz) / ct]
    A[6:9, 7] = [a / ct**2, 0.0, a * st / ct**2]
    A[6:9, 9:12] = [[1.0, sp * tt, cp * tt], [0.0, cp, -sp], [0.0, sp / ct, cp / ct]]
    # Euler's equation
    J = params.J
    Jw = J @ om
    dgyro = np.array([[0.0, -wz, wy], [wz, 0.0, -wx], [-wy, wx, 0.0]]) @ J - np.array(
        [[0.0, -Jw[2], Jw[1]], [Jw[2], 0.0, -Jw[0]], [-Jw[1], Jw[0], 0.0]]
    )
    A[9:12, 9:12] = -params.J_inv @ dgyro
    A[9:12, 15:18] = params.J_inv
    return np.eye(NX) + dt * A


def ekf_predict(s: EkfState, u: FilterInput, dt: float, noise: NoiseConfig, params: VehicleParams) -> EkfState:
    if not (0.0 < dt <= 0.1):
        raise ValueError(f"dt={dt} outside (0, 0.1] s")
    _check_gimbal(s.mean[7])
    F = discrete_jacobian(s.mean, u, dt, params)
    mean = discrete_step(s.mean, u, dt, params)
    mean[8] = float(wrap_angle(mean[8]))
    cov = symmetrize(F @ s.cov @ F.T + noise.Q * dt)
    return EkfState(mean, cov)


def ekf_update(s: EkfState, z, noise: NoiseConfig) -> EkfState:
    """Kalman correction with ``H = [I_12 0]`` and a Joseph-form covariance."""
    zv = z.euler_vector() if isinstance(z, Measurement) else np.asarray(z, dtype=float)
    if zv.shape != (NZ,):
        raise ValueError("measurement must have 12 components")
    y = zv - s.mean[:NZ]
    y[ATT] = wrap_angle(y[ATT])
    P = s.cov
    S = P[:NZ, :NZ] + noise.R
    try:
        cf = cho_factor(S, check_finite=False)
    except np.linalg.LinAlgError:
        raise InnovationSingularError(float(np.linalg.cond(S))) from None
    K = cho_solve(cf, P[:, :NZ].T, check_finite=False).T
    mean = s.mean + K @ y
    mean[6:9] = wrap_angle(mean[6:9])
    IKH = np.eye(NX) - K @ _H
    cov = IKH @ P @ IKH.T + K @ noise.R @ K.T
    return EkfState(mean, symmetrize(cov))


def wrench_from_ekf(s: EkfState) -> WrenchEstimate:
    return WrenchEstimate(
        s.mean[FORCE].copy(), s.mean[TORQUE].copy(), s.cov[WRENCH, WRENCH].copy()
    )


class EkfEstimator:
    """Predict+update once per call; initializes on the first measurement."""

    name = "ekf"

    def __init__(self, noise: NoiseConfig, params: VehicleParams):
        self.noise = noise
        self.params = params
        self.state: EkfState | None = None

    def step(self, u: FilterInput, z: Measurement, dt: float) -> WrenchEstimate:
        if self.state is None:
            self.state = EkfState.from_measurement(z, self.noise)
        else:
            s = ekf_predict(self.state, u, dt, self.noise, self.params)
            self.state = ekf_update(s, z, self.noise)
        return wrench_from_ekf(self.state)
