"""
Quaternion unscented Kalman filter for external force/torque estimation.

The mean attitude is a unit quaternion; attitude uncertainty lives in a
body-frame error parameterized by scaled Modified Rodrigues Parameters
(``4 * mrp``, which equals the rotation vector to first order, so the
covariance blocks share units with the EKF's Euler-angle blocks).

Mean layout (19): ``[p, v, q(wxyz), omega_b, f_ext, eta_ext]``.
Error/covariance layout (18): ``[dp, dv, da, domega, df, deta]``.
"""

from dataclasses import dataclass

import numpy as np

from gustbench.dynamics import VehicleParams
from gustbench.errors import PSDViolationError
from gustbench.estimation.common import (
    NX, NZ, WRENCH, FilterInput, Measurement, NoiseConfig,
    WrenchEstimate, symmetrize,
)
from gustbench.rotations import (
    mrp_to_quat, quat_conj, quat_mul, quat_normalize, quat_to_mrp, rotvec_to_quat,
)

MRP_SCALE = 4.0
NM = 19
_Q = slice(6, 10)
# mean-vector slices for the additive components
_ADD_MEAN = np.r_[0:6, 10:19]
_ADD_ERR = np.r_[0:6, 9:18]


def err_to_quat(a):
    return mrp_to_quat(np.asarray(a) / MRP_SCALE)


def quat_to_err(dq):
    return MRP_SCALE * quat_to_mrp(dq)


@dataclass
class UkfState:
    mean: np.ndarray
    cov: np.ndarray

    @property
    def q(self):
        return self.mean[_Q]

    @classmethod
    def from_measurement(cls, z: Measurement, noise: NoiseConfig) -> "UkfState":
        mean = np.zeros(NM)
        mean[0:3], mean[3:6] = z.p, z.v
        mean[_Q] = quat_normalize(z.q)
        mean[10:13] = z.omega
        return cls(mean, noise.initial_covariance())


def ukf_weights(n, alpha, beta, kappa):
    lam = alpha**2 * (n + kappa) - n
    wm = np.full(2 * n + 1, 0.5 / (n + lam))
    wc = wm.copy()
    wm[0] = lam / (n + lam)
    wc[0] = wm[0] + 1.0 - alpha**2 + beta
    return wm, wc, np.sqrt(n + lam)


def psd_sqrt(P, tol=1e-9):
    """Symmetric square root ``S`` with ``S @ S.T == P``."""
    P = symmetrize(np.asarray(P, dtype=float))
    w, V = np.linalg.eigh(P)
    floor = -tol * max(1.0, float(np.max(np.abs(w))))
    if w[0] < floor:
        raise PSDViolationError(float(w[0]), 0)
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T


def boxplus(mean, delta):
    """Apply error-state perturbation(s) ``delta`` (..., 18) to ``mean``."""
    delta = np.atleast_2d(delta)
    out = np.empty(delta.shape[:-1] + (NM,))
    out[..., _ADD_MEAN] = mean[_ADD_MEAN] + delta[..., _ADD_ERR]
    out[..., _Q] = quat_mul(mean[_Q], err_to_quat(delta[..., 6:9]))
    return out


def boxminus(points, q_ref):
    """Error-state coordinates of ``points`` relative to the additive origin
    and attitude ``q_ref``."""
    points = np.atleast_2d(points)
    out = np.empty(points.shape[:-1] + (NX,))
    out[..., _ADD_ERR] = points[..., _ADD_MEAN]
    out[..., 6:9] = quat_to_err(quat_mul(quat_conj(q_ref), points[..., _Q]))
    return out


def ukf_sigma_points(mean, cov, alpha=1e-1, beta=2.0, kappa=0.0):
    """Return ``(points, wm, wc)``; points has shape ``(2n+1, 19)``."""
    n = cov.shape[0]
    wm, wc, gamma = ukf_weights(n, alpha, beta, kappa)
    S = gamma * psd_sqrt(cov)
    deltas = np.vstack([np.zeros(n), S.T, -S.T])
    return boxplus(np.asarray(mean, dtype=float), deltas), wm, wc


def unscented_mean_cov(points, wm, wc, q_ref=None):
    """Recombine sigma points about ``q_ref`` (default: the central point)."""
    if q_ref is None:
        q_ref = points[0, _Q]
    e = boxminus(points, q_ref)
    e_mean = wm @ e
    mean = np.empty(NM)
    mean[_ADD_MEAN] = e_mean[_ADD_ERR]
    mean[_Q] = quat_normalize(quat_mul(q_ref, err_to_quat(e_mean[6:9])))
    d = e - e_mean
    cov = (d * wc[:, None]).T @ d
    return mean, symmetrize(cov)


def propagate(points, u: FilterInput, dt, params: VehicleParams):
    """Discrete dynamics for a batch of mean-layout states.

    Translation uses the same forward-Euler step as the EKF; the quaternion
    is advanced with the closed-form exponential for constant body rates.
    """
    x = np.atleast_2d(points)
    out = x.copy()
    q = x[:, _Q]
    om = x[:, 10:13]
    w_, qx, qy, qz = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    zb = np.stack(
        [2 * (qx * qz + w_ * qy), 2 * (qy * qz - w_ * qx), 1 - 2 * (qx * qx + qy * qy)], axis=-1
    )
    out[:, 0:3] += dt * x[:, 3:6]
    out[:, 3:6] += dt * ((u.T_hat * zb + x[:, 13:16]) / params.m + params.g)
    out[:, _Q] = quat_normalize(quat_mul(q, rotvec_to_quat(om * dt)))
    Jw = om @ params.J.T
    out[:, 10:13] += dt * ((u.eta_prop_hat + x[:, 16:19] - np.cross(om, Jw)) @ params.J_inv.T)
    return out


def ukf_predict(s: UkfState, u: FilterInput, dt: float, noise: NoiseConfig, params: VehicleParams) -> UkfState:
    if not (0.0 < dt <= 0.1):
        raise ValueError(f"dt={dt} outside (0, 0.1] s")
    pts, wm, wc = ukf_sigma_points(s.mean, s.cov, noise.alpha, noise.beta, noise.kappa)
    prop = propagate(pts, u, dt, params)
    mean, cov = unscented_mean_cov(prop, wm, wc)
    return UkfState(mean, symmetrize(cov + noise.Q * dt))


def _measure(points, q_ref):
    e = boxminus(points, q_ref)
    return e[:, :NZ]


def ukf_update(s: UkfState, z: Measurement, noise: NoiseConfig) -> UkfState:
    pts, wm, wc = ukf_sigma_points(s.mean, s.cov, noise.alpha, noise.beta, noise.kappa)
    q_ref = s.mean[_Q]
    Z = _measure(pts, q_ref)
    z_mean = wm @ Z
    dZ = Z - z_mean
    dX = boxminus(pts, q_ref) - boxminus(s.mean, q_ref)[0]
    S = (dZ * wc[:, None]).T @ dZ + noise.R
    Pxz = (dX * wc[:, None]).T @ dZ
    zm = np.concatenate([z.p, z.v, quat_to_err(quat_mul(quat_conj(q_ref), z.q)), z.omega])
    K = np.linalg.solve(S, Pxz.T).T
    delta = K @ (zm - z_mean)
    mean = boxplus(s.mean, delta)[0]
    mean[_Q] = quat_normalize(mean[_Q])
    cov = s.cov - K @ S @ K.T
    return UkfState(mean, symmetrize(cov))


def wrench_from_ukf(s: UkfState) -> WrenchEstimate:
    return WrenchEstimate(
        s.mean[13:16].copy(), s.mean[16:19].copy(), s.cov[WRENCH, WRENCH].copy()
    )


class UkfEstimator:
    name = "ukf"

    def __init__(self, noise: NoiseConfig, params: VehicleParams):
        self.noise = noise
        self.params = params
        self.state: UkfState | None = None

    def step(self, u: FilterInput, z: Measurement, dt: float) -> WrenchEstimate:
        if self.state is None:
            self.state = UkfState.from_measurement(z, self.noise)
        else:
            s = ukf_predict(self.state, u, dt, self.noise, self.params)
            self.state = ukf_update(s, z, self.noise)
        return wrench_from_ukf(self.state)

