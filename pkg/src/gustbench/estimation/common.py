"""Filter inputs, measurements, noise settings and the wrench estimate."""

from dataclasses import dataclass, field

import numpy as np

from gustbench.rotations import quat_to_euler

# index blocks of the 18-dim (error) state
P, V, ATT, OMEGA, FORCE, TORQUE = (
    slice(0, 3),
    slice(3, 6),
    slice(6, 9),
    slice(9, 12),
    slice(12, 15),
    slice(15, 18),
)
WRENCH = slice(12, 18)
NX = 18
NZ = 12

# Synthetic sensor presets (1-sigma). gps is deliberately >= 10x mocap in
# position and >= 5x in attitude.
SENSOR_PRESETS = {
    "mocap": {"p": 0.001, "v": 0.01, "att": np.deg2rad(0.2), "omega": 0.005},
    "gps": {"p": 0.3, "v": 0.02, "att": np.deg2rad(1.0), "omega": 0.02},
}


@dataclass(frozen=True)
class FilterInput:
    T_hat: float
    eta_prop_hat: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        if self.T_hat < 0:
            raise ValueError("T_hat must be non-negative")


@dataclass(frozen=True)
class Measurement:
    """Pose/twist sample from the onboard state estimator."""

    p: np.ndarray
    v: np.ndarray
    q: np.ndarray
    omega: np.ndarray

    def euler_vector(self) -> np.ndarray:
        """12-vector ``[p, v, phi, theta, psi, omega]`` used by the EKF."""
        return np.concatenate([self.p, self.v, quat_to_euler(self.q), self.omega])


@dataclass(frozen=True)
class NoiseConfig:
    """Process intensity ``Q`` (per second, applied as ``Q*dt``) and
    per-sample measurement covariance ``R``."""

    Q: np.ndarray
    R: np.ndarray
    alpha: float = 1e-1
    beta: float = 2.0
    kappa: float = 0.0
    init_force_var: float = 1.0
    init_torque_var: float = 0.1

    def __post_init__(self):
        for name, M, n in (("Q", self.Q, NX), ("R", self.R, NZ)):
            M = np.asarray(M, dtype=float)
            if M.shape != (n, n):
                raise ValueError(f"{name} must be {n}x{n}")
            if not np.allclose(M, M.T) or np.linalg.eigvalsh(M).min() < -1e-12:
                raise ValueError(f"{name} must be symmetric PSD")
            object.__setattr__(self, name, M)
        if not (0 < self.alpha <= 1) or self.beta < 0:
            raise ValueError("UKF scaling requires alpha in (0, 1] and beta >= 0")

    @classmethod
    def from_intensities(
        cls,
        *,
        q_p=1e-6,
        q_v=0.02,
        q_att=1e-4,
        q_omega=0.05,
        q_f=0.05,
        q_eta=1.3e-5,
        sensor="mocap",
        **kwargs,
    ) -> "NoiseConfig":
        q = np.concatenate(
            [np.full(3, q_p), np.full(3, q_v), np.full(3, q_att), np.full(3, q_omega),
             np.full(3, q_f), np.full(3, q_eta)]
        )
        s = SENSOR_PRESETS[sensor] if isinstance(sensor, str) else sensor
        r = np.concatenate(
            [np.full(3, s["p"]), np.full(3, s["v"]), np.full(3, s["att"]), np.full(3, s["omega"])]
        ) ** 2
        return cls(np.diag(q), np.diag(r), **kwargs)

    def initial_covariance(self) -> np.ndarray:
        P0 = np.zeros((NX, NX))
        P0[:NZ, :NZ] = self.R
        P0[FORCE, FORCE] = self.init_force_var * np.eye(3)
        P0[TORQUE, TORQUE] = self.init_torque_var * np.eye(3)
        return P0


@dataclass(frozen=True)
class WrenchEstimate:
    f_ext_hat: np.ndarray
    eta_ext_hat: np.ndarray
    cov_wrench: np.ndarray


def symmetrize(P):
    return 0.5 * (P + P.T)
