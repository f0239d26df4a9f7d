"""
Quadrotor rigid-body dynamics and actuator maps.

World frame is z-up with gravity ``(0, 0, -9.81)``. Thrust acts along the
body +z axis. The truth integrator is classical RK4 with quaternion
renormalization after every step.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from gustbench.errors import NonFiniteInputError, OutOfCalibrationError
from gustbench.rotations import quat_to_rotmat

GRAVITY = np.array([0.0, 0.0, -9.81])


@dataclass(frozen=True)
class ThrustMapCoeffs:
    """Voltage-scaled quadratic ESC-command-to-thrust map.

    ``f(u, V) = (a*V + b) * (c2*u**2 + c1*u + c0)`` for ``u`` in [0, 1].
    """

    c2: float = 0.840
    c1: float = 2.660
    c0: float = 0.0
    a: float = 0.08
    b: float = 0.112
    v_min: float = 9.9
    v_max: float = 12.6

    def __post_init__(self):
        u = np.linspace(0.0, 1.0, 101)
        for V in np.linspace(self.v_min, self.v_max, 7):
            f = (self.a * V + self.b) * (self.c2 * u**2 + self.c1 * u + self.c0)
            if not np.all(np.diff(f) > 0):
                raise ValueError(f"thrust map not strictly increasing at V={V:.2f}")

    def scale(self, V: float) -> float:
        if not (self.v_min <= V <= self.v_max):
            raise OutOfCalibrationError(
                f"battery voltage {V:.3f} V outside calibrated range "
                f"[{self.v_min}, {self.v_max}] V"
            )
        return self.a * V + self.b


@dataclass(frozen=True)
class VehicleParams:
    m: float = 0.7
    J: np.ndarray = field(default_factory=lambda: np.diag([0.007, 0.007, 0.012]))
    g: np.ndarray = field(default_factory=lambda: GRAVITY.copy())
    arm_length: float = 0.17
    rotor_config: str = "plus"
    drag_to_thrust: float = 0.016
    thrust_map: ThrustMapCoeffs = field(default_factory=ThrustMapCoeffs)
    f_min: float = 0.0
    f_max: float = 3.5

    def __post_init__(self):
        J = np.asarray(self.J, dtype=float)
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "g", np.asarray(self.g, dtype=float))
        if self.m <= 0:
            raise ValueError("mass must be positive")
        if J.shape != (3, 3) or not np.allclose(J, J.T) or np.linalg.eigvalsh(J).min() <= 0:
            raise ValueError("inertia must be a symmetric positive definite 3x3 matrix")
        if not (self.f_max > self.f_min >= 0):
            raise ValueError("rotor limits must satisfy f_max > f_min >= 0")
        if self.rotor_config not in ("plus", "x"):
            raise ValueError(f"unknown rotor_config {self.rotor_config!r}")

    @cached_property
    def J_inv(self) -> np.ndarray:
        return np.linalg.inv(self.J)

    @cached_property
    def hover_thrust(self) -> float:
        return -self.m * float(self.g[2])

    @cached_property
    def rotor_positions(self) -> np.ndarray:
        l = self.arm_length
        if self.rotor_config == "plus":
            # front, left, back, right
            return np.array([[l, 0, 0], [0, l, 0], [-l, 0, 0], [0, -l, 0]], dtype=float)
        d = l / np.sqrt(2.0)
        # front-right, front-left, rear-left, rear-right
        return np.array([[d, -d, 0], [d, d, 0], [-d, d, 0], [-d, -d, 0]], dtype=float)

    @cached_property
    def allocation(self) -> np.ndarray:
        """Matrix mapping rotor thrusts to ``[T, eta_x, eta_y, eta_z]``."""
        r = self.rotor_positions
        spin = np.array([1.0, -1.0, 1.0, -1.0])
        return np.vstack([np.ones(4), r[:, 1], -r[:, 0], spin * self.drag_to_thrust])

    @cached_property
    def allocation_inv(self) -> np.ndarray:
        return np.linalg.inv(self.allocation)


@dataclass
class RigidBodyState:
    p: np.ndarray = field(default_factory=lambda: np.zeros(3))
    v: np.ndarray = field(default_factory=lambda: np.zeros(3))
    q: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))
    omega_b: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        self.q = np.asarray(self.q, dtype=float)
        self.omega_b = np.asarray(self.omega_b, dtype=float)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.p, self.v, self.q, self.omega_b])

    @classmethod
    def from_vector(cls, y) -> "RigidBodyState":
        y = np.asarray(y, dtype=float)
        return cls(y[0:3].copy(), y[3:6].copy(), y[6:10].copy(), y[10:13].copy())

    def copy(self) -> "RigidBodyState":
        return RigidBodyState.from_vector(self.as_vector())


@dataclass
class BodyWrench:
    T: float = 0.0
    eta_prop: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        if self.T < 0:
            raise ValueError("collective thrust must be non-negative")
        self.eta_prop = np.asarray(self.eta_prop, dtype=float)


@dataclass
class RotorCommand:
    u_esc: np.ndarray
    V_batt: float

    def __post_init__(self):
        self.u_esc = np.clip(np.asarray(self.u_esc, dtype=float), 0.0, 1.0)


def esc_to_thrust(u, V, coeffs: ThrustMapCoeffs, f_min=0.0, f_max=np.inf):
    """Single-rotor thrust in N for normalized ESC command(s) ``u``."""
    s = coeffs.scale(V)
    u = np.asarray(u, dtype=float)
    f = s * (coeffs.c2 * u * u + coeffs.c1 * u + coeffs.c0)
    f = np.clip(f, f_min, f_max)
    return float(f) if f.ndim == 0 else f


def thrust_to_esc(f, V, coeffs: ThrustMapCoeffs):
    """Invert the thrust map on its increasing branch.

    Returns ``(u, saturated)``; thrusts outside ``[f(0,V), f(1,V)]`` are
    clamped to the nearest end of the command range.
    """
    s = coeffs.scale(V)
    f = np.asarray(f, dtype=float)
    y = f / s - coeffs.c0
    lo = 0.0
    hi = coeffs.c2 + coeffs.c1
    sat = (y < lo) | (y > hi)
    y = np.clip(y, lo, hi)
    if coeffs.c2 == 0.0:
        u = y / coeffs.c1
    else:
        # cancellation-free form of the larger quadratic root
        u = 2.0 * y / (coeffs.c1 + np.sqrt(coeffs.c1**2 + 4.0 * coeffs.c2 * y))
    u = np.clip(u, 0.0, 1.0)
    if u.ndim == 0:
        return float(u), bool(sat)
    return u, sat


def mix_wrench(wrench: BodyWrench, params: VehicleParams):
    """Allocate a body wrench to rotor thrusts.

    Collective thrust has priority: it is clamped to the feasible range
    first, then the torque part is scaled down uniformly until every rotor
    lies within ``[f_min, f_max]``. Returns ``(f, saturated)``.
    """
    eta = np.asarray(wrench.eta_prop, dtype=float)
    w = np.array([wrench.T, eta[0], eta[1], eta[2]])
    if not np.all(np.isfinite(w)):
        raise NonFiniteInputError("wrench must be finite")
    f = params.allocation_inv @ w
    lo, hi = params.f_min, params.f_max
    if np.all(f >= lo) and np.all(f <= hi):
        return f, False

    T = min(max(wrench.T, 4 * lo), 4 * hi)
    base = np.full(4, T / 4.0)
    delta = params.allocation_inv @ np.array([0.0, eta[0], eta[1], eta[2]])
    scale = 1.0
    for b, d in zip(base, delta):
        if d > 0:
            scale = min(scale, (hi - b) / d)
        elif d < 0:
            scale = min(scale, (lo - b) / d)
    scale = max(scale, 0.0)
    return base + scale * delta, True


def wrench_from_thrusts(f, params: VehicleParams) -> BodyWrench:
    w = params.allocation @ np.asarray(f, dtype=float)
    return BodyWrench(max(float(w[0]), 0.0), w[1:4].copy())


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NonFiniteInputError("non-finite input to dynamics")


def state_derivative(x: RigidBodyState, wrench: BodyWrench, f_ext, eta_ext, params: VehicleParams):
    """Continuous-time derivative ``(p_dot, v_dot, q_dot, omega_dot)``.

    Attitude kinematics use body rates, ``q_dot = 0.5 * q ⊗ [0, omega_b]``.
    """
    f_ext = np.asarray(f_ext, dtype=float)
    eta_ext = np.asarray(eta_ext, dtype=float)
    _check_finite(x.p, x.v, x.q, x.omega_b, f_ext, eta_ext, wrench.eta_prop, [wrench.T])
    if abs(np.linalg.norm(x.q) - 1.0) > 1e-6:
        raise ValueError("attitude quaternion is not unit norm")
    d = _derivative(x.as_vector(), wrench.T, wrench.eta_prop, f_ext, eta_ext, params)
    return d[0:3], d[3:6], d[6:10], d[10:13]


def _derivative(y, T, eta_prop, f_ext, eta_ext, params):
    m = params.m
    J = params.J
    w_, x_, y_, z_ = y[6], y[7], y[8], y[9]
    ox, oy, oz = y[10], y[11], y[12]
    # third column of C_B^W
    zb = np.array([2 * (x_ * z_ + w_ * y_), 2 * (y_ * z_ - w_ * x_), 1 - 2 * (x_ * x_ + y_ * y_)])
    out = np.empty(13)
    out[0:3] = y[3:6]
    out[3:6] = (T * zb + f_ext) / m + params.g
    out[6] = 0.5 * (-x_ * ox - y_ * oy - z_ * oz)
    out[7] = 0.5 * (w_ * ox + y_ * oz - z_ * oy)
    out[8] = 0.5 * (w_ * oy - x_ * oz + z_ * ox)
    out[9] = 0.5 * (w_ * oz + x_ * oy - y_ * ox)
    om = y[10:13]
    out[10:13] = params.J_inv @ (eta_prop + eta_ext - np.cross(om, J @ om))
    return out


def integrate_rk4(x: RigidBodyState, wrench: BodyWrench, f_ext, eta_ext, params: VehicleParams, dt: float):
    """One RK4 step of the truth dynamics with inputs held constant."""
    if not (0.0 < dt <= 0.01):
        raise ValueError(f"dt={dt} outside (0, 0.01] s")
    f_ext = np.asarray(f_ext, dtype=float)
    eta_ext = np.asarray(eta_ext, dtype=float)
    y = rk4_flat(x.as_vector(), wrench.T, np.asarray(wrench.eta_prop, float), f_ext, eta_ext, params, dt)
    return RigidBodyState.from_vector(y)


def rk4_flat(y, T, eta_prop, f_ext, eta_ext, params, dt):
    k1 = _derivative(y, T, eta_prop, f_ext, eta_ext, params)
    k2 = _derivative(y + 0.5 * dt * k1, T, eta_prop, f_ext, eta_ext, params)
    k3 = _derivative(y + 0.5 * dt * k2, T, eta_prop, f_ext, eta_ext, params)
    k4 = _derivative(y + dt * k3, T, eta_prop, f_ext, eta_ext, params)
    y = y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    y[6:10] /= np.linalg.norm(y[6:10])
    return y


def rotation(x: RigidBodyState) -> np.ndarray:
    return quat_to_rotmat(x.q)
