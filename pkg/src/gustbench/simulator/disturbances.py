"""
Synthetic disturbances: a wind box, ground effect over a table, and the
weight-drop event used for the estimator step response.
"""

from dataclasses import dataclass

import numpy as np

from gustbench.rotations import quat_to_rotmat


def _ramp(x, lo, hi, edge):
    """Trapezoid: 0 outside [lo, hi], 1 deeper than ``edge`` inside."""
    if edge <= 0:
        return np.where((x >= lo) & (x <= hi), 1.0, 0.0)
    return np.clip((x - lo) / edge, 0.0, 1.0) * np.clip((hi - x) / edge, 0.0, 1.0)


@dataclass(frozen=True)
class WindGustField:
    """Axis-aligned wind box with a linear velocity ramp at its faces.

    ``drag_coeff`` lumps 0.5*rho*C_d*A (kg/m). Optional band-limited
    turbulence is added to ``w`` by the simulator when ``turbulence_std > 0``.
    """

    box_min: np.ndarray
    box_max: np.ndarray
    w: np.ndarray
    edge_smoothing: float = 0.1
    drag_coeff: float = 0.02
    turbulence_std: float = 0.0
    turbulence_bandwidth: float = 2.0

    def __post_init__(self):
        lo = np.asarray(self.box_min, dtype=float)
        hi = np.asarray(self.box_max, dtype=float)
        object.__setattr__(self, "box_min", lo)
        object.__setattr__(self, "box_max", hi)
        object.__setattr__(self, "w", np.asarray(self.w, dtype=float))
        if lo.shape != (3,) or hi.shape != (3,) or self.w.shape != (3,):
            raise ValueError("wind box corners and velocity must be 3-vectors")
        if np.any(hi <= lo):
            raise ValueError("wind box must have positive extent")
        if self.drag_coeff < 0:
            raise ValueError("drag_coeff must be non-negative")
        if self.edge_smoothing < 0 or self.edge_smoothing >= 0.5 * np.min(hi - lo):
            raise ValueError("edge smoothing must be below the smallest box half-extent")
        if self.turbulence_std < 0 or self.turbulence_bandwidth <= 0:
            raise ValueError("turbulence std must be >= 0 and bandwidth > 0")

    def weight(self, p) -> float:
        p = np.asarray(p, dtype=float)
        return float(np.prod(_ramp(p, self.box_min, self.box_max, self.edge_smoothing)))


def wind_force(p, v, field: WindGustField, w=None):
    """Quadratic relative-velocity drag, scaled by the box edge ramp.

    ``f = s(p) * c * |w - v| * (w - v)``; ``w`` overrides the field's nominal
    velocity (turbulent sample).
    """
    s = field.weight(p)
    if s == 0.0:
        return np.zeros(3)
    w = field.w if w is None else np.asarray(w, dtype=float)
    rel = w - np.asarray(v, dtype=float)
    return s * field.drag_coeff * np.linalg.norm(rel) * rel


class Turbulence:
    """First-order (Ornstein-Uhlenbeck) noise on the wind vector."""

    def __init__(self, std: float, bandwidth: float, rng: np.random.Generator):
        self.std = std
        self.a = bandwidth
        self.rng = rng
        self.state = np.zeros(3)

    def step(self, dt: float) -> np.ndarray:
        if self.std == 0.0:
            return self.state
        phi = np.exp(-self.a * dt)
        self.state = phi * self.state + self.std * np.sqrt(1 - phi * phi) * self.rng.standard_normal(3)
        return self.state


@dataclass(frozen=True)
class GroundEffectZone:
    """Flat surface at height ``z_s`` with a rectangular footprint."""

    z_s: float
    x_range: tuple
    y_range: tuple
    rotor_radius: float = 0.08
    edge: float = 0.05

    def __post_init__(self):
        if self.rotor_radius <= 0:
            raise ValueError("rotor radius must be positive")
        for lo, hi in (self.x_range, self.y_range):
            if hi - lo <= 2 * self.edge:
                raise ValueError("ground-effect footprint is degenerate")


def ground_effect_force(p, T, zone: GroundEffectZone) -> float:
    """Upward thrust augmentation ``T*(1/(1-(R/4h)^2) - 1)``.

    Height is clamped below at 1.1*R/4; the effect fades over the footprint
    edge ramp and linearly between 4R and 5R so the force stays continuous.
    """
    R = zone.rotor_radius
    h = float(p[2]) - zone.z_s
    if h > 5 * R:
        return 0.0
    s = float(_ramp(p[0], *zone.x_range, zone.edge) * _ramp(p[1], *zone.y_range, zone.edge))
    if s == 0.0:
        return 0.0
    h = max(h, 1.1 * R / 4)
    ratio = 1.0 / (1.0 - (R / (4 * h)) ** 2) - 1.0
    taper = min(1.0, 5.0 - h / R)
    return s * taper * float(T) * ratio


@dataclass(frozen=True)
class WeightDropEvent:
    """Weight attached at body lever arm ``r`` and released at ``t_drop``.

    While attached, the weight acts as an external wrench: ``-m_w*g`` in
    world z and ``r x f`` in the body frame.
    """

    t_drop: float
    r: np.ndarray
    mass: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "r", np.asarray(self.r, dtype=float))
        if self.mass <= 0 or self.t_drop < 0:
            raise ValueError("weight mass must be positive and t_drop non-negative")

    def wrench(self, t: float, q, g=9.81):
        """``(f_world, eta_body)`` at time ``t`` for attitude ``q``."""
        if t >= self.t_drop:
            return np.zeros(3), np.zeros(3)
        f = np.array([0.0, 0.0, -self.mass * g])
        f_body = quat_to_rotmat(q).T @ f
        return f, np.cross(self.r, f_body)
