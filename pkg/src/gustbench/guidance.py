"""
Path-following guidance on piecewise-linear reference paths.

The reference point is the closest point on the path; the reference velocity
is the path tangent scaled by the path speed, or zero once the closest point
is the final waypoint (hover at the terminus).
"""

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ReferencePath:
    waypoints: np.ndarray
    v_ref: float = 0.5
    yaw_ref: float = 0.0
    s: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        w = np.atleast_2d(np.asarray(self.waypoints, dtype=float))
        if w.ndim != 2 or w.shape[1] != 3 or w.shape[0] < 1:
            raise ValueError("path needs 3-D waypoints")
        seg = np.linalg.norm(np.diff(w, axis=0), axis=1)
        if np.any(seg <= 0):
            raise ValueError("consecutive waypoints must be distinct")
        if self.v_ref < 0:
            raise ValueError("v_ref must be non-negative")
        object.__setattr__(self, "waypoints", w)
        object.__setattr__(self, "s", np.concatenate([[0.0], np.cumsum(seg)]))

    @property
    def length(self) -> float:
        return float(self.s[-1])

    def point_at(self, s):
        """Path point(s) at arc length ``s`` (clamped to the path)."""
        s = np.clip(np.asarray(s, dtype=float), 0.0, self.length)
        out = np.empty(s.shape + (3,))
        for d in range(3):
            out[..., d] = np.interp(s, self.s, self.waypoints[:, d])
        return out

    def tangent_at(self, s) -> np.ndarray:
        """Unit tangent of the segment containing ``s``; at an interior
        vertex the outgoing segment is used. A single-point path has a zero
        tangent."""
        if len(self.s) == 1:
            return np.zeros(3)
        k = int(np.searchsorted(self.s, s, side="right")) - 1
        k = min(max(k, 0), len(self.s) - 2)
        d = self.waypoints[k + 1] - self.waypoints[k]
        return d / np.linalg.norm(d)

    def sample(self, ds=1e-3):
        """Dense samples ``(s, points)`` with spacing at most ``ds``."""
        n = int(np.ceil(self.length / ds)) + 1
        s = np.linspace(0.0, self.length, n)
        return s, self.point_at(s)


@dataclass(frozen=True)
class GuidanceOutput:
    p_ref: np.ndarray
    v_ref_vec: np.ndarray
    s: float
    at_end: bool
    tangent: np.ndarray
    yaw_ref: float = 0.0


def closest_point(path: ReferencePath, p, s_min=None, s_max=None) -> GuidanceOutput:
    """Global closest point on ``path`` to ``p``.

    ``s_min``/``s_max`` optionally restrict the search to an arc-length
    window. Ties go to the smallest arc length.
    """
    p = np.asarray(p, dtype=float)
    if len(path.s) == 1:
        # hover point
        return GuidanceOutput(path.waypoints[0].copy(), np.zeros(3), 0.0, True, np.zeros(3), path.yaw_ref)
    a = path.waypoints[:-1]
    d = np.diff(path.waypoints, axis=0)
    L = np.diff(path.s)
    lo = np.zeros_like(L)
    hi = L.copy()
    if s_min is not None:
        lo = np.clip(s_min - path.s[:-1], 0.0, L)
    if s_max is not None:
        hi = np.clip(s_max - path.s[:-1], 0.0, L)
    # a segment counts only if it overlaps the window
    valid = np.ones(len(L), dtype=bool)
    if s_min is not None:
        valid &= path.s[1:] >= s_min
    if s_max is not None:
        valid &= path.s[:-1] <= s_max
    if not np.any(valid):
        valid[:] = True
        lo, hi = np.zeros_like(L), L.copy()
    u = d / L[:, None]
    t = np.clip(np.einsum("ij,ij->i", p - a, u), lo, hi)
    pts = a + t[:, None] * u
    dist = np.linalg.norm(pts - p, axis=1)
    dist[~valid] = np.inf
    s_all = path.s[:-1] + t
    best = dist.min()
    cand = np.flatnonzero(dist <= best + 1e-12)
    k = cand[np.argmin(s_all[cand])]
    s = float(s_all[k])
    p_ref = pts[k]
    at_end = s >= path.length - 1e-12
    tangent = path.tangent_at(s)
    v = np.zeros(3) if at_end else tangent * path.v_ref
    return GuidanceOutput(p_ref, v, s, bool(at_end), tangent, path.yaw_ref)


class PathTracker:
    """Closest-point guidance with a forward search window.

    Once tracking has started the search is restricted to
    ``[s_prev - back, s_prev + ahead]`` so the reference cannot jump between
    near-parallel path legs.
    """

    def __init__(self, path: ReferencePath, back=0.5, ahead=2.0):
        self.path = path
        self.back = back
        self.ahead = ahead
        self.s_prev: float | None = None

    def __call__(self, p) -> GuidanceOutput:
        if self.s_prev is None:
            out = closest_point(self.path, p)
        else:
            out = closest_point(self.path, p, self.s_prev - self.back, self.s_prev + self.ahead)
        self.s_prev = out.s
        return out

    def horizon(self, out: GuidanceOutput, dt: float, n: int, predicted=None):
        """Position/velocity references for ``n + 1`` prediction stages
        spaced ``dt`` apart.

        Without ``predicted`` the reference advances along the path at
        ``v_ref``. With predicted stage positions, each stage reference is
        the projection of the predicted position, kept between the current
        closest point and the nominal schedule. Along-path lag then costs
        only velocity error, not position error.
        """
        path = self.path
        nominal = np.minimum(out.s + path.v_ref * dt * np.arange(n + 1), path.length)
        if predicted is None or len(path.s) == 1:
            s = nominal
        else:
            s = project_arclength(path, predicted, out.s, nominal[-1])
            s = np.maximum.accumulate(np.clip(s, out.s, nominal))
            s[0] = out.s
        p = path.point_at(s)
        if len(path.s) == 1:
            return p, np.zeros((n + 1, 3)), np.zeros((n + 1, 3))
        seg = np.clip(np.searchsorted(path.s, s, side="right") - 1, 0, len(path.s) - 2)
        d = np.diff(path.waypoints, axis=0)
        units = d / np.linalg.norm(d, axis=1)[:, None]
        tangents = units[seg]
        moving = s < path.length - 1e-12
        v = tangents * (path.v_ref * moving)[:, None]
        return p, v, tangents


def project_arclength(path: ReferencePath, points, s_min=0.0, s_max=None):
    """Arc length of the closest path point for each row of ``points``,
    searched inside ``[s_min, s_max]``."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if len(path.s) == 1:
        return np.zeros(len(pts))
    s_max = path.length if s_max is None else s_max
    a = path.waypoints[:-1]
    L = np.diff(path.s)
    u = np.diff(path.waypoints, axis=0) / L[:, None]
    lo = np.clip(s_min - path.s[:-1], 0.0, L)
    hi = np.clip(s_max - path.s[:-1], 0.0, L)
    valid = (path.s[1:] >= s_min) & (path.s[:-1] <= s_max)
    if not np.any(valid):
        valid[:] = True
    t = np.clip(np.einsum("mij,ij->mi", pts[:, None, :] - a[None], u), lo, hi)
    dist = np.linalg.norm(a[None] + t[..., None] * u[None] - pts[:, None, :], axis=2)
    dist[:, ~valid] = np.inf
    k = np.argmin(dist, axis=1)
    return path.s[:-1][k] + t[np.arange(len(pts)), k]
