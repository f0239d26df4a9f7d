"""
Metrics computed from trace columns only, so every number can be
recomputed offline from the CSV files.
"""

from dataclasses import dataclass, field

import numpy as np

from gustbench.guidance import ReferencePath, project_arclength


def metric_t90(t, y, t_step, final=None, initial=None, hold=0.2, pre_window=1.0):
    """Rise time to 90 % of a step, or ``None`` if the signal never settles.

    ``final`` defaults to the mean of the trailing 20 % of the trace and
    ``initial`` to the mean over ``pre_window`` seconds before the step. The
    result is the first time after ``t_step`` at which the normalized signal
    reaches 0.9 and then stays inside [0.9, 1.1] for at least ``hold`` s.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if final is None:
        final = float(np.mean(y[int(0.8 * len(y)):]))
    if initial is None:
        pre = (t < t_step) & (t >= t_step - pre_window)
        initial = float(np.mean(y[pre])) if np.any(pre) else float(y[0])
    amp = final - initial
    if not np.isfinite(amp) or abs(amp) < 1e-12:
        return None
    r = (y - initial) / amp
    after = np.flatnonzero(t >= t_step)
    inside = (r >= 0.9) & (r <= 1.1)
    k = 0
    n = len(after)
    while k < n:
        i = after[k]
        if r[i] >= 0.9:
            j = k
            while j < n and inside[after[j]]:
                j += 1
            end_t = t[after[j - 1]] if j > k else t[i]
            if j > k and (end_t - t[i] >= hold or j == n and end_t - t[i] >= hold):
                return float(t[i] - t_step)
            k = max(j, k + 1)
        else:
            k += 1
    return None


def path_deviation(points, path: ReferencePath, chunk=4096):
    """Offset from each point to its closest path point (exact per-segment
    projection). Returns ``(n, 3)`` vectors ``p - closest``."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.empty_like(points)
    for a in range(0, len(points), chunk):
        blk = points[a:a + chunk]
        out[a:a + chunk] = blk - path.point_at(project_arclength(path, blk))
    return out


def metric_max_deviation(trace, path: ReferencePath, t_min=None, t_max=None):
    """Maximum perpendicular deviation from the path, m."""
    p, t = trace.block("p"), trace.t
    sel = np.ones(len(t), bool)
    if t_min is not None:
        sel &= t >= t_min
    if t_max is not None:
        sel &= t <= t_max
    if not np.any(sel):
        return 0.0
    d = path_deviation(p[sel], path)
    return float(np.max(np.linalg.norm(d, axis=1)))


def deviation_components(trace, path: ReferencePath):
    """Per-row ``(horizontal, vertical)`` deviation magnitudes, m."""
    d = path_deviation(trace.block("p"), path)
    return np.linalg.norm(d[:, :2], axis=1), np.abs(d[:, 2])


def trace_path(trace) -> ReferencePath:
    pm = trace.meta["path"]
    return ReferencePath(np.array(pm["waypoints"]), pm["speed"], pm["yaw"])


def estimate_noise(trace, prefix, t_min, t_max=None):
    """Std of each axis of an estimate over a quiet window (linear trend removed)."""
    t = trace.t
    sel = t >= t_min
    if t_max is not None:
        sel &= t <= t_max
    y = trace.block(prefix)[sel]
    tt = t[sel]
    A = np.column_stack([np.ones_like(tt), tt - tt.mean()])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return np.std(y - A @ coef, axis=0)


def timing_stats(trace, column):
    v = trace[column]
    v = v[np.isfinite(v)]
    if v.size == 0:
        return {"mean_ms": float("nan"), "max_ms": float("nan"), "n": 0}
    return {"mean_ms": float(v.mean()), "max_ms": float(v.max()), "n": int(v.size)}


def weight_drop_metrics(trace):
    """t90 of the force (z) and torque (projected on the true torque
    direction) estimates on the release step, plus pre-release averages."""
    wd = trace.meta["weight_drop"]
    t_drop = wd["t_drop"]
    t = trace.t
    pre = (t >= t_drop - 2.0) & (t < t_drop)
    f_hat = trace.block("f_hat")
    eta_hat = trace.block("eta_hat")
    eta_true = trace.block("eta_ext")[pre].mean(axis=0)
    f_true = trace.block("f_ext")[pre].mean(axis=0)
    u = eta_true / np.linalg.norm(eta_true)
    f_conv = f_hat[pre].mean(axis=0)
    eta_conv = eta_hat[pre].mean(axis=0)
    return {
        "force_t90": metric_t90(t, f_hat[:, 2], t_drop),
        "torque_t90": metric_t90(t, eta_hat @ u, t_drop),
        "force_converged": f_conv.tolist(),
        "force_true": f_true.tolist(),
        "torque_converged": eta_conv.tolist(),
        "torque_true": eta_true.tolist(),
        "torque_rel_err": float(np.linalg.norm(eta_conv - eta_true) / np.linalg.norm(eta_true)),
        "force_noise": estimate_noise(trace, "f_hat", t_drop - 3.0, t_drop).tolist(),
        "torque_noise": estimate_noise(trace, "eta_hat", t_drop - 3.0, t_drop).tolist(),
    }


@dataclass
class MetricReport:
    """Per-run metric dicts plus mean/std/worst aggregation."""

    scenario: str
    runs: list = field(default_factory=list)

    def add(self, run_id: str, metrics: dict):
        self.runs.append({"run_id": run_id, **metrics})

    def values(self, key):
        return np.array([r[key] for r in self.runs if r.get(key) is not None], dtype=float)

    def mean(self, key) -> float:
        v = self.values(key)
        return float(v.mean()) if v.size else float("nan")

    def std(self, key) -> float:
        v = self.values(key)
        return float(v.std(ddof=1)) if v.size > 1 else 0.0

    def worst(self, key) -> float:
        v = self.values(key)
        return float(v.max()) if v.size else float("nan")

    def summary(self, keys) -> dict:
        return {k: {"mean": self.mean(k), "std": self.std(k), "worst": self.worst(k), "n": int(self.values(k).size)}
                for k in keys}


def improvement(baseline: float, value: float) -> float:
    """Relative improvement over a baseline, ``(baseline - value)/baseline``."""
    return (baseline - value) / baseline


def vertical_error(trace):
    """Signed vertical offset from the closest path point, m."""
    return path_deviation(trace.block("p"), trace_path(trace))[:, 2]


def ground_effect_metrics(trace):
    """Peak upward error, peak undershoot after the far table edge, and the
    peak absolute vertical error, all in cm."""
    ge = trace.meta["ground_effect"]
    ez = vertical_error(trace)
    x = trace["p_x"]
    exit_ = x >= ge["x_range"][1] - ge.get("edge", 0.0)
    return {
        "overshoot_cm": float(max(ez.max(), 0.0) * 100),
        "undershoot_cm": float(max(-ez[exit_].min(), 0.0) * 100) if np.any(exit_) else 0.0,
        "max_abs_ez_cm": float(np.abs(ez).max() * 100),
    }


def gust_metrics(trace):
    """Peak horizontal/vertical deviation (cm) and the slowest descent speed
    while inside the wind box (m/s, positive = descending)."""
    h, v = deviation_components(trace, trace_path(trace))
    out = {"max_hdev_cm": float(h.max() * 100), "max_vdev_cm": float(v.max() * 100)}
    w = trace.meta.get("wind")
    if w is not None:
        p = trace.block("p")
        inside = np.all((p >= w["box_min"]) & (p <= w["box_max"]), axis=1)
        out["min_descent_mps"] = float(-trace["v_z"][inside].max()) if np.any(inside) else float("nan")
    return out


def trace_metrics(trace) -> dict:
    """Every metric that applies to a trace, based on its metadata."""
    out = {}
    out.update(gust_metrics(trace))
    if "ground_effect" in trace.meta:
        out.update(ground_effect_metrics(trace))
    if "weight_drop" in trace.meta:
        wd = weight_drop_metrics(trace)
        out["force_t90_s"] = wd["force_t90"]
        out["torque_t90_s"] = wd["torque_t90"]
        out.update({f"force_conv_{a}": v for a, v in zip("xyz", wd["force_converged"])})
        out["torque_rel_err"] = wd["torque_rel_err"]
        out["torque_noise"] = float(np.linalg.norm(wd["torque_noise"]))
        out["force_noise"] = float(np.linalg.norm(wd["force_noise"]))
    for col, key in (("est_ms", "est"), ("ctrl_ms", "ctrl")):
        st = timing_stats(trace, col)
        out[f"{key}_mean_ms"] = st["mean_ms"]
        out[f"{key}_max_ms"] = st["max_ms"]
    return out
