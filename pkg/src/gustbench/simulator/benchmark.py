"""
Estimator timing benchmark.

Both filters consume the same recorded measurement stream (a hovering
vehicle with sensor noise). The default mode interleaves the two step
functions in one thread so they see the same machine state; the threaded
mode runs each filter on its own thread, as on a multi-core flight
computer. Under CPython the threads share the interpreter lock, so threaded
per-step times include contention and are only indicative.
"""

import threading
import time
from dataclasses import dataclass

import numpy as np

from gustbench.dynamics import VehicleParams
from gustbench.estimation import FilterInput, NoiseConfig, make_estimator
from gustbench.simulator.sensors import SensorModel


@dataclass
class EstimatorTiming:
    ekf_ms: np.ndarray
    ukf_ms: np.ndarray
    mode: str

    @property
    def ekf_mean(self) -> float:
        return float(self.ekf_ms.mean())

    @property
    def ukf_mean(self) -> float:
        return float(self.ukf_ms.mean())

    @property
    def ratio(self) -> float:
        return self.ukf_mean / self.ekf_mean


def measurement_stream(n, sensor: SensorModel | None = None, seed=0):
    """``n`` noisy measurements of a vehicle hovering at the origin."""
    sensor = sensor or SensorModel()
    rng = np.random.default_rng(seed)
    p, v, w = np.zeros(3), np.zeros(3), np.zeros(3)
    q = np.array([1.0, 0.0, 0.0, 0.0])
    return [sensor.measure(p, v, q, w, rng) for _ in range(n)]


def _run(est, stream, u, dt, out):
    for i, z in enumerate(stream):
        t0 = time.perf_counter()
        est.step(u, z, dt)
        out[i] = (time.perf_counter() - t0) * 1e3


def benchmark_estimators(n=10_000, dt=0.01, threaded=False, seed=0,
                         noise: NoiseConfig | None = None, params: VehicleParams | None = None,
                         warmup=50) -> EstimatorTiming:
    """Per-step wall time of the EKF and UKF over the same ``n`` measurements."""
    params = params or VehicleParams()
    noise = noise or NoiseConfig.from_intensities()
    stream = measurement_stream(n + warmup, seed=seed)
    u = FilterInput(params.hover_thrust)
    ekf = make_estimator("ekf", noise, params)
    ukf = make_estimator("ukf", noise, params)
    for z in stream[:warmup]:
        ekf.step(u, z, dt)
        ukf.step(u, z, dt)
    stream = stream[warmup:]
    t_ekf = np.empty(n)
    t_ukf = np.empty(n)
    if threaded:
        jobs = [threading.Thread(target=_run, args=(f, stream, u, dt, out))
                for f, out in ((ekf, t_ekf), (ukf, t_ukf))]
        for j in jobs:
            j.start()
        for j in jobs:
            j.join()
    else:
        for i, z in enumerate(stream):
            t0 = time.perf_counter()
            ekf.step(u, z, dt)
            t1 = time.perf_counter()
            ukf.step(u, z, dt)
            t2 = time.perf_counter()
            t_ekf[i] = (t1 - t0) * 1e3
            t_ukf[i] = (t2 - t1) * 1e3
    return EstimatorTiming(t_ekf, t_ukf, "threaded" if threaded else "interleaved")
