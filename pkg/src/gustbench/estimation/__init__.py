"""External force/torque estimators (EKF and UKF)."""

from gustbench.estimation.common import (
    SENSOR_PRESETS, FilterInput, Measurement, NoiseConfig, WrenchEstimate,
)
from gustbench.estimation.ekf import EkfEstimator, EkfState, ekf_predict, ekf_update, wrench_from_ekf
from gustbench.estimation.ukf import (
    UkfEstimator, UkfState, ukf_predict, ukf_sigma_points, ukf_update, wrench_from_ukf,
)


def wrench_from_filter(s) -> WrenchEstimate:
    if isinstance(s, EkfState):
        return wrench_from_ekf(s)
    if isinstance(s, UkfState):
        return wrench_from_ukf(s)
    raise TypeError(f"not a filter state: {type(s).__name__}")


def make_estimator(kind: str, noise: NoiseConfig, params):
    if kind == "ekf":
        return EkfEstimator(noise, params)
    if kind == "ukf":
        return UkfEstimator(noise, params)
    raise ValueError(f"unknown estimator {kind!r}")


__all__ = [
    "SENSOR_PRESETS", "FilterInput", "Measurement", "NoiseConfig", "WrenchEstimate",
    "EkfEstimator", "EkfState", "ekf_predict", "ekf_update",
    "UkfEstimator", "UkfState", "ukf_predict", "ukf_sigma_points", "ukf_update",
    "wrench_from_filter", "make_estimator",
]
