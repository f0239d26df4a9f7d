"""Noisy pose/twist measurements standing in for mocap or GPS state estimates."""

from dataclasses import dataclass, field

import numpy as np

from gustbench.estimation.common import SENSOR_PRESETS, Measurement
from gustbench.rotations import quat_mul, quat_normalize, rotvec_to_quat


@dataclass(frozen=True)
class SensorModel:
    preset: str = "mocap"
    std: dict = field(default_factory=dict)
    rate_hz: int = 200

    def __post_init__(self):
        if not self.std:
            if self.preset not in SENSOR_PRESETS:
                raise ValueError(f"unknown sensor preset {self.preset!r}")
            object.__setattr__(self, "std", dict(SENSOR_PRESETS[self.preset]))
        missing = {"p", "v", "att", "omega"} - set(self.std)
        if missing:
            raise ValueError(f"sensor std missing channels {sorted(missing)}")
        if self.rate_hz <= 0 or 1000 % self.rate_hz:
            raise ValueError("sensor rate must divide 1000 Hz")

    def measure(self, p, v, q, omega, rng: np.random.Generator) -> Measurement:
        s = self.std
        n = rng.standard_normal(12)
        dq = rotvec_to_quat(s["att"] * n[6:9])
        return Measurement(
            p + s["p"] * n[0:3],
            v + s["v"] * n[3:6],
            quat_normalize(quat_mul(q, dq)),
            omega + s["omega"] * n[9:12],
        )
