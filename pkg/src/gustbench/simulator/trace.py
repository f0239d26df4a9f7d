"""
Simulation trace: fixed column schema, CSV round trip.

File layout: a ``# gustbench-trace v<N>`` line, a ``# meta: <json>`` line,
then a single header row and one row per log sample. Floats are written
with 17 significant digits so a reload is bitwise exact.
"""

import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

TRACE_SCHEMA_VERSION = 1


def _xyz(prefix):
    return [f"{prefix}_{a}" for a in "xyz"]


COLUMNS = (
    ["t"]
    + _xyz("p") + _xyz("v") + ["q_w", "q_x", "q_y", "q_z"] + _xyz("omega")
    + _xyz("f_ext") + _xyz("eta_ext")
    + _xyz("meas_p") + _xyz("meas_v") + ["meas_phi", "meas_theta", "meas_psi"] + _xyz("meas_omega")
    + _xyz("f_hat") + _xyz("eta_hat") + _xyz("f_std") + _xyz("eta_std")
    + _xyz("p_ref") + ["s_ref"]
    + ["T_cmd", "phi_cmd", "theta_cmd", "psi_cmd"]
    + ["rotor_1", "rotor_2", "rotor_3", "rotor_4"]
    + ["est_ms", "ctrl_ms", "qp_iter", "kkt", "sqp_res", "slack", "err_code"]
)
TIMING_COLUMNS = ("est_ms", "ctrl_ms")
COLUMN_INDEX = {c: i for i, c in enumerate(COLUMNS)}

# err_code values
ERR_NONE = 0
ERR_ESTIMATOR = 1
ERR_CONTROLLER = 2


@dataclass
class SimTrace:
    data: np.ndarray
    meta: dict = field(default_factory=dict)
    columns: tuple = tuple(COLUMNS)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float).reshape(-1, len(self.columns))
        self._index = {c: i for i, c in enumerate(self.columns)}

    def __getitem__(self, name) -> np.ndarray:
        return self.data[:, self._index[name]]

    def block(self, prefix) -> np.ndarray:
        """``(n, 3)`` array of the ``<prefix>_x/y/z`` columns."""
        return self.data[:, [self._index[c] for c in _xyz(prefix)]]

    @property
    def t(self) -> np.ndarray:
        return self["t"]

    def __len__(self):
        return self.data.shape[0]

    def deterministic_part(self) -> np.ndarray:
        """All columns except wall-clock timings."""
        keep = [i for c, i in self._index.items() if c not in TIMING_COLUMNS]
        return self.data[:, keep]

    def to_csv(self, path):
        buf = io.StringIO()
        buf.write(f"# gustbench-trace v{TRACE_SCHEMA_VERSION}\n")
        buf.write("# meta: " + json.dumps(self.meta, sort_keys=True) + "\n")
        buf.write(",".join(self.columns) + "\n")
        np.savetxt(buf, self.data, fmt="%.17g", delimiter=",")
        Path(path).write_text(buf.getvalue())

    @classmethod
    def from_csv(cls, path) -> "SimTrace":
        lines = Path(path).read_text().splitlines()
        if not lines or not lines[0].startswith("# gustbench-trace v"):
            raise ValueError(f"{path}: not a gustbench trace")
        version = int(lines[0].rsplit("v", 1)[1])
        if version != TRACE_SCHEMA_VERSION:
            raise ValueError(f"{path}: unsupported trace schema v{version}")
        meta = {}
        i = 1
        while i < len(lines) and lines[i].startswith("#"):
            if lines[i].startswith("# meta: "):
                meta = json.loads(lines[i][len("# meta: "):])
            i += 1
        cols = tuple(lines[i].split(","))
        body = "\n".join(lines[i + 1:])
        data = np.loadtxt(io.StringIO(body), delimiter=",", ndmin=2) if body.strip() else np.zeros((0, len(cols)))
        return cls(data, meta, cols)
