"""
Scenario configuration: YAML text to a validated ``ScenarioConfig``.

Every validation failure raises ``ConfigError`` carrying the dotted field
name and, when known, the source line.
"""

import dataclasses
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from gustbench.control.mpc import MpcConfig
from gustbench.control.pid import PidConfig
from gustbench.dynamics import ThrustMapCoeffs, VehicleParams
from gustbench.errors import ConfigError
from gustbench.estimation.common import NoiseConfig
from gustbench.guidance import ReferencePath
from gustbench.simulator.attitude import AttitudeGains
from gustbench.simulator.disturbances import GroundEffectZone, WeightDropEvent, WindGustField
from gustbench.simulator.sensors import SensorModel

CONFIG_SCHEMA_VERSION = 1

CONTROLLERS = ("pid", "mpc", "mpc-slack")
ESTIMATORS = ("ekf", "ukf", "none")
DEFAULT_CONTROLLER_RATE = {"pid": 100, "mpc": 100, "mpc-slack": 70}
DEFAULT_ESTIMATOR_RATE = {"ekf": 100, "ukf": 40, "none": 100}

# allowed keys per section; None marks a leaf
SCHEMA = {
    "schema_version": None,
    "name": None,
    "description": None,
    "duration": None,
    "seed": None,
    "battery_voltage": None,
    "log_rate_hz": None,
    "record_timing": None,
    "vehicle": {"mass": None, "inertia": None, "arm_length": None, "rotor_config": None,
                "drag_to_thrust": None, "f_min": None, "f_max": None},
    "sensor": {"preset": None, "rate_hz": None, "std": None},
    "path": {"waypoints": None, "speed": None, "yaw": None},
    "initial": {"position": None, "velocity": None},
    "estimator": {"kind": None, "rate_hz": None, "noise": None, "alpha": None, "beta": None,
                  "kappa": None, "init_force_var": None, "init_torque_var": None},
    "controller": {"kind": None, "rate_hz": None, "compensation": None, "pid": None, "mpc": None},
    "attitude": {"K_q": None, "K_omega": None},
    "disturbances": {
        "wind": {"box_min": None, "box_max": None, "velocity": None, "edge": None,
                 "drag_coeff": None, "turbulence_std": None, "turbulence_bandwidth": None},
        "ground_effect": {"surface_z": None, "x_range": None, "y_range": None,
                          "rotor_radius": None, "edge": None},
        "weight_drop": {"t_drop": None, "lever_arm": None, "mass": None},
    },
}
NOISE_KEYS = {"q_p", "q_v", "q_att", "q_omega", "q_f", "q_eta"}
PID_KEYS = {"k_p", "k_d", "k_i", "integ_limit", "a_max", "tilt_max"}
MPC_KEYS = {"N", "dt", "Q_x", "R_u", "P_N", "T_min", "T_max", "phi_max", "theta_max", "k_phi",
            "tau_phi", "k_theta", "tau_theta", "e_max", "slack_weight", "max_qp_iter",
            "along_track"}


@dataclass
class ScenarioConfig:
    name: str
    duration: float
    path: ReferencePath
    seed: int = 0
    battery_voltage: float = 11.1
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    sensor: SensorModel = field(default_factory=SensorModel)
    initial_position: np.ndarray | None = None
    initial_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    estimator: str = "ekf"
    estimator_rate: int | None = None
    noise: NoiseConfig | None = None
    controller: str = "pid"
    controller_rate: int | None = None
    compensation: bool = True
    pid: PidConfig = field(default_factory=PidConfig)
    mpc: MpcConfig = field(default_factory=MpcConfig)
    attitude: AttitudeGains = field(default_factory=AttitudeGains)
    wind: WindGustField | None = None
    ground_effect: GroundEffectZone | None = None
    weight_drop: WeightDropEvent | None = None
    log_rate_hz: int = 200
    record_timing: bool = True
    description: str = ""

    def __post_init__(self):
        if self.noise is None:
            self.noise = NoiseConfig.from_intensities(sensor=self.sensor.std)
        if self.initial_position is None:
            self.initial_position = self.path.waypoints[0].copy()
        self.initial_position = np.asarray(self.initial_position, dtype=float)
        self.initial_velocity = np.asarray(self.initial_velocity, dtype=float)
        if self.controller not in CONTROLLERS:
            raise ConfigError(f"unknown controller {self.controller!r}", "controller.kind")
        if self.estimator not in ESTIMATORS:
            raise ConfigError(f"unknown estimator {self.estimator!r}", "estimator.kind")
        if self.duration <= 0:
            raise ConfigError("duration must be positive", "duration")
        for name, rate in (("controller.rate_hz", self.ctrl_rate), ("estimator.rate_hz", self.est_rate),
                           ("log_rate_hz", self.log_rate_hz)):
            if not (isinstance(rate, (int, np.integer)) and 0 < rate <= 1000):
                raise ConfigError("rates must be integers in (0, 1000] Hz", name)
        if self.weight_drop is not None and self.weight_drop.t_drop > self.duration:
            raise ConfigError("t_drop must lie within the scenario duration", "disturbances.weight_drop.t_drop")
        # the MPC slack flag follows the controller choice
        want_soft = self.controller == "mpc-slack"
        if self.mpc.soft != want_soft:
            self.mpc = dataclasses.replace(self.mpc, soft=want_soft)

    @property
    def ctrl_rate(self) -> int:
        return self.controller_rate or DEFAULT_CONTROLLER_RATE[self.controller]

    @property
    def est_rate(self) -> int:
        return self.estimator_rate or DEFAULT_ESTIMATOR_RATE[self.estimator]

    def with_overrides(self, *, controller=None, estimator=None, compensation=None, seed=None,
                       keep_rates=False) -> "ScenarioConfig":
        """Copy with CLI-style overrides. Changing the controller or estimator
        resets its rate to the default unless ``keep_rates``."""
        kw = {}
        if controller is not None:
            kw["controller"] = controller
            if not keep_rates:
                kw["controller_rate"] = None
        if estimator is not None:
            kw["estimator"] = estimator
            if not keep_rates:
                kw["estimator_rate"] = None
        if compensation is not None:
            kw["compensation"] = bool(compensation)
        if seed is not None:
            kw["seed"] = int(seed)
        return dataclasses.replace(self, **kw)

    @property
    def run_id(self) -> str:
        comp = "comp" if self.compensation else "nocomp"
        return f"{self.name}_{self.controller}_{self.estimator}_{comp}_s{self.seed}"


def _line_map(node, prefix="", out=None):
    """Dotted key path -> 1-based line number from a composed YAML tree."""
    if out is None:
        out = {}
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = f"{prefix}.{k.value}" if prefix else str(k.value)
            out[key] = k.start_mark.line + 1
            _line_map(v, key, out)
    return out


class _Ctx:
    def __init__(self, lines):
        self.lines = lines

    def error(self, msg, key):
        return ConfigError(msg, key, self.lines.get(key))


def _check_keys(d, schema, prefix, ctx):
    if not isinstance(d, dict):
        raise ctx.error("expected a mapping", prefix or "<root>")
    for k, v in d.items():
        key = f"{prefix}.{k}" if prefix else str(k)
        if k not in schema:
            raise ctx.error(f"unknown field {k!r}", key)
        if isinstance(schema[k], dict) and v is not None:
            _check_keys(v, schema[k], key, ctx)


def _vec(value, key, ctx, n=3):
    try:
        a = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ctx.error("expected numbers", key) from None
    if n is not None and a.shape != (n,):
        raise ctx.error(f"expected a list of {n} numbers", key)
    if not np.all(np.isfinite(a)):
        raise ctx.error("values must be finite", key)
    return a


def _num(d, k, key, ctx, default=None):
    if k not in d:
        return default
    v = d[k]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ctx.error("expected a number", key)
    return float(v)


def _build(section, key, ctx, fn):
    try:
        return fn()
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ctx.error(str(exc), key) from None


def parse_scenario(text: str, source: str = "<string>") -> ScenarioConfig:
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        line = exc.problem_mark.line + 1 if exc.problem_mark else None
        raise ConfigError(f"{source}: YAML syntax error: {exc.problem}", None, line) from None
    if data is None:
        raise ConfigError(f"{source}: empty scenario")
    ctx = _Ctx(_line_map(root))
    _check_keys(data, SCHEMA, "", ctx)
    ver = data.get("schema_version", CONFIG_SCHEMA_VERSION)
    if ver != CONFIG_SCHEMA_VERSION:
        raise ctx.error(f"unsupported schema_version {ver}", "schema_version")
    for req in ("name", "duration", "path"):
        if req not in data:
            raise ConfigError(f"missing required field {req!r}", req)

    kw = {"name": str(data["name"]), "duration": _num(data, "duration", "duration", ctx)}
    if "description" in data:
        kw["description"] = str(data["description"])
    if "seed" in data:
        if not isinstance(data["seed"], int) or isinstance(data["seed"], bool):
            raise ctx.error("seed must be an integer", "seed")
        kw["seed"] = data["seed"]
    for k in ("battery_voltage",):
        if k in data:
            kw[k] = _num(data, k, k, ctx)
    if "log_rate_hz" in data:
        kw["log_rate_hz"] = data["log_rate_hz"]
    if "record_timing" in data:
        kw["record_timing"] = bool(data["record_timing"])

    veh = data.get("vehicle") or {}
    vkw = {}
    if "mass" in veh:
        vkw["m"] = _num(veh, "mass", "vehicle.mass", ctx)
    if "inertia" in veh:
        vkw["J"] = np.diag(_vec(veh["inertia"], "vehicle.inertia", ctx))
    for k in ("arm_length", "drag_to_thrust", "f_min", "f_max"):
        if k in veh:
            vkw[k] = _num(veh, k, f"vehicle.{k}", ctx)
    if "rotor_config" in veh:
        vkw["rotor_config"] = str(veh["rotor_config"])
    kw["vehicle"] = _build(veh, "vehicle", ctx, lambda: VehicleParams(thrust_map=ThrustMapCoeffs(), **vkw))
    try:
        kw["vehicle"].thrust_map.scale(kw.get("battery_voltage", 11.1))
    except ValueError as exc:
        raise ctx.error(str(exc), "battery_voltage") from None

    sen = data.get("sensor") or {}
    skw = {}
    if "preset" in sen:
        skw["preset"] = str(sen["preset"])
    if "rate_hz" in sen:
        skw["rate_hz"] = sen["rate_hz"]
    if "std" in sen:
        std = sen["std"]
        if not isinstance(std, dict):
            raise ctx.error("expected a mapping", "sensor.std")
        skw["std"] = {k: _num(std, k, f"sensor.std.{k}", ctx) for k in std}
    kw["sensor"] = _build(sen, "sensor", ctx, lambda: SensorModel(**skw))

    pth = data["path"] or {}
    if "waypoints" not in pth:
        raise ctx.error("missing waypoints", "path")
    wp = _vec(pth["waypoints"], "path.waypoints", ctx, n=None)
    kw["path"] = _build(pth, "path.waypoints", ctx, lambda: ReferencePath(
        wp, _num(pth, "speed", "path.speed", ctx, 0.5), _num(pth, "yaw", "path.yaw", ctx, 0.0)))

    ini = data.get("initial") or {}
    if "position" in ini:
        kw["initial_position"] = _vec(ini["position"], "initial.position", ctx)
    if "velocity" in ini:
        kw["initial_velocity"] = _vec(ini["velocity"], "initial.velocity", ctx)

    est = data.get("estimator") or {}
    if "kind" in est:
        kw["estimator"] = str(est["kind"])
        if kw["estimator"] not in ESTIMATORS:
            raise ctx.error(f"unknown estimator {kw['estimator']!r}", "estimator.kind")
    if "rate_hz" in est:
        kw["estimator_rate"] = est["rate_hz"]
    nz = est.get("noise") or {}
    if not isinstance(nz, dict):
        raise ctx.error("expected a mapping", "estimator.noise")
    for k in nz:
        if k not in NOISE_KEYS:
            raise ctx.error(f"unknown field {k!r}", f"estimator.noise.{k}")
    nkw = {k: _num(nz, k, f"estimator.noise.{k}", ctx) for k in nz}
    for k in ("alpha", "beta", "kappa", "init_force_var", "init_torque_var"):
        if k in est:
            nkw[k] = _num(est, k, f"estimator.{k}", ctx)
    kw["noise"] = _build(est, "estimator", ctx,
                         lambda: NoiseConfig.from_intensities(sensor=kw["sensor"].std, **nkw))

    ctl = data.get("controller") or {}
    if "kind" in ctl:
        kw["controller"] = str(ctl["kind"])
        if kw["controller"] not in CONTROLLERS:
            raise ctx.error(f"unknown controller {kw['controller']!r}", "controller.kind")
    if "rate_hz" in ctl:
        kw["controller_rate"] = ctl["rate_hz"]
    if "compensation" in ctl:
        if not isinstance(ctl["compensation"], bool):
            raise ctx.error("expected true/false", "controller.compensation")
        kw["compensation"] = ctl["compensation"]
    pid = ctl.get("pid") or {}
    for k in pid:
        if k not in PID_KEYS:
            raise ctx.error(f"unknown field {k!r}", f"controller.pid.{k}")
    kw["pid"] = _build(pid, "controller.pid", ctx, lambda: PidConfig(**pid))
    mpc = dict(ctl.get("mpc") or {})
    for k in mpc:
        if k not in MPC_KEYS:
            raise ctx.error(f"unknown field {k!r}", f"controller.mpc.{k}")
    for k in ("Q_x", "R_u", "P_N"):
        if k in mpc:
            v = _vec(mpc[k], f"controller.mpc.{k}", ctx, n=None)
            mpc[k] = np.diag(v) if v.ndim == 1 else v
    kw["mpc"] = _build(mpc, "controller.mpc", ctx, lambda: MpcConfig(**mpc))

    att = data.get("attitude") or {}
    kw["attitude"] = _build(att, "attitude", ctx, lambda: AttitudeGains(**att))

    dist = data.get("disturbances") or {}
    if dist.get("wind"):
        w = dist["wind"]
        for req in ("box_min", "box_max", "velocity"):
            if req not in w:
                raise ctx.error(f"missing {req}", "disturbances.wind")
        kw["wind"] = _build(w, "disturbances.wind", ctx, lambda: WindGustField(
            _vec(w["box_min"], "disturbances.wind.box_min", ctx),
            _vec(w["box_max"], "disturbances.wind.box_max", ctx),
            _vec(w["velocity"], "disturbances.wind.velocity", ctx),
            _num(w, "edge", "disturbances.wind.edge", ctx, 0.1),
            _num(w, "drag_coeff", "disturbances.wind.drag_coeff", ctx, 0.02),
            _num(w, "turbulence_std", "disturbances.wind.turbulence_std", ctx, 0.0),
            _num(w, "turbulence_bandwidth", "disturbances.wind.turbulence_bandwidth", ctx, 2.0),
        ))
    if dist.get("ground_effect"):
        ge = dist["ground_effect"]
        for req in ("surface_z", "x_range", "y_range"):
            if req not in ge:
                raise ctx.error(f"missing {req}", "disturbances.ground_effect")
        kw["ground_effect"] = _build(ge, "disturbances.ground_effect", ctx, lambda: GroundEffectZone(
            _num(ge, "surface_z", "disturbances.ground_effect.surface_z", ctx),
            tuple(_vec(ge["x_range"], "disturbances.ground_effect.x_range", ctx, 2)),
            tuple(_vec(ge["y_range"], "disturbances.ground_effect.y_range", ctx, 2)),
            _num(ge, "rotor_radius", "disturbances.ground_effect.rotor_radius", ctx, 0.08),
            _num(ge, "edge", "disturbances.ground_effect.edge", ctx, 0.05),
        ))
    if dist.get("weight_drop"):
        wd = dist["weight_drop"]
        for req in ("t_drop", "lever_arm"):
            if req not in wd:
                raise ctx.error(f"missing {req}", "disturbances.weight_drop")
        kw["weight_drop"] = _build(wd, "disturbances.weight_drop", ctx, lambda: WeightDropEvent(
            _num(wd, "t_drop", "disturbances.weight_drop.t_drop", ctx),
            _vec(wd["lever_arm"], "disturbances.weight_drop.lever_arm", ctx),
            _num(wd, "mass", "disturbances.weight_drop.mass", ctx, 0.1),
        ))

    try:
        return ScenarioConfig(**kw)
    except ConfigError as exc:
        if exc.line is None and exc.field is not None:
            raise ConfigError(exc.message, exc.field, ctx.lines.get(exc.field)) from None
        raise


def scenario_names() -> list[str]:
    files = resources.files("gustbench.scenarios").iterdir()
    return sorted(f.name[:-5] for f in files if f.name.endswith(".yaml"))


def load_scenario(ref) -> ScenarioConfig:
    """Load from a file path, or by name from the packaged scenarios."""
    p = Path(ref)
    if p.suffix in (".yaml", ".yml", ".cfg") or p.exists():
        if not p.exists():
            raise ConfigError(f"scenario file {str(p)!r} not found")
        return parse_scenario(p.read_text(), str(p))
    name = str(ref)
    pkg = resources.files("gustbench.scenarios").joinpath(f"{name}.yaml")
    if not pkg.is_file():
        raise ConfigError(f"unknown scenario {name!r}; packaged: {', '.join(scenario_names())}")
    return parse_scenario(pkg.read_text(), name)
