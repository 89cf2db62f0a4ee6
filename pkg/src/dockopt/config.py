"""Run configuration: YAML ingestion, defaults, and validation.

The configuration is a flat-plus-nested key/value document; every omitted
key falls back to the published Apollo case values. Validation constructs
the actual domain objects so each module's own invariants run before any
work starts, and failures are reported with the offending key path.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .driver import ScvxConfig
from .dynamics import ChaserState
from .fuel import DEFAULT_RATE_KG_S
from .problem import RendezvousProblem, apollo_problem
from .vehicle import Thruster, VehicleModel, build_apollo_csm

_VEHICLE_KEYS = {
    "mass", "inertia", "thrust", "dt_min", "dt_max", "t_c", "ring_radius",
    "quad_station", "quad_azimuth_offset_deg", "cant_deg", "fore_aft_offset",
    "roll_pair_separation", "roll_axial_offset", "forward_set", "thrusters",
}
_SCVX_KEYS = {
    "w_tr", "w_vc", "j_max", "dj_tol", "dj_abs", "p_e_max", "v_e_max",
    "theta_e_max", "omega_e_max", "rtol", "atol",
}
_GEOMETRY_KEYS = {
    "port_axis_body", "port_offset", "nose_length", "dock_roll_deg", "closing_speed",
}
_STATE_KEYS = {"p", "v", "q", "w"}
_TOP_KEYS = {
    "t_f", "sweep", "output_dir", "solver", "seed", "boundary", "lm",
    "geometry", "constraints", "vehicle", "scvx", "fuel",
}


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


@dataclass
class RunConfig:
    """Validated run description; builds the domain objects on demand."""

    t_f: float = 150.0
    sweep: tuple[float, ...] = (150.0, 250.0, 350.0, 450.0)
    output_dir: str = "out"
    solver: str | None = None
    seed: int = 0
    fuel_rate: float = DEFAULT_RATE_KG_S
    fuel_squared: bool = True
    vehicle: VehicleModel = field(default_factory=build_apollo_csm)
    scvx: ScvxConfig = field(default_factory=ScvxConfig)
    boundary: ChaserState | None = None
    lm: ChaserState | None = None
    geometry: dict = field(default_factory=dict)
    r_a: float = 4.0
    dtheta_max_deg: float = 2.0
    gamma_deg: float = 30.0

    def problem(self, t_f: float | None = None) -> RendezvousProblem:
        try:
            return apollo_problem(
                t_f=self.t_f if t_f is None else t_f,
                vehicle=self.vehicle,
                initial=self.boundary,
                lm=self.lm,
                r_a=self.r_a,
                dtheta_max_deg=self.dtheta_max_deg,
                gamma_deg=self.gamma_deg,
                geometry_overrides=self.geometry,
            )
        except ValueError as exc:
            raise ConfigError("t_f" if "t_f" in str(exc) else "problem", str(exc)) from exc


def _expect_mapping(value, key: str) -> dict:
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(key, f"expected a mapping, got {type(value).__name__}")
    return value


def _warn_unknown(section: dict, allowed: set[str], prefix: str) -> None:
    for key in section:
        if key not in allowed:
            warnings.warn(f"unknown configuration key {prefix}{key}", stacklevel=3)


def _vector(value, key: str, length: int) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.shape != (length,):
        raise ConfigError(key, f"expected {length} numbers")
    return arr


def _state(section: dict, prefix: str, default: ChaserState | None) -> ChaserState | None:
    if not section:
        return default
    _warn_unknown(section, _STATE_KEYS | {"p0", "v0", "q0", "w0"}, prefix)
    get = lambda *names: next(
        (section[n] for n in names if n in section), None
    )
    base = default or ChaserState(np.zeros(3), np.zeros(3), np.array([1.0, 0, 0, 0]), np.zeros(3))
    try:
        return ChaserState(
            p=_vector(get("p", "p0"), prefix + "p", 3) if get("p", "p0") is not None else base.p,
            v=_vector(get("v", "v0"), prefix + "v", 3) if get("v", "v0") is not None else base.v,
            q=_vector(get("q", "q0"), prefix + "q", 4) if get("q", "q0") is not None else base.q,
            w=_vector(get("w", "w0"), prefix + "w", 3) if get("w", "w0") is not None else base.w,
        )
    except ValueError as exc:
        raise ConfigError(prefix.rstrip("."), str(exc)) from exc


def _vehicle(section: dict) -> VehicleModel:
    _warn_unknown(section, _VEHICLE_KEYS, "vehicle.")
    try:
        if "thrusters" in section and section["thrusters"]:
            thrusters = tuple(
                Thruster(
                    position=_vector(t["position"], f"vehicle.thrusters[{i}].position", 3),
                    direction=_vector(t["direction"], f"vehicle.thrusters[{i}].direction", 3),
                    magnitude=float(t.get("magnitude", 445.0)),
                    index=i + 1,
                )
                for i, t in enumerate(section["thrusters"])
            )
            base = build_apollo_csm()
            return VehicleModel(
                mass=float(section.get("mass", base.mass)),
                inertia=np.asarray(section.get("inertia", base.inertia), dtype=float),
                thrusters=thrusters,
                dt_min=float(section.get("dt_min", base.dt_min)),
                dt_max=float(section.get("dt_max", base.dt_max)),
                t_c=float(section.get("t_c", base.t_c)),
                forward_set=frozenset(section.get("forward_set", base.forward_set)),
            )
        kwargs = {
            k: v for k, v in section.items() if k not in ("forward_set", "thrusters", "inertia")
        }
        if "inertia" in section:
            kwargs["inertia"] = np.asarray(section["inertia"], dtype=float)
        model = build_apollo_csm(**kwargs)
        if "forward_set" in section:
            model = VehicleModel(
                mass=model.mass,
                inertia=model.inertia,
                thrusters=model.thrusters,
                dt_min=model.dt_min,
                dt_max=model.dt_max,
                t_c=model.t_c,
                forward_set=frozenset(section["forward_set"]),
            )
        return model
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError("vehicle", str(exc)) from exc


def load_config(path) -> RunConfig:
    """Parse and fully validate a run configuration file."""
    text = Path(path).read_text()
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError("<file>", f"parse error{where}: {exc}") from exc
    raw = _expect_mapping(raw, "<file>")
    _warn_unknown(raw, _TOP_KEYS, "")
    cfg = RunConfig()
    if "t_f" in raw:
        cfg.t_f = float(raw["t_f"])
    if "sweep" in raw:
        if not isinstance(raw["sweep"], (list, tuple)) or not raw["sweep"]:
            raise ConfigError("sweep", "expected a nonempty list of durations")
        cfg.sweep = tuple(float(v) for v in raw["sweep"])
    if "output_dir" in raw:
        cfg.output_dir = str(raw["output_dir"])
    solver = _expect_mapping(raw.get("solver"), "solver")
    _warn_unknown(solver, {"name"}, "solver.")
    cfg.solver = solver.get("name")
    if "seed" in raw:
        cfg.seed = int(raw["seed"])
    fuel = _expect_mapping(raw.get("fuel"), "fuel")
    _warn_unknown(fuel, {"c1", "squared"}, "fuel.")
    cfg.fuel_rate = float(fuel.get("c1", cfg.fuel_rate))
    cfg.fuel_squared = bool(fuel.get("squared", cfg.fuel_squared))
    if cfg.fuel_rate <= 0:
        raise ConfigError("fuel.c1", "must be positive")
    cfg.vehicle = _vehicle(_expect_mapping(raw.get("vehicle"), "vehicle"))
    scvx = _expect_mapping(raw.get("scvx"), "scvx")
    _warn_unknown(scvx, _SCVX_KEYS, "scvx.")
    try:
        cfg.scvx = ScvxConfig(**{k: (int(v) if k == "j_max" else float(v)) for k, v in scvx.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError("scvx", str(exc)) from exc
    cfg.boundary = _state(_expect_mapping(raw.get("boundary"), "boundary"), "boundary.", None)
    cfg.lm = _state(_expect_mapping(raw.get("lm"), "lm"), "lm.", None)
    geometry = _expect_mapping(raw.get("geometry"), "geometry")
    _warn_unknown(geometry, _GEOMETRY_KEYS, "geometry.")
    cfg.geometry = dict(geometry)
    constraints = _expect_mapping(raw.get("constraints"), "constraints")
    _warn_unknown(constraints, {"r_a", "dtheta_max_deg", "gamma_deg"}, "constraints.")
    cfg.r_a = float(constraints.get("r_a", cfg.r_a))
    cfg.dtheta_max_deg = float(constraints.get("dtheta_max_deg", cfg.dtheta_max_deg))
    cfg.gamma_deg = float(constraints.get("gamma_deg", cfg.gamma_deg))
    # Construct the problem once so every invariant runs now.
    for t_f in {cfg.t_f, *cfg.sweep}:
        cfg.problem(t_f)
    return cfg
