"""Experiment configuration: schema validation, unit normalisation, round-trip emit.

Configs are JSON documents.  Rates are scaled to rad/s according to the
top-level ``units`` flag; angles may be plain radians or strings such as
``"0.1pi"``.  :func:`emit_config` writes the resolved form (always
``"rad_per_s"``, angles in radians) so that ``parse_config(emit_config(c))``
reproduces ``c``.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field

import jsonschema

from .analysis import SweepAxis
from .dynamics import DriveSpec, InitialState
from .errors import CavityError, ConfigError
from .lindblad import FockConfig
from .model import CableCoupling, CavityParams, ChainSpec, DirectCoupling

UNIT_SCALE = {"rad_per_s": 1.0, "hz_angular": 1.0, "hz_cyclic": 2.0 * math.pi}
PROTOCOLS = ("free_decay", "driven", "steady_decay", "lindblad")
SYSTEMS = ("direct", "cable", "chain")
RATE_AXES = ("g", "gamma1", "gamma2")
ANGLE_AXES = ("delta_phi", "theta")

_ANGLE = {"oneOf": [{"type": "number"}, {"type": "string", "pattern": r"^\s*[-+0-9.eE]*\s*pi\s*$"}]}
_COMPLEX = {
    "oneOf": [
        {"type": "number"},
        {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
    ]
}
_NONNEG = {"type": "number", "minimum": 0}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["system", "protocol"],
    "properties": {
        "system": {"enum": list(SYSTEMS)},
        "protocol": {"enum": list(PROTOCOLS)},
        "units": {"enum": list(UNIT_SCALE)},
        "cavities": {
            "type": "array",
            "minItems": 1,
            "maxItems": 2,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["omega", "kappa_i"],
                "properties": {
                    "omega": {"type": "number", "exclusiveMinimum": 0},
                    "kappa_i": _NONNEG,
                    "kappa_e": _NONNEG,
                    "gamma": _NONNEG,
                },
            },
        },
        "coupling": {
            "oneOf": [
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["type", "g"],
                    "properties": {"type": {"const": "direct"}, "g": _NONNEG},
                },
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["type", "theta"],
                    "properties": {
                        "type": {"const": "cable"},
                        "theta": _ANGLE,
                        "gamma0L0": _NONNEG,
                    },
                },
            ]
        },
        "chain": {
            "type": "object",
            "additionalProperties": False,
            "required": ["n", "g", "kappa_i", "kappa_e_first", "kappa_e_last", "omega"],
            "properties": {
                "n": {"type": "integer", "minimum": 2},
                "g": _NONNEG,
                "kappa_i": {"oneOf": [_NONNEG, {"type": "array", "items": _NONNEG}]},
                "kappa_e_first": _NONNEG,
                "kappa_e_last": _NONNEG,
                "omega": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "frame": {"type": "number", "exclusiveMinimum": 0},
        "drive": {
            "type": "object",
            "additionalProperties": False,
            "required": ["port"],
            "properties": {
                "port": {"type": "integer", "minimum": 0},
                "amplitude": _COMPLEX,
                "frequency": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "observe_port": {"type": "integer", "minimum": 0},
        "initial_state": {
            "oneOf": [
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["amplitudes"],
                    "properties": {"amplitudes": {"type": "array", "items": _COMPLEX, "minItems": 1}},
                },
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["alpha"],
                    "properties": {"alpha": _NONNEG, "delta_phi": _ANGLE},
                },
            ]
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "required": ["axes"],
            "properties": {
                "axes": {
                    "type": "array",
                    "minItems": 1,
                    "maxItems": 2,
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["name"],
                        "properties": {
                            "name": {"enum": ["delta_phi", "theta", "g", "gamma0L0", "gamma1", "gamma2", "N"]},
                            "values": {"type": "array", "items": _ANGLE, "minItems": 1},
                            "start": _ANGLE,
                            "stop": _ANGLE,
                            "num": {"type": "integer", "minimum": 1},
                            "endpoint": {"type": "boolean"},
                        },
                    },
                },
                "target_mode": {"type": "integer", "minimum": 0},
            },
        },
        "time_grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "t_max": {"type": "number", "exclusiveMinimum": 0},
                "samples": {"type": "integer", "minimum": 2},
            },
        },
        "lindblad": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dim_per_mode": {"type": "integer", "minimum": 2},
                "n_thermal": _NONNEG,
                "leakage_tol": {"oneOf": [{"type": "number", "exclusiveMinimum": 0}, {"type": "null"}]},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "path": {"type": ["string", "null"]},
                "format": {"enum": ["csv", "json"]},
            },
        },
    },
}


@dataclass(frozen=True)
class TimeGrid:
    t_max: float | None = None
    samples: int = 2000


@dataclass(frozen=True)
class OutputSpec:
    path: str | None = None
    format: str = "csv"


@dataclass(frozen=True)
class SweepConfig:
    axes: tuple
    target_mode: int | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved experiment description; all rates in rad/s."""

    system: str
    protocol: str
    cavities: tuple = ()
    coupling: DirectCoupling | CableCoupling | None = None
    chain: ChainSpec | None = None
    frame: float | None = None
    drive: DriveSpec | None = None
    observe_port: int | None = None
    initial_state: InitialState | None = None
    sweep: SweepConfig | None = None
    time_grid: TimeGrid = field(default_factory=TimeGrid)
    lindblad: FockConfig | None = None
    output: OutputSpec = field(default_factory=OutputSpec)
    units: str = "rad_per_s"

    @property
    def n_modes(self) -> int:
        return self.chain.n if self.chain is not None else len(self.cavities)

    @property
    def reference_frequency(self) -> float:
        if self.frame is not None:
            return self.frame
        if self.drive is not None:
            return self.drive.frequency
        if self.chain is not None:
            return self.chain.omega
        return self.cavities[0].omega


_PI_RE = re.compile(r"^\s*([-+0-9.eE]*)\s*pi\s*$")


def parse_angle(value) -> float:
    """Radians from a number or a ``"<x>pi"`` string."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    m = _PI_RE.match(str(value))
    if not m:
        raise ConfigError(f"cannot read angle {value!r}")
    coef = m.group(1)
    if coef in ("", "+"):
        return math.pi
    if coef == "-":
        return -math.pi
    try:
        return float(coef) * math.pi
    except ValueError:
        raise ConfigError(f"cannot read angle {value!r}") from None


def _complex(v) -> complex:
    if isinstance(v, list):
        return complex(v[0], v[1])
    return complex(v)


def _line_of(text: str, key) -> int | None:
    if not isinstance(key, str):
        return None
    for i, line in enumerate(text.splitlines(), 1):
        if f'"{key}"' in line:
            return i
    return None


def _validate(doc, text):
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if not errors:
        return
    err = errors[0]
    # oneOf failures hide the useful message one level down
    if err.context:
        err = min(err.context, key=lambda e: len(list(e.schema_path)))
    path = list(err.absolute_path)
    key = "/".join(str(p) for p in path) or "<root>"
    unknown = None
    if err.validator == "additionalProperties":
        m = re.search(r"'([^']+)' was unexpected", err.message)
        unknown = m.group(1) if m else None
    line = _line_of(text, unknown or (path[-1] if path else None))
    raise ConfigError(f"config schema violation at {key}: {err.message}", key=key, line=line)


def _has_rates(doc) -> bool:
    return any(k in doc for k in ("cavities", "coupling", "chain", "frame", "drive"))


def parse_config(text: str) -> ExperimentConfig:
    """Parse, validate and normalise a JSON config document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", line=exc.lineno, column=exc.colno) from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    _validate(doc, text)
    if _has_rates(doc) and "units" not in doc:
        raise ConfigError("a units flag is required when rates are given", key="units")
    try:
        return _resolve(doc)
    except ConfigError:
        raise
    except CavityError as exc:
        raise ConfigError(str(exc), origin=exc.code, **exc.context) from None


def _resolve(doc) -> ExperimentConfig:
    scale = UNIT_SCALE[doc.get("units", "rad_per_s")]
    system = doc["system"]
    protocol = doc["protocol"]

    cavities = tuple(
        CavityParams(
            c["omega"] * scale,
            c["kappa_i"] * scale,
            c.get("kappa_e", 0.0) * scale,
            c.get("gamma", 0.0) * scale,
        )
        for c in doc.get("cavities", [])
    )
    coupling = None
    if "coupling" in doc:
        c = doc["coupling"]
        if c["type"] == "direct":
            coupling = DirectCoupling(c["g"] * scale)
        else:
            coupling = CableCoupling(parse_angle(c["theta"]), float(c.get("gamma0L0", 0.0)))
    chain = None
    if "chain" in doc:
        c = doc["chain"]
        ki = c["kappa_i"]
        ki = tuple(k * scale for k in ki) if isinstance(ki, list) else ki * scale
        chain = ChainSpec(
            c["n"], c["g"] * scale, ki, c["kappa_e_first"] * scale, c["kappa_e_last"] * scale,
            c["omega"] * scale,
        )

    if system == "chain":
        if chain is None or cavities or coupling is not None:
            raise ConfigError("a chain system takes only a chain section", key="chain")
    else:
        if chain is not None:
            raise ConfigError("chain section given for a pairwise system", key="chain")
        if not cavities:
            raise ConfigError("cavities are required", key="cavities")
        if system == "cable" and (len(cavities) != 2 or not isinstance(coupling, CableCoupling)):
            raise ConfigError("a cable system needs two cavities and a cable coupling", key="coupling")
        if system == "direct":
            if isinstance(coupling, CableCoupling):
                raise ConfigError("a direct system needs a direct coupling", key="coupling")
            if len(cavities) == 2 and coupling is None:
                raise ConfigError("two cavities need a coupling", key="coupling")
            if len(cavities) == 1 and coupling is not None:
                raise ConfigError("a single cavity takes no coupling", key="coupling")
            if any(c.gamma > 0 for c in cavities):
                raise ConfigError(
                    "cable rates are meaningless without a cable", key="cavities",
                    origin="inconsistent_params",
                )

    frame = doc["frame"] * scale if "frame" in doc else None
    n_modes = chain.n if chain is not None else len(cavities)
    default_freq = frame if frame is not None else (chain.omega if chain else cavities[0].omega)

    drive = None
    if "drive" in doc:
        d = doc["drive"]
        if d["port"] >= n_modes:
            raise ConfigError("drive port out of range", key="drive/port")
        freq = d["frequency"] * scale if "frequency" in d else default_freq
        drive = DriveSpec(d["port"], _complex(d.get("amplitude", 1.0)), freq)

    init = None
    if "initial_state" in doc:
        s = doc["initial_state"]
        if "amplitudes" in s:
            init = InitialState(tuple(_complex(a) for a in s["amplitudes"]))
        else:
            if n_modes != 2:
                raise ConfigError("alpha/delta_phi initial states need two modes", key="initial_state")
            init = InitialState.coherent_pair(s["alpha"], parse_angle(s.get("delta_phi", 0.0)))
        if len(init.amplitudes) != n_modes:
            raise ConfigError("one initial amplitude per mode is required", key="initial_state")

    _check_protocol(protocol, system, drive, init, doc)

    observe = doc.get("observe_port")
    if observe is not None and observe >= n_modes:
        raise ConfigError("observe_port out of range", key="observe_port")

    sweep = None
    if "sweep" in doc:
        sweep = SweepConfig(
            tuple(_axis(a, scale) for a in doc["sweep"]["axes"]),
            doc["sweep"].get("target_mode"),
        )
    tg = doc.get("time_grid", {})
    time_grid = TimeGrid(tg.get("t_max"), tg.get("samples", 2000))
    lindblad = None
    if "lindblad" in doc or protocol == "lindblad":
        lb = doc.get("lindblad", {})
        lindblad = FockConfig(
            dim_per_mode=lb.get("dim_per_mode", 10),
            n_thermal=float(lb.get("n_thermal", 0.0)),
            modes=n_modes,
            leakage_tol=lb.get("leakage_tol", 1e-6),
        )
    out = doc.get("output", {})
    output = OutputSpec(out.get("path"), out.get("format", "csv"))
    return ExperimentConfig(
        system=system,
        protocol=protocol,
        cavities=cavities,
        coupling=coupling,
        chain=chain,
        frame=frame,
        drive=drive,
        observe_port=observe,
        initial_state=init,
        sweep=sweep,
        time_grid=time_grid,
        lindblad=lindblad,
        output=output,
        units="rad_per_s",
    )


def _check_protocol(protocol, system, drive, init, doc):
    if protocol in ("free_decay", "lindblad"):
        if drive is not None:
            raise ConfigError(f"{protocol} takes no drive", key="drive")
        if init is None and "sweep" not in doc:
            raise ConfigError(f"{protocol} needs an initial_state", key="initial_state")
    elif protocol == "steady_decay":
        if init is not None:
            raise ConfigError(
                "steady_decay derives its own initial state; remove initial_state",
                key="initial_state",
            )
    elif protocol == "driven":
        if drive is None:
            raise ConfigError("driven needs a drive", key="drive")
    if protocol == "lindblad" and system != "direct":
        raise ConfigError("the master-equation protocol covers direct coupling only", key="system")


def _axis(a, scale) -> SweepAxis:
    name = a["name"]
    if "values" in a:
        raw = a["values"]
        if any(k in a for k in ("start", "stop", "num")):
            raise ConfigError("give either values or start/stop/num", key=name)
        vals = [parse_angle(v) for v in raw]
    else:
        if not all(k in a for k in ("start", "stop", "num")):
            raise ConfigError("an axis needs values or start/stop/num", key=name)
        start, stop, num = parse_angle(a["start"]), parse_angle(a["stop"]), a["num"]
        endpoint = a.get("endpoint", True)
        if num == 1:
            vals = [start]
        else:
            step = (stop - start) / (num - 1 if endpoint else num)
            vals = [start + i * step for i in range(num)]
    if name in RATE_AXES:
        vals = [v * scale for v in vals]
    return SweepAxis(name, tuple(vals))


def _cx(z: complex):
    return z.real if z.imag == 0 else [z.real, z.imag]


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """Resolved config as a JSON-ready dict with every default made explicit."""
    doc = {"system": cfg.system, "protocol": cfg.protocol, "units": "rad_per_s"}
    if cfg.cavities:
        doc["cavities"] = [
            {"omega": c.omega, "kappa_i": c.kappa_i, "kappa_e": c.kappa_e, "gamma": c.gamma}
            for c in cfg.cavities
        ]
    if isinstance(cfg.coupling, DirectCoupling):
        doc["coupling"] = {"type": "direct", "g": cfg.coupling.g}
    elif isinstance(cfg.coupling, CableCoupling):
        doc["coupling"] = {
            "type": "cable",
            "theta": cfg.coupling.theta,
            "gamma0L0": cfg.coupling.gamma0L0,
        }
    if cfg.chain is not None:
        c = cfg.chain
        ki = c.kappa_i_per_cavity
        doc["chain"] = {
            "n": c.n,
            "g": c.g,
            "kappa_i": ki[0] if len(set(ki)) == 1 else list(ki),
            "kappa_e_first": c.kappa_e_first,
            "kappa_e_last": c.kappa_e_last,
            "omega": c.omega,
        }
    if cfg.frame is not None:
        doc["frame"] = cfg.frame
    if cfg.drive is not None:
        doc["drive"] = {
            "port": cfg.drive.port,
            "amplitude": _cx(complex(cfg.drive.amplitude)),
            "frequency": cfg.drive.frequency,
        }
    if cfg.observe_port is not None:
        doc["observe_port"] = cfg.observe_port
    if cfg.initial_state is not None:
        doc["initial_state"] = {"amplitudes": [_cx(a) for a in cfg.initial_state.amplitudes]}
    if cfg.sweep is not None:
        sw = {"axes": [{"name": a.name, "values": list(a.values)} for a in cfg.sweep.axes]}
        if cfg.sweep.target_mode is not None:
            sw["target_mode"] = cfg.sweep.target_mode
        doc["sweep"] = sw
    tg = {"samples": cfg.time_grid.samples}
    if cfg.time_grid.t_max is not None:
        tg["t_max"] = cfg.time_grid.t_max
    doc["time_grid"] = tg
    if cfg.lindblad is not None:
        doc["lindblad"] = {
            "dim_per_mode": cfg.lindblad.dim_per_mode,
            "n_thermal": cfg.lindblad.n_thermal,
            "leakage_tol": cfg.lindblad.leakage_tol,
        }
    doc["output"] = {"path": cfg.output.path, "format": cfg.output.format}
    return doc


def emit_config(cfg: ExperimentConfig) -> str:
    return json.dumps(config_to_dict(cfg), indent=2)


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
