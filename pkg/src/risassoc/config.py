"""TOML run configuration with [system], [channel], [solver] and [smoothing] sections."""
import dataclasses
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .channels import SystemConfig
from .joint import SolverParams
from .smoothing import SmoothingParams

REQUIRED_SYSTEM = ("J", "K", "M", "N", "bs_positions", "p_max_dbm", "noise_dbm")
_SYSTEM_KEYS = ("J", "K", "M", "N", "bs_positions", "ris_position", "ring_center", "ring_inner",
                "ring_outer", "ring_is_diameter", "p_max_dbm", "noise_dbm", "seed")
_CHANNEL_KEYS = ("path_loss_exponents", "rician_factors", "c0_db", "d0")

# full-scale profile, opt-in from the CLI
FULL_SCALE = dict(J=4, K=15, M=32, N=64,
                  bs_positions=[(0.0, 65.0), (60.0, 0.0), (-60.0, 0.0), (0.0, -65.0)])


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    system: SystemConfig = field(default_factory=SystemConfig)
    solver: SolverParams = field(default_factory=SolverParams)

    def digest(self):
        """Short stable hash of every setting, stamped on output rows."""
        payload = json.dumps({"system": dataclasses.asdict(self.system),
                              "solver": dataclasses.asdict(self.solver)},
                             sort_keys=True, default=str)
        return hashlib.sha256(payload.encode()).hexdigest()[:12]

    def with_system(self, **changes):
        return RunConfig(dataclasses.replace(self.system, **changes), self.solver)


def _check_keys(section, table, allowed):
    unknown = sorted(set(table) - set(allowed))
    if unknown:
        raise ConfigError(f"[{section}] unknown field '{unknown[0]}'")


def _floats(value, name):
    # TOML has no infinity literal shared by all writers; accept "inf" strings
    try:
        return tuple(math.inf if v in ("inf", "Inf", "INF") else float(v) for v in value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"field '{name}' must be a list of numbers") from exc


def from_dict(data):
    """Build a RunConfig from parsed TOML; errors name the offending field."""
    for name in data:
        if name not in ("system", "channel", "solver", "smoothing"):
            raise ConfigError(f"unknown section [{name}]")
    if "system" not in data:
        raise ConfigError("missing section [system]")
    system = dict(data["system"])
    _check_keys("system", system, _SYSTEM_KEYS)
    for name in REQUIRED_SYSTEM:
        if name not in system:
            raise ConfigError(f"[system] missing field '{name}'")
    channel = dict(data.get("channel", {}))
    _check_keys("channel", channel, _CHANNEL_KEYS)
    for name in ("path_loss_exponents", "rician_factors"):
        if name in channel:
            channel[name] = _floats(channel[name], name)
    smoothing = dict(data.get("smoothing", {}))
    _check_keys("smoothing", smoothing, [f.name for f in dataclasses.fields(SmoothingParams)])
    solver = dict(data.get("solver", {}))
    _check_keys("solver", solver, [f.name for f in dataclasses.fields(SolverParams)
                                   if f.name != "smoothing"])
    try:
        sc = SystemConfig(**system, **channel)
        sp = SolverParams(smoothing=SmoothingParams(**smoothing), **solver)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return RunConfig(sc, sp)


def load_config(path):
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config '{path}': {exc.strerror}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config '{path}': {exc}") from exc
    return from_dict(data)


def full_scale(run):
    return run.with_system(**FULL_SCALE)
