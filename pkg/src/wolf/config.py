"""Runtime configuration: defaults, TOML file loading, CLI overrides.

Keys mirror the module layout (gait.period, swing.height, wbid.mu,
estimation.contact_threshold, reactive.sigma, runtime.*, sim.*); the
config file merges under explicit overrides.
"""

import sys
from dataclasses import dataclass, field, fields

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .reactive import ReactiveConfig
from .sim import NoiseConfig, SimParams
from .wbid import Gains


@dataclass
class GaitConfig:
    name: str = "stand"
    period: float = None    # None keeps the built-in default
    duty: float = None
    offsets: list = None


@dataclass
class SwingConfig:
    height: float = 0.06
    reach_max: float = 0.15


@dataclass
class WbidConfig:
    mu: float = 0.7
    mode: str = "walking"
    gains: Gains = field(default_factory=Gains)


@dataclass
class EstimationConfig:
    contact_threshold: float = 5.0
    hysteresis: float = 2.0
    use_contact_sensors: bool = False
    velocity_cutoff_hz: float = 40.0


@dataclass
class RuntimeOptions:
    dt: float = 0.001
    staleness_timeout: float = 0.5
    operator_latch: bool = False     # latched operator lock instead of freshness
    fault_hold_ticks: int = 5
    fault_damping: float = 2.0       # N m s/rad on the controlled stop
    com_anchor_rate: float = 3.0     # 1/s pull of the CoM ref toward the center
    broadcast_hz: float = 50.0
    capture_current_swing: bool = False  # push delta also retargets active swings


@dataclass
class WolfConfig:
    gait: GaitConfig = field(default_factory=GaitConfig)
    swing: SwingConfig = field(default_factory=SwingConfig)
    wbid: WbidConfig = field(default_factory=WbidConfig)
    estimation: EstimationConfig = field(default_factory=EstimationConfig)
    reactive: ReactiveConfig = field(default_factory=ReactiveConfig)
    runtime: RuntimeOptions = field(default_factory=RuntimeOptions)
    sim: SimParams = field(default_factory=SimParams)
    noise: NoiseConfig = field(default_factory=NoiseConfig)


def _apply(section_obj, values, path):
    for key, val in values.items():
        if not hasattr(section_obj, key):
            raise KeyError(f"unknown config key '{path}.{key}'")
        cur = getattr(section_obj, key)
        if hasattr(cur, "__dataclass_fields__") and isinstance(val, dict):
            _apply(cur, val, f"{path}.{key}")
        else:
            setattr(section_obj, key, val)


def load_config(path=None, overrides=None):
    """Defaults, overlaid with a TOML file, overlaid with overrides.

    overrides uses dotted keys: {"wbid.mu": 0.6, "reactive.sigma": 0.8}.
    """
    cfg = WolfConfig()
    if path is not None:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
        for section, values in data.items():
            if not hasattr(cfg, section):
                raise KeyError(f"unknown config section '{section}'")
            _apply(getattr(cfg, section), values, section)
    for dotted, val in (overrides or {}).items():
        obj = cfg
        *heads, last = dotted.split(".")
        for head in heads:
            if not hasattr(obj, head):
                raise KeyError(f"unknown config key '{dotted}'")
            obj = getattr(obj, head)
        if not hasattr(obj, last):
            raise KeyError(f"unknown config key '{dotted}'")
        setattr(obj, last, val)
    return cfg


def set_param(cfg, dotted, value):
    """Live parameter update (the 'param' command path)."""
    obj = cfg
    *heads, last = dotted.split(".")
    for head in heads:
        obj = getattr(obj, head)
    if not hasattr(obj, last):
        raise KeyError(f"unknown parameter '{dotted}'")
    current = getattr(obj, last)
    if isinstance(current, bool):
        value = bool(value)
    elif isinstance(current, (int, float)) and current is not None:
        value = type(current)(value)
    setattr(obj, last, value)
