"""Flat INI-style run configuration.

A config file is ``key = value`` lines, optionally under any ``[section]``
headers (sections are ignored, keys are global). Unknown keys are errors.
"""

from __future__ import annotations

import configparser
import itertools
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .lti import RationalTF
from .platoon import MULTIOBJECTIVE, STRUCTURES, PlatoonConfig
from .simulator import STANDARD_PROFILE, ScenarioSpec
from .synthesis import Controller, SynthOptions, WeightSet, default_weights

COMMANDS = ("synth", "verify", "simulate", "sweep")

#: key -> (default, help); the default ``None`` means "derived" (see help text)
KEYS = {
    "mode": ("ACC", "ACC or CACC"),
    "tau": (0.1, "actuator time lag tau [s]"),
    "phi": (0.2, "actuator delay phi [s]; simulation needs a whole number of ts steps"),
    "theta": (0.15, "communication delay theta [s] (CACC)"),
    "h": (None, "time headway [s]; default 1.0 for ACC, 0.5 for CACC"),
    "d0": (0.0, "standstill distance [m]"),
    "m": (5, "number of followers"),
    "ts": (0.1, "sampling period [s]"),
    "pade_order": (4, "Pade order used for the delays"),
    "discretization": ("zoh", "plant discretization: zoh or tustin"),
    "design": (MULTIOBJECTIVE, "synth problem: multiobjective or traditional"),
    "order": (5, "controller order (1..10)"),
    "restarts": (10, "multi-start count"),
    "max_iters": (20000, "Nelder-Mead evaluation budget per run"),
    "seed": (0, "random seed for start points"),
    "penalty0": (100.0, "initial penalty on ||T|| > 1"),
    "weights": ("default", "'default' or a JSON file with ws/wt[/wu] num/den lists"),
    "duration": (70.0, "simulated time [s]"),
    "scenario": ("standard", "lead profile: standard, zero or sine:<freq_hz>[:<amplitude>]"),
    "lead_scale": (1.0, "multiplier on the lead acceleration profile"),
    "v0": (15.0, "initial speed [m/s]"),
    "surplus": (0.0, "initial gap surplus over the desired gap [m]"),
    "vehicle_length": (5.0, "vehicle length [m]"),
    "comm_delay_rounding": ("ceil", "fractional theta/ts: ceil or linear"),
    "sweep_h": ("", "comma-separated headways for sweep"),
    "sweep_tau": ("", "comma-separated time lags for sweep"),
    "sweep_phi": ("", "comma-separated actuator delays for sweep"),
    "sweep_theta": ("", "comma-separated communication delays for sweep"),
    "out_dir": ("out", "output directory"),
}

_PLATOON_KEYS = ("mode", "tau", "phi", "theta", "h", "d0", "m", "ts", "pade_order", "discretization")


def keys_help():
    lines = ["config keys (flat key = value):"]
    for k, (default, text) in KEYS.items():
        d = "" if default is None else f" [default: {default}]"
        lines.append(f"  {k:<20} {text}{d}")
    return "\n".join(lines)


@dataclass(frozen=True, eq=False)
class RunConfig:
    command: str
    platoon: PlatoonConfig
    weights: WeightSet
    synth_opts: SynthOptions
    scenario: ScenarioSpec
    sweep: dict = field(default_factory=dict)
    out_dir: str = "out"
    seed: int = 0
    design: str = MULTIOBJECTIVE
    weights_source: str = "default"

    def sweep_grid(self):
        """Cartesian grid over ``h, tau, phi, theta``; unset axes use the config value."""
        base = self.platoon.flat()
        axes = [self.sweep.get(k) or [base[k]] for k in ("h", "tau", "phi", "theta")]
        return [dict(zip(("h", "tau", "phi", "theta"), p)) for p in itertools.product(*axes)]


def read_flat(path):
    """Parse a config file into a ``{key: str}`` dict."""
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path) as fh:
        text = fh.read()
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string("[__top__]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    out = {}
    for sec in parser.sections():
        out.update(parser[sec])
    unknown = sorted(set(out) - set(KEYS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return out


def _num_list(text, key):
    if not text.strip():
        return []
    try:
        return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"{key} must be a comma-separated list of numbers") from None


def parse_scenario(text, duration, **kw):
    kind, _, rest = text.strip().partition(":")
    kind = kind.lower()
    if kind == "standard":
        return ScenarioSpec(duration=duration, profile=STANDARD_PROFILE, **kw)
    if kind == "zero":
        return ScenarioSpec.zero(duration=duration, **kw)
    if kind == "sine":
        parts = [p for p in rest.split(":") if p]
        try:
            vals = [float(p) for p in parts]
        except ValueError:
            vals = []
        if not 1 <= len(vals) <= 2 or vals[0] <= 0:
            raise ConfigError("scenario sine needs sine:<freq_hz>[:<amplitude>]")
        return ScenarioSpec.sine(*vals, duration=duration, **kw)
    raise ConfigError(f"unknown scenario {text!r}")


def _tf_from_json(obj, ts, name):
    try:
        return RationalTF(obj["num"], obj["den"], 0.0, ts)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"weight {name}: {exc}") from None


def load_weights(source, ts, base_dir="."):
    if source == "default":
        return default_weights(ts)
    path = source if os.path.isabs(source) else os.path.join(base_dir, source)
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read weights file {source}: {exc}") from None
    if "ws" not in doc or "wt" not in doc:
        raise ConfigError("weights file needs ws and wt entries")
    wu = _tf_from_json(doc["wu"], ts, "wu") if doc.get("wu") else None
    return WeightSet(_tf_from_json(doc["ws"], ts, "ws"), _tf_from_json(doc["wt"], ts, "wt"), wu)


def _typed(raw, key, cast):
    text = raw.get(key)
    default = KEYS[key][0]
    if text is None:
        return default
    try:
        return cast(text)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {text!r}") from None


def build_run_config(command, raw, base_dir=".", seed=None, out_dir=None):
    """Validate a flat key dict into a :class:`RunConfig`."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    pk = {k: raw[k] for k in _PLATOON_KEYS if k in raw}
    try:
        platoon = PlatoonConfig.from_flat(**pk)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    seed = _typed(raw, "seed", int) if seed is None else int(seed)
    design = _typed(raw, "design", str).strip().lower()
    if design not in STRUCTURES:
        raise ConfigError(f"design must be one of {STRUCTURES}")
    opts = SynthOptions(
        order=_typed(raw, "order", int),
        restarts=_typed(raw, "restarts", int),
        max_iters=_typed(raw, "max_iters", int),
        seed=seed,
        penalty0=_typed(raw, "penalty0", float),
    )
    weights_source = _typed(raw, "weights", str).strip()
    weights = load_weights(weights_source, platoon.ts, base_dir)

    scenario = parse_scenario(
        _typed(raw, "scenario", str),
        _typed(raw, "duration", float),
        scale=_typed(raw, "lead_scale", float),
        v0=_typed(raw, "v0", float),
        surplus=_typed(raw, "surplus", float),
        vehicle_length=_typed(raw, "vehicle_length", float),
        comm_delay_rounding=_typed(raw, "comm_delay_rounding", str).strip().lower(),
    )
    sweep = {
        k: _num_list(raw.get(f"sweep_{k}", ""), f"sweep_{k}")
        for k in ("h", "tau", "phi", "theta")
    }
    if command == "sweep" and not any(sweep.values()):
        raise ConfigError("sweep needs at least one of sweep_h, sweep_tau, sweep_phi, sweep_theta")
    out = out_dir if out_dir is not None else _typed(raw, "out_dir", str)
    return RunConfig(
        command, platoon, weights, opts, scenario, sweep, out, seed, design, weights_source
    )


def load_run_config(command, path, seed=None, out_dir=None):
    raw = read_flat(path)
    return build_run_config(
        command, raw, os.path.dirname(os.path.abspath(path)), seed=seed, out_dir=out_dir
    )


# ---------------------------------------------------------------------------
# controller files
# ---------------------------------------------------------------------------


def controller_to_dict(K, cfg, extra=None):
    doc = {
        "ts": K.ts,
        "order": K.order,
        "structure": K.structure,
        "num": [float(c) for c in K.num],
        "den": [float(c) for c in K.den],
        "config": cfg.flat(),
    }
    if extra:
        doc.update(extra)
    return doc


def controller_from_dict(doc):
    try:
        ts = float(doc["ts"])
        num = np.asarray(doc["num"], dtype=float)
        den = np.asarray(doc["den"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad controller document: {exc}") from None
    structure = doc.get("structure", MULTIOBJECTIVE)
    if structure not in STRUCTURES:
        raise ConfigError(f"unknown controller structure {structure!r}")
    if not np.any(num):
        order = int(doc.get("order", max(len(den) - 1, 1)))
        return Controller.zero(order, ts, structure)
    try:
        return Controller.from_coefficients(num, den, ts, structure)
    except ValueError as exc:
        raise ConfigError(f"bad controller: {exc}") from None


def load_controller(path, cfg=None):
    """Read a controller JSON; with ``cfg`` given its ts must match."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read controller file {path}: {exc}") from None
    K = controller_from_dict(doc)
    if cfg is not None and not np.isclose(K.ts, cfg.ts, rtol=1e-9, atol=0.0):
        raise ConfigError(f"controller ts={K.ts} does not match config ts={cfg.ts}")
    return K
