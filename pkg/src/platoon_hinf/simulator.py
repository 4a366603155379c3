"""Sampled-data platoon simulation.

Every vehicle follows ``a' = (u(t - phi) - a)/tau`` with ``p' = v, v' = a``,
stepped exactly under a zero-order hold. Followers run the discrete
controller on their spacing error; in CACC mode they add the predecessor's
commanded acceleration, received through the communication delay and
filtered by ``1/H``.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from . import _kernels
from ._fmt import dump_json, fmt
from .errors import ConfigError, DivergenceError
from .platoon import CACC, MULTIOBJECTIVE, loop_blocks

log = logging.getLogger(__name__)

_STEP_TOL = 1e-9
#: velocity overshoot tolerated after a lead step, as a fraction of the step
OVERSHOOT_TOL = 0.01


@dataclass(frozen=True)
class Segment:
    """``u0(t)`` on ``start <= t < end``.

    ``kind`` is ``"const"`` (value ``amplitude``), ``"multisine"``
    (``amplitude * sum_k sin(k*base*t)`` for ``k = 1..harmonics``, ``base`` in
    rad/s) or ``"sine"`` (``amplitude * sin(2 pi base t)``, ``base`` in Hz).
    """

    start: float
    end: float
    kind: str
    amplitude: float
    base: float = 0.0
    harmonics: int = 1

    def __post_init__(self):
        if self.kind not in ("const", "multisine", "sine"):
            raise ConfigError(f"unknown segment kind {self.kind!r}")
        if not self.end > self.start:
            raise ConfigError("segment end must exceed its start")

    def value(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "const":
            out = np.full_like(t, self.amplitude)
        elif self.kind == "sine":
            out = self.amplitude * np.sin(2.0 * np.pi * self.base * t)
        else:
            k = np.arange(1, self.harmonics + 1)
            out = self.amplitude * np.sin(np.multiply.outer(t, k * self.base)).sum(axis=-1)
        return np.where((t >= self.start) & (t < self.end), out, 0.0)


STANDARD_PROFILE = (
    Segment(5.0, 10.0, "const", 1.5),
    Segment(25.0, 30.0, "const", -1.5),
    Segment(40.0, 50.0, "multisine", 0.5, 0.1, 5),
)


def lead_accel(t, profile=STANDARD_PROFILE, scale=1.0):
    """Leader's commanded acceleration; scalar in, float out, arrays broadcast."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("lead_accel is defined for t >= 0")
    out = np.zeros_like(t)
    for seg in profile:
        out = out + seg.value(t)
    out = scale * out
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ScenarioSpec:
    duration: float = 70.0
    profile: tuple = STANDARD_PROFILE
    scale: float = 1.0
    v0: float = 15.0
    surplus: float = 0.0
    vehicle_length: float = 5.0
    # "ceil" rounds theta/ts up to whole steps, "linear" interpolates between slots
    comm_delay_rounding: str = "ceil"

    def __post_init__(self):
        if not self.duration > 0:
            raise ConfigError("scenario duration must be > 0")
        if self.vehicle_length < 0 or self.surplus < 0:
            raise ConfigError("vehicle_length and surplus must be >= 0")
        if self.comm_delay_rounding not in ("ceil", "linear"):
            raise ConfigError("comm_delay_rounding must be ceil or linear")
        object.__setattr__(self, "profile", tuple(self.profile))

    @classmethod
    def standard(cls, **kw):
        return cls(profile=STANDARD_PROFILE, **kw)

    @classmethod
    def zero(cls, **kw):
        return cls(profile=(), **kw)

    @classmethod
    def sine(cls, freq_hz, amplitude=0.1, **kw):
        """Lead acceleration ``amplitude * sin(2 pi f t)`` for the whole run."""
        duration = kw.setdefault("duration", 200.0)
        seg = Segment(0.0, duration + 1.0, "sine", amplitude, freq_hz)
        return cls(profile=(seg,), **kw)

    def lead(self, t):
        return lead_accel(t, self.profile, self.scale)


@dataclass(frozen=True)
class VehicleState:
    p: float
    v: float
    a: float

    def as_array(self):
        return np.array([self.p, self.v, self.a])


def vehicle_zoh(params, ts):
    """``(Phi, Gamma)`` of the exact one-step map of the lag/double-integrator chain."""
    if not ts > 0:
        raise ConfigError("ts must be > 0")
    m = np.zeros((4, 4))
    m[0, 1] = 1.0
    m[1, 2] = 1.0
    m[2, 2] = -1.0 / params.tau
    m[2, 3] = 1.0 / params.tau
    e = expm(m * ts)
    return e[:3, :3], e[:3, 3]


def delay_steps(delay, ts, what="delay"):
    """Exact step count for ``delay``; raises if it is not a whole number of steps."""
    n = delay / ts
    k = round(n)
    if abs(n - k) > _STEP_TOL:
        raise ConfigError(f"{what} {delay} s is not an integer multiple of ts={ts} s")
    return int(k)


def step_vehicle(state, u_delayed, params, ts):
    """Advance one sample with ``u_delayed`` (already delayed by ``phi``) held constant."""
    phi_mat, gam = vehicle_zoh(params, ts)
    x = phi_mat @ state.as_array() + gam * u_delayed
    return VehicleState(*map(float, x))


@dataclass(frozen=True, eq=False)
class PlatoonTrace:
    """Time series, one column per vehicle (leader is column 0)."""

    t: np.ndarray
    p: np.ndarray
    v: np.ndarray
    a: np.ndarray
    jerk: np.ndarray
    u: np.ndarray
    e: np.ndarray
    d: np.ndarray
    timegap: np.ndarray
    h: float
    profile: tuple = ()
    notes: tuple = field(default=())

    @property
    def n_vehicles(self):
        return self.p.shape[1]


def _comm_buffer(theta, ts, rounding):
    n = theta / ts
    if abs(n - round(n)) <= _STEP_TOL:
        return int(round(n)), 0.0, None
    if rounding == "ceil":
        k = math.ceil(n)
        return k, 0.0, f"communication delay {theta} s realized as {k} steps ({k * ts:.6g} s)"
    k = math.floor(n)
    return k, n - k, f"communication delay {theta} s linearly interpolated between slots"


def _assemble(cfg, scenario, t, outs, notes):
    p, v, a, u, _ = outs
    L = scenario.vehicle_length
    jerk = np.zeros_like(a)
    jerk[1:] = np.diff(a, axis=0) / cfg.ts
    d = np.full_like(p, np.nan)
    d[:, 1:] = p[:, :-1] - p[:, 1:] - L
    e = np.full_like(p, np.nan)
    e[:, 1:] = d[:, 1:] - cfg.policy.d0 - cfg.policy.h * v[:, 1:]
    with np.errstate(divide="ignore", invalid="ignore"):
        timegap = np.where(v > 1e-9, d / v, np.nan)
    return PlatoonTrace(
        t, p, v, a, jerk, u, e, d, timegap, cfg.policy.h, scenario.profile, tuple(notes)
    )


def simulate(cfg, K, scenario=None):
    """Simulate one leader and ``cfg.m`` followers under controller ``K``."""
    scenario = scenario or ScenarioSpec()
    ts = cfg.ts
    k_tf = getattr(K, "tf", K)
    structure = getattr(K, "structure", MULTIOBJECTIVE)
    if not k_tf.is_discrete or not math.isclose(k_tf.ts, ts, rel_tol=1e-9):
        raise ConfigError(f"controller must be discrete at ts={ts}")
    phi_steps = delay_steps(cfg.vehicle.phi, ts, "actuator delay phi")
    phi_mat, gam = vehicle_zoh(cfg.vehicle, ts)
    notes = []

    n_steps = int(math.floor(scenario.duration / ts + _STEP_TOL)) + 1
    t = np.arange(n_steps) * ts
    u_lead = scenario.lead(t)

    # controller as a difference equation on a monic denominator
    order = len(k_tf.den) - 1
    kn = np.zeros(order + 1)
    kn[: len(k_tf.num)] = k_tf.num
    kd = np.asarray(k_tf.den, dtype=float)

    h = cfg.policy.h
    spacing = scenario.vehicle_length + cfg.policy.d0 + h * scenario.v0
    if structure == MULTIOBJECTIVE:
        h_loop, offset = h, scenario.vehicle_length + cfg.policy.d0
    else:
        # constant-spacing loop held at the initial desired gap
        h_loop, offset = 0.0, spacing

    cacc = cfg.mode == CACC
    if cacc:
        hinv = loop_blocks(cfg, structure, True).hinv
        ffd = np.asarray(hinv.den, dtype=float)
        ffn = np.zeros(len(ffd))
        ffn[: len(hinv.num)] = hinv.num
        th_lo, th_frac, note = _comm_buffer(cfg.link.theta, ts, scenario.comm_delay_rounding)
        if note:
            log.info(note)
            notes.append(note)
    else:
        ffn, ffd, th_lo, th_frac = np.zeros(1), np.ones(1), 0, 0.0

    n_veh = cfg.m + 1
    x0 = np.zeros((n_veh, 3))
    x0[:, 1] = scenario.v0
    x0[:, 0] = -np.arange(n_veh) * (spacing + scenario.surplus)

    outs, (k_bad, i_bad) = _kernels.simulate_platoon(
        phi_mat, gam, kn, kd, ffn, ffd, u_lead, x0, h_loop, offset,
        phi_steps, th_lo, th_frac, cacc, n_steps,
    )
    if k_bad >= 0:
        partial = [o[: k_bad + 1] for o in outs]
        trace = _assemble(cfg, scenario, t[: k_bad + 1], partial, notes)
        raise DivergenceError(i_bad, float(t[k_bad]), trace)
    return _assemble(cfg, scenario, t, outs, notes)


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MetricsReport:
    max_abs_e: list
    max_abs_a: list
    max_abs_jerk: list
    min_gap: list
    min_timegap: list
    onset_time: list
    overshoot: list
    overshoot_flags: list
    string_stable: bool
    notes: list

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _nanmax(x):
    return float(np.max(x)) if np.isfinite(x).any() else math.nan


def _nanmin(x):
    x = x[np.isfinite(x)]
    return float(np.min(x)) if x.size else math.nan


def _step_windows(profile, duration):
    """``(start, end, sign)`` for each constant segment, open until the next segment."""
    starts = sorted(s.start for s in profile)
    out = []
    for seg in profile:
        if seg.kind != "const" or seg.amplitude == 0.0:
            continue
        later = [s for s in starts if s > seg.start]
        end = min(later) if later else duration
        out.append((seg.start, end, math.copysign(1.0, seg.amplitude)))
    return out


def string_stable_errors(max_e, quiet=1e-12):
    """Strict decrease of follower max errors.

    Vacuous for fewer than two followers. A pair in which neither vehicle was
    excited (both maxima below ``quiet``) does not count as amplification.
    """
    return all(b < a or (a <= quiet and b <= quiet) for a, b in zip(max_e, max_e[1:]))


def trace_metrics(trace, onset_threshold=0.01):
    """Per-vehicle summary plus the time-domain string-stability verdict.

    Follower lists start at vehicle 1; leader-only quantities (``max_abs_a``,
    ``max_abs_jerk``, ``onset_time``, ``overshoot``) include the leader.
    """
    if trace.t.size == 0:
        raise ValueError("empty trace")
    n = trace.n_vehicles
    max_e = [_nanmax(np.abs(trace.e[:, i])) for i in range(1, n)]
    notes = list(trace.notes)
    if n - 1 < 2:
        notes.append("fewer than two followers: string stability holds vacuously")
    elif max(max_e) <= 1e-12:
        notes.append("no spacing error reached the followers: verdict is vacuous")

    onset = []
    for i in range(n):
        idx = np.nonzero(np.abs(trace.a[:, i]) > onset_threshold)[0]
        onset.append(float(trace.t[idx[0]]) if idx.size else math.nan)

    # velocity overshoot past the leader's settled speed after each step
    duration = float(trace.t[-1])
    overshoot = [0.0] * n
    for start, end, sign in _step_windows(trace.profile, duration):
        win = (trace.t >= start) & (trace.t < end)
        if not win.any():
            continue
        k_end = np.nonzero(win)[0][-1]
        k0 = np.nonzero(win)[0][0]
        target = trace.v[k_end, 0]
        dv = abs(target - trace.v[k0, 0])
        if dv <= 0:
            continue
        for i in range(n):
            over = float(np.max(sign * (trace.v[win, i] - target))) / dv
            overshoot[i] = max(overshoot[i], over)

    return MetricsReport(
        max_abs_e=max_e,
        max_abs_a=[_nanmax(np.abs(trace.a[:, i])) for i in range(n)],
        max_abs_jerk=[_nanmax(np.abs(trace.jerk[:, i])) for i in range(n)],
        min_gap=[_nanmin(trace.d[:, i]) for i in range(1, n)],
        min_timegap=[_nanmin(trace.timegap[:, i]) for i in range(1, n)],
        onset_time=onset,
        overshoot=overshoot,
        overshoot_flags=[o > OVERSHOOT_TOL for o in overshoot],
        string_stable=string_stable_errors(max_e),
        notes=notes,
    )


def steady_state_amplitude(t, x, freq_hz, discard=0.5):
    """Least-squares amplitude of the ``freq_hz`` component over the tail of ``x``.

    The first ``discard`` fraction of the record is dropped as transient.
    """
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    keep = t >= t[0] + discard * (t[-1] - t[0])
    w = 2.0 * np.pi * freq_hz
    tk = t[keep]
    basis = np.column_stack([np.ones_like(tk), tk - tk[0], np.sin(w * tk), np.cos(w * tk)])
    coef = np.linalg.lstsq(basis, x[keep], rcond=None)[0]
    return float(np.hypot(coef[2], coef[3]))


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------


def write_trace_csv(trace, path):
    cols = ("p", "v", "a", "jerk", "u", "e", "d", "timegap")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("t", "vehicle") + cols)
        series = [getattr(trace, c) for c in cols]
        for k, tk in enumerate(trace.t):
            for i in range(trace.n_vehicles):
                w.writerow([fmt(tk), i] + [fmt(s[k, i]) for s in series])


def write_metrics_json(metrics, path, extra=None):
    doc = metrics.to_dict()
    if extra:
        doc.update(extra)
    dump_json(doc, path)


__all__ = [
    "MetricsReport",
    "STANDARD_PROFILE",
    "PlatoonTrace",
    "ScenarioSpec",
    "Segment",
    "VehicleState",
    "lead_accel",
    "simulate",
    "step_vehicle",
    "steady_state_amplitude",
    "trace_metrics",
    "vehicle_zoh",
    "write_metrics_json",
    "write_trace_csv",
]
