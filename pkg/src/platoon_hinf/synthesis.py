"""Fixed-order controller search for the traditional and multi-objective problems.

The controller is ``K(z) = n(z)/d(z)`` with ``deg d = order``, ``d`` monic and
``deg n <= order``. Its parameter vector is ``[n_0..n_order, d_0..d_{order-1}]``.

Search is Nelder-Mead on a dense frequency grid with an exact penalty on the
string-stability constraint, restarted from PD-like and random stable
initial points. Every reported objective value is recomputed from scratch
with :func:`platoon_hinf.lti.hinf_norm`.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.optimize import minimize

from . import _kernels
from .errors import ConfigError, SynthesisFailure
from .lti import (
    INFINITE,
    RationalTF,
    default_grid,
    evaluate as evaluate_tf,
    hinf_norm,
    is_stable,
    peak_gain,
    spectral_radius,
    tf_mul,
)
from .platoon import (
    MULTIOBJECTIVE,
    TRADITIONAL,
    characteristic_polynomial,
    closed_loops,
    control_sensitivity,
    loop_blocks,
)

log = logging.getLogger(__name__)

#: ``||T||_inf`` slack accepted when certifying the string-stability constraint.
T_TOL = 1e-6
BARRIER = 1e6


@dataclass(frozen=True, eq=False)
class WeightSet:
    ws: RationalTF
    wt: RationalTF
    wu: RationalTF | None = None

    def __post_init__(self):
        ts = self.ws.ts
        for name, w in (("ws", self.ws), ("wt", self.wt), ("wu", self.wu)):
            if w is None:
                continue
            if not w.is_discrete or not math.isclose(w.ts, ts, rel_tol=1e-12):
                raise ConfigError(f"weight {name} must be discrete with a common ts")
            if not w.is_proper or not is_stable(w):
                raise ConfigError(f"weight {name} must be stable and proper")

    @property
    def ts(self):
        return self.ws.ts


def default_weights(ts=0.1):
    """``W_S = 0.035 z^2/(z-0.99)^2`` and ``W_T = 0.3 (z-0.99)^2/z^2``."""
    if not ts > 0:
        raise ConfigError("ts must be > 0")
    sq = P.polypow([-0.99, 1.0], 2)
    z2 = [0.0, 0.0, 1.0]
    return WeightSet(
        ws=RationalTF(0.035 * np.asarray(z2), sq, 0.0, ts),
        wt=RationalTF(0.3 * sq, z2, 0.0, ts),
    )


@dataclass(frozen=True, eq=False)
class Controller:
    """Discrete fixed-order controller and its optimizer coordinates."""

    tf: RationalTF
    order: int
    params: np.ndarray
    structure: str = MULTIOBJECTIVE

    @classmethod
    def from_params(cls, params, order, ts, structure=MULTIOBJECTIVE):
        x = np.array(params, dtype=float)
        if x.shape != (2 * order + 1,):
            raise ValueError(f"expected {2 * order + 1} parameters for order {order}")
        num = x[: order + 1]
        den = np.concatenate([x[order + 1 :], [1.0]])
        x.flags.writeable = False
        return cls(RationalTF(num, den, 0.0, ts), order, x, structure)

    @classmethod
    def from_coefficients(cls, num, den, ts, structure=MULTIOBJECTIVE):
        """From ascending coefficients; ``den`` is made monic and padded to the order."""
        num = np.atleast_1d(np.asarray(num, dtype=float))
        den = np.atleast_1d(np.asarray(den, dtype=float))
        tf = RationalTF(num, den, 0.0, ts)
        order = len(tf.den) - 1
        if len(tf.num) > order + 1:
            raise ValueError("controller must be proper")
        n = np.zeros(order + 1)
        n[: len(tf.num)] = tf.num
        return cls.from_params(np.concatenate([n, tf.den[:-1]]), order, ts, structure)

    @classmethod
    def zero(cls, order, ts, structure=MULTIOBJECTIVE):
        x = np.zeros(2 * order + 1)
        return cls.from_params(x, order, ts, structure)

    @property
    def ts(self):
        return self.tf.ts

    @property
    def num(self):
        return self.params[: self.order + 1]

    @property
    def den(self):
        return np.concatenate([self.params[self.order + 1 :], [1.0]])


@dataclass(frozen=True)
class SynthOptions:
    order: int = 5
    restarts: int = 10
    max_iters: int = 20000
    seed: int = 0
    penalty0: float = 100.0
    max_penalty_doublings: int = 6
    # search-time pole-radius bound; certification still uses strict |z| < 1
    max_pole_radius: float = 0.999
    points_per_decade: int = 2000
    initial: Controller | None = None

    def __post_init__(self):
        if not 1 <= self.order <= 10:
            raise ConfigError("controller order must be within 1..10")
        if self.restarts < 1 or self.max_iters < 1:
            raise ConfigError("restarts and max_iters must be >= 1")
        if not self.penalty0 > 0:
            raise ConfigError("penalty0 must be > 0")


@dataclass(frozen=True)
class ObjectiveValues:
    gamma_s: float
    gamma_t: float
    gamma_u: float | None
    t_norm: float
    stable: bool

    @property
    def feasible(self):
        return (
            self.stable
            and self.gamma_s < 1.0
            and self.gamma_t < 1.0
            and self.t_norm <= 1.0 + T_TOL
        )

    def multiobjective(self):
        return self.gamma_s + self.gamma_t

    def traditional(self):
        vals = [self.gamma_s, self.gamma_t]
        if self.gamma_u is not None:
            vals.append(self.gamma_u)
        return max(vals)


@dataclass(frozen=True, eq=False)
class SynthesisResult:
    controller: Controller
    objectives: ObjectiveValues
    feasible: bool
    iterations: int
    restarts_used: int
    objective: float
    # (feasible, objective) of the best-so-far after each restart
    history: tuple = field(default=())


def _unstable_values(wu):
    return ObjectiveValues(INFINITE, INFINITE, INFINITE if wu is not None else None, INFINITE, False)


def evaluate(cfg, W, K, points_per_decade=2000):
    """Certified channel norms of the closed loop under ``K``."""
    s, t = closed_loops(cfg, K)
    u = control_sensitivity(cfg, K)
    if not (is_stable(s) and is_stable(t) and is_stable(u)):
        return _unstable_values(W.wu)
    gs = hinf_norm(tf_mul(W.ws, s), points_per_decade)
    gt = hinf_norm(tf_mul(W.wt, t), points_per_decade)
    gu = hinf_norm(tf_mul(W.wu, u), points_per_decade) if W.wu is not None else None
    tn = hinf_norm(t, points_per_decade)
    return ObjectiveValues(gs, gt, gu, tn, True)


class GridObjective:
    """Fast objective on a fixed frequency grid; all fixed blocks precomputed."""

    def __init__(self, cfg, W, order, structure, points_per_decade=2000, max_pole_radius=1.0):
        self.cfg = cfg
        self.order = order
        self.structure = structure
        self.max_pole_radius = max_pole_radius
        b = loop_blocks(cfg, structure, True)
        self.blocks = b
        grid = default_grid(b.g, points_per_decade)
        self.x = np.exp(2j * np.pi * grid * cfg.ts)
        pv = _kernels.polyval
        self.g_num = pv(b.g.num, self.x)
        self.l_num = pv(b.l.num, self.x)
        self.l_den = pv(b.l.den, self.x)
        if b.cacc:
            d = evaluate_tf(b.d, grid)
            self.a = 1.0 - d
            self.b = evaluate_tf(b.ff, grid)
        else:
            self.a = np.ones_like(self.x)
            self.b = np.zeros_like(self.x)
        self.ws2 = np.abs(evaluate_tf(W.ws, grid)) ** 2
        self.wt2 = np.abs(evaluate_tf(W.wt, grid)) ** 2
        self.ld = b.l.den
        self.ln = b.l.num
        self.nfev = 0

    def split(self, x):
        return x[: self.order + 1], np.concatenate([x[self.order + 1 :], [1.0]])

    def char(self, x):
        kn, kd = self.split(x)
        return P.polyadd(P.polymul(self.ld, kd), P.polymul(self.ln, kn))

    def pole_radius(self, x):
        return spectral_radius(self.char(x), True)

    def peaks(self, x):
        kn, kd = self.split(x)
        return _kernels.closed_loop_peaks(
            kn, kd, self.g_num, self.l_num, self.l_den, self.a, self.b, self.ws2, self.wt2, self.x
        )

    def __call__(self, x, penalty, traditional=False):
        self.nfev += 1
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)):
            return 2 * BARRIER
        char = self.char(x)
        if not _kernels.schur_stable(char, self.max_pole_radius):
            # roots only off the fast path; the overshoot gives NM a slope back
            r = spectral_radius(char, True)
            return BARRIER + max(r - self.max_pole_radius, 0.0)
        gs, gt, tn = self.peaks(x)
        if traditional:
            return max(gs, gt)
        return gs + gt + penalty * max(0.0, tn - 1.0) ** 2


def _pd_init(rng, order, ts):
    kp = 10.0 ** rng.uniform(-1.0, 1.0)
    kd = 10.0 ** rng.uniform(-1.0, 1.0)
    # kp + kd (z-1)/(ts z), padded with z^(order-1) in numerator and denominator
    num = np.zeros(order + 1)
    num[order] = kp + kd / ts
    num[order - 1] = -kd / ts
    den = np.zeros(order)
    return np.concatenate([num, den]) + rng.normal(0.0, 1e-2, 2 * order + 1)


def _random_stable_init(rng, order):
    roots = []
    while len(roots) < order:
        if order - len(roots) >= 2 and rng.random() < 0.5:
            r = rng.uniform(0.0, 0.9)
            a = rng.uniform(0.0, np.pi)
            roots += [r * np.exp(1j * a), r * np.exp(-1j * a)]
        else:
            roots.append(rng.uniform(-0.9, 0.9))
    den = np.real(np.poly(roots))[::-1]
    num = rng.normal(0.0, 1.0, order + 1) * 10.0 ** rng.uniform(-1.0, 1.0)
    return np.concatenate([num, den[:-1]])


def initial_points(opts, ts):
    """Deterministic start vectors: even restarts PD-like, odd restarts random stable."""
    seeds = np.random.SeedSequence(opts.seed).spawn(opts.restarts)
    out = []
    for i, ss in enumerate(seeds):
        rng = np.random.default_rng(ss)
        if i == 0 and opts.initial is not None:
            out.append(np.array(opts.initial.params, dtype=float))
        elif i % 2 == 0:
            out.append(_pd_init(rng, opts.order, ts))
        else:
            out.append(_random_stable_init(rng, opts.order))
    return out


def _nm(fun, x0, max_iters):
    res = minimize(
        fun,
        x0,
        method="Nelder-Mead",
        options={
            "maxiter": max_iters,
            "maxfev": max_iters,
            "xatol": 1e-9,
            "fatol": 1e-11,
            "adaptive": True,
        },
    )
    return np.array(res.x, dtype=float), int(res.nfev)


def _rank_key(res, traditional):
    obj = res.objective if math.isfinite(res.objective) else math.inf
    if traditional:
        return (not res.objectives.stable, obj)
    return (not res.feasible, not res.objectives.stable, obj)


def _search(cfg, W, opts, traditional):
    structure = TRADITIONAL if traditional else MULTIOBJECTIVE
    if W.ts is None or not math.isclose(W.ts, cfg.ts, rel_tol=1e-9):
        raise ConfigError("weights ts does not match configuration ts")
    obj = GridObjective(
        cfg, W, opts.order, structure, opts.points_per_decade, opts.max_pole_radius
    )
    best = None
    history = []
    total = 0
    for i, x0 in enumerate(initial_points(opts, cfg.ts)):
        penalty = opts.penalty0
        x, nfev = _nm(lambda v: obj(v, penalty, traditional), x0, opts.max_iters)
        total += nfev
        k = Controller.from_params(x, opts.order, cfg.ts, structure)
        vals = evaluate(cfg, W, k, opts.points_per_decade)
        doublings = 0
        while (
            not traditional
            and vals.stable
            and vals.t_norm > 1.0 + T_TOL
            and doublings < opts.max_penalty_doublings
        ):
            penalty *= 2.0
            doublings += 1
            x, nfev = _nm(lambda v: obj(v, penalty, traditional), x, opts.max_iters)
            total += nfev
            k = Controller.from_params(x, opts.order, cfg.ts, structure)
            vals = evaluate(cfg, W, k, opts.points_per_decade)
        value = vals.traditional() if traditional else vals.multiobjective()
        res = SynthesisResult(k, vals, vals.feasible, total, i + 1, value)
        log.debug(
            "restart %d: stable=%s gs=%.4g gt=%.4g tn=%.6g", i, vals.stable, vals.gamma_s,
            vals.gamma_t, vals.t_norm,
        )
        if best is None or _rank_key(res, traditional) < _rank_key(best, traditional):
            best = res
        history.append((best.feasible, best.objective))
    best = replace(best, iterations=total, restarts_used=opts.restarts, history=tuple(history))
    if not best.objectives.stable:
        raise SynthesisFailure("no restart produced a stabilizing controller", best)
    return best


def synthesize_multiobj(cfg, W, opts=None):
    """Minimize ``Gamma_S + Gamma_T`` subject to ``||T||_inf <= 1``."""
    opts = opts or SynthOptions()
    res = _search(cfg, W, opts, traditional=False)
    if res.feasible and not 0.9 <= res.objectives.t_norm <= 1.0 + T_TOL:
        log.warning("string-stability constraint inactive: ||T||=%.4f", res.objectives.t_norm)
    return res


def synthesize_traditional(cfg, W, opts=None):
    """Minimize ``max(Gamma_S, Gamma_T[, Gamma_U])`` on the plant without spacing policy."""
    opts = opts or SynthOptions()
    return _search(cfg, W, opts, traditional=True)


@dataclass(frozen=True, eq=False)
class StringStabilityReport:
    t_norm: float
    argmax_hz: float
    margin: float
    passed: bool
    zero_controller: bool
    freqs_hz: np.ndarray
    magnitude: np.ndarray


def verify_string_stability(cfg, K, points_per_decade=2000):
    """Check ``sup |T| <= 1`` for controller ``K`` in its own loop structure."""
    t = closed_loops(cfg, K)[1]
    ktf = getattr(K, "tf", K)
    grid = default_grid(t, 200)
    mag = np.abs(evaluate_tf(t, grid))
    if not is_stable(t):
        return StringStabilityReport(
            INFINITE, math.nan, -INFINITE, False, ktf.is_zero, grid, mag
        )
    tn, f_arg = peak_gain(t, points_per_decade)
    return StringStabilityReport(
        tn, f_arg, 1.0 - tn, tn <= 1.0 + T_TOL, ktf.is_zero, grid, mag
    )


def crossover_frequency(cfg, K, points_per_decade=2000):
    """Lowest frequency (Hz) where ``|S|`` reaches 0 dB, log-interpolated; NaN if never."""
    s = closed_loops(cfg, K)[0]
    grid = default_grid(s, points_per_decade)
    mag = np.abs(evaluate_tf(s, grid))
    idx = np.nonzero(mag >= 1.0)[0]
    if idx.size == 0:
        return math.nan
    k = int(idx[0])
    if k == 0:
        return float(grid[0])
    lf = np.log10(grid[k - 1 : k + 1])
    lm = np.log10(mag[k - 1 : k + 1])
    return float(10.0 ** np.interp(0.0, lm, lf))
