"""Vehicle, spacing-policy and communication models and the platoon closed loops.

Closed loops are assembled from a handful of *loop blocks*:

* ``g``    -- vehicle plant (desired acceleration to position), actuator delay expanded
* ``l``    -- loop transfer ``G*H`` (desired acceleration to ``p + h v``)
* ``h``    -- spacing operator, ``l/g``
* ``d``    -- communication delay, expanded
* ``hinv`` -- feedforward filter ``1/H``

``g`` and ``l`` share one denominator, which lets every closed loop be written
over the exact characteristic polynomial ``den(l)*den(K) + num(l)*num(K)``
without spurious common factors.

A controller designed with the ``"traditional"`` structure sees no spacing
policy in its loop (constant-spacing error), so ``H`` is replaced by 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import ConfigError, DomainError
from .lti import (
    RationalTF,
    discretize_tustin,
    discretize_zoh,
    evaluate,
    expand_delay,
    tf_mul,
)

ACC = "ACC"
CACC = "CACC"
MULTIOBJECTIVE = "multiobjective"
TRADITIONAL = "traditional"
STRUCTURES = (MULTIOBJECTIVE, TRADITIONAL)
#: design headway per mode when none is given
DEFAULT_HEADWAY = {ACC: 1.0, CACC: 0.5}


@dataclass(frozen=True)
class VehicleParams:
    tau: float = 0.1
    phi: float = 0.2

    def __post_init__(self):
        if not self.tau > 0:
            raise ConfigError(f"time lag tau must be > 0, got {self.tau}")
        if not self.phi >= 0:
            raise ConfigError(f"actuator delay phi must be >= 0, got {self.phi}")


@dataclass(frozen=True)
class SpacingPolicy:
    h: float = 1.0
    d0: float = 0.0

    def __post_init__(self):
        if not self.h > 0:
            raise ConfigError(f"time headway h must be > 0, got {self.h}")
        if not self.d0 >= 0:
            raise ConfigError(f"standstill distance d0 must be >= 0, got {self.d0}")


@dataclass(frozen=True)
class CommLink:
    theta: float = 0.15

    def __post_init__(self):
        if not self.theta >= 0:
            raise ConfigError(f"communication delay theta must be >= 0, got {self.theta}")


@dataclass(frozen=True)
class PlatoonConfig:
    """Identical-vehicle platoon: ``m`` followers behind one leader."""

    mode: str = ACC
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    policy: SpacingPolicy = field(default_factory=SpacingPolicy)
    link: CommLink = field(default_factory=CommLink)
    m: int = 5
    ts: float = 0.1
    pade_order: int = 4
    discretization: str = "zoh"

    def __post_init__(self):
        mode = str(self.mode).upper()
        if mode not in (ACC, CACC):
            raise ConfigError(f"mode must be ACC or CACC, got {self.mode!r}")
        object.__setattr__(self, "mode", mode)
        if int(self.m) != self.m or self.m < 1:
            raise ConfigError(f"follower count m must be a positive integer, got {self.m}")
        if not self.ts > 0:
            raise ConfigError(f"sampling period ts must be > 0, got {self.ts}")
        if int(self.pade_order) != self.pade_order or self.pade_order < 1:
            raise ConfigError(f"pade_order must be a positive integer, got {self.pade_order}")
        if self.discretization not in ("zoh", "tustin"):
            raise ConfigError(f"discretization must be zoh or tustin, got {self.discretization!r}")
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "pade_order", int(self.pade_order))

    @classmethod
    def from_flat(cls, **kw):
        """Build from flat keys ``mode, tau, phi, theta, h, d0, m, ts, pade_order``.

        ``h`` defaults to 1.0 s for ACC and 0.5 s for CACC.
        """
        mode = str(kw.get("mode", ACC)).upper()
        return cls(
            mode=mode,
            vehicle=VehicleParams(tau=float(kw.get("tau", 0.1)), phi=float(kw.get("phi", 0.2))),
            policy=SpacingPolicy(
                h=float(kw.get("h", DEFAULT_HEADWAY.get(mode, 1.0))),
                d0=float(kw.get("d0", 0.0)),
            ),
            link=CommLink(theta=float(kw.get("theta", 0.15))),
            m=int(kw.get("m", 5)),
            ts=float(kw.get("ts", 0.1)),
            pade_order=int(kw.get("pade_order", 4)),
            discretization=str(kw.get("discretization", "zoh")),
        )

    def flat(self):
        return {
            "mode": self.mode,
            "tau": self.vehicle.tau,
            "phi": self.vehicle.phi,
            "theta": self.link.theta,
            "h": self.policy.h,
            "d0": self.policy.d0,
            "m": self.m,
            "ts": self.ts,
            "pade_order": self.pade_order,
            "discretization": self.discretization,
        }

    def replace(self, **kw):
        """Copy with some flat keys changed."""
        d = self.flat()
        d.update(kw)
        return PlatoonConfig.from_flat(**d)


def vehicle_tf(p):
    """``exp(-phi s) / (s^2 (tau s + 1))``."""
    return RationalTF([1.0], [0.0, 0.0, 1.0, p.tau], p.phi)


def spacing_tf(policy):
    """``h s + 1``."""
    return RationalTF([1.0, policy.h], [1.0])


def comm_delay_tf(link):
    return RationalTF([1.0], [1.0], link.theta)


@dataclass(frozen=True, eq=False)
class LoopBlocks:
    g: RationalTF
    l: RationalTF
    h: RationalTF
    d: RationalTF
    hinv: RationalTF
    cacc: bool

    @property
    def ff(self):
        """Feedforward path ``D/H`` from the predecessor's command."""
        return tf_mul(self.d, self.hinv)


@lru_cache(maxsize=256)
def _blocks(cfg, structure, discrete):
    h_eff = cfg.policy.h if structure == MULTIOBJECTIVE else 0.0
    tau, phi = cfg.vehicle.tau, cfg.vehicle.phi
    n = cfg.pade_order
    g_c = expand_delay(RationalTF([1.0], [0.0, 0.0, 1.0, tau], phi), n)
    l_c = tf_mul(g_c, RationalTF([1.0, h_eff], [1.0]))
    h_c = RationalTF([1.0, h_eff], [1.0])
    hinv_c = RationalTF([1.0], [1.0, h_eff])
    d_c = expand_delay(comm_delay_tf(cfg.link), n) if cfg.mode == CACC else RationalTF.gain(1.0)
    cacc = cfg.mode == CACC
    if not discrete:
        return LoopBlocks(g_c, l_c, h_c, d_c, hinv_c, cacc)

    ts = cfg.ts
    if cfg.discretization == "zoh":
        g = discretize_zoh(g_c, ts)
        l = discretize_zoh(l_c, ts)
        # sampled spacing operator: maps sampled p to sampled p + h v
        h = RationalTF(l.num, g.num, 0.0, ts)
    else:
        g = discretize_tustin(g_c, ts)
        l = discretize_tustin(l_c, ts)
        h = discretize_tustin(h_c, ts)
    if not np.array_equal(g.den, l.den):
        raise DomainError("plant blocks lost their common denominator")
    return LoopBlocks(
        g, l, h, discretize_tustin(d_c, ts), discretize_tustin(hinv_c, ts), cacc
    )


def loop_blocks(cfg, structure=MULTIOBJECTIVE, discrete=True):
    if structure not in STRUCTURES:
        raise ConfigError(f"unknown loop structure {structure!r}")
    return _blocks(cfg, structure, bool(discrete))


def _controller_tf(k):
    return getattr(k, "tf", k)


def _structure_of(k, structure):
    if structure is not None:
        return structure
    return getattr(k, "structure", MULTIOBJECTIVE)


def _check_controller(cfg, k):
    if k.delay:
        raise DomainError("controller must be rational")
    if k.is_discrete and not math.isclose(k.ts, cfg.ts, rel_tol=1e-9):
        raise DomainError(f"controller Ts={k.ts} does not match config ts={cfg.ts}")


def characteristic_polynomial(blocks, k):
    return P.polyadd(P.polymul(blocks.l.den, k.den), P.polymul(blocks.l.num, k.num))


def closed_loops(cfg, K, structure=None):
    """``(S, T)`` for the configured mode.

    ``K`` may be a :class:`RationalTF` or anything with ``.tf`` and
    ``.structure`` (a :class:`~platoon_hinf.synthesis.Controller`). A discrete
    ``K`` uses the sampled loop blocks at ``cfg.ts``; a continuous ``K`` uses
    the continuous, Padé-expanded ones.
    """
    structure = _structure_of(K, structure)
    k = _controller_tf(K)
    _check_controller(cfg, k)
    b = loop_blocks(cfg, structure, k.is_discrete)
    ts = k.ts
    if k.is_zero:
        s_num, t_num, char = np.ones(1), np.zeros(1), np.ones(1)
    else:
        char = characteristic_polynomial(b, k)
        s_num = P.polymul(b.l.den, k.den)
        t_num = P.polymul(b.g.num, k.num)
    if not b.cacc:
        return RationalTF(s_num, char, 0.0, ts), RationalTF(t_num, char, 0.0, ts)
    # T = (G K + F) S_loop with F = D/H, written over char * den(F)
    ff = b.ff
    t = RationalTF(
        P.polyadd(P.polymul(t_num, ff.den), P.polymul(ff.num, s_num)),
        P.polymul(char, ff.den),
        0.0,
        ts,
    )
    s = RationalTF(P.polymul(P.polysub(b.d.den, b.d.num), s_num), P.polymul(char, b.d.den), 0.0, ts)
    return s, t


def acc_closed_loops(cfg, K, structure=None):
    """``S = 1/(1+GHK)``, ``T = GK/(1+GHK)``."""
    if cfg.mode != ACC:
        raise ConfigError("acc_closed_loops needs mode=ACC")
    return closed_loops(cfg, K, structure)


def cacc_closed_loops(cfg, K, structure=None):
    """``S = (1-D)/(1+GHK)``, ``T = (D + GKH) / (H (1+GHK))``."""
    if cfg.mode != CACC:
        raise ConfigError("cacc_closed_loops needs mode=CACC")
    return closed_loops(cfg, K, structure)


def string_stability_fn(cfg, K, structure=None):
    """Vehicle-to-vehicle amplification (the complementary sensitivity ``T``)."""
    return closed_loops(cfg, K, structure)[1]


def control_sensitivity(cfg, K, structure=None):
    """``U = K S_loop`` where ``S_loop = 1/(1+GHK)``: exogenous input to control signal."""
    structure = _structure_of(K, structure)
    k = _controller_tf(K)
    _check_controller(cfg, k)
    b = loop_blocks(cfg, structure, k.is_discrete)
    if k.is_zero:
        u = RationalTF.zero(k.ts)
    else:
        u = RationalTF(P.polymul(b.l.den, k.num), characteristic_polynomial(b, k), 0.0, k.ts)
    if b.cacc:
        u = tf_mul(RationalTF(P.polysub(b.d.den, b.d.num), b.d.den, 0.0, k.ts), u)
    return u


# ---------------------------------------------------------------------------
# generalized plants
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GeneralizedPlant:
    """Block plant mapping ``(r, u)`` to ``(y_1..y_p, y_meas)``.

    ``blocks[i] = (from_r, from_u)``; the last row is the measurement.
    ``labels`` names the performance rows.
    """

    blocks: tuple
    labels: tuple

    @property
    def n_perf(self):
        return len(self.blocks) - 1

    def row(self, label):
        return self.labels.index(label)

    def lft_response(self, K, freqs_hz):
        """Closed-loop responses ``r -> y_i`` with ``u = K y_meas``, one row per output."""
        k = _controller_tf(K)
        f = np.asarray(freqs_hz, dtype=float)
        kv = evaluate(k, f)
        p21, p22 = (evaluate(x, f) for x in self.blocks[-1])
        u_per_r = kv * p21 / (1.0 - p22 * kv)
        out = np.empty((self.n_perf, f.size), dtype=complex)
        for i, (p11, p12) in enumerate(self.blocks[:-1]):
            out[i] = evaluate(p11, f) + evaluate(p12, f) * u_per_r
        return out


def _weights_ts(w, ts):
    for x in (w.ws, w.wt, w.wu):
        if x is not None and not (x.is_discrete and math.isclose(x.ts, ts, rel_tol=1e-9)):
            raise DomainError("weights must be discrete with the configuration's ts")


def augmented_plant_acc(cfg, W):
    """Revised ACC plant: ``[W_S, -W_S G H; 0, -W_U; 0, W_T G; 0, G; 1, -G H]``."""
    if cfg.mode != ACC:
        raise ConfigError("augmented_plant_acc needs mode=ACC")
    _weights_ts(W, cfg.ts)
    b = loop_blocks(cfg, MULTIOBJECTIVE, True)
    zero = RationalTF.zero(cfg.ts)
    one = RationalTF.gain(1.0, cfg.ts)
    rows = [(W.ws, -tf_mul(W.ws, b.l))]
    labels = ["ws_s"]
    if W.wu is not None:
        rows.append((zero, -W.wu))
        labels.append("wu_u")
    rows += [(zero, tf_mul(W.wt, b.g)), (zero, b.g), (one, -b.l)]
    labels += ["wt_t", "t"]
    return GeneralizedPlant(tuple(rows), tuple(labels))


def augmented_plant_cacc(cfg, W):
    """Revised CACC plant with the ``(1-D)`` and ``D/H`` exogenous columns."""
    if cfg.mode != CACC:
        raise ConfigError("augmented_plant_cacc needs mode=CACC")
    _weights_ts(W, cfg.ts)
    b = loop_blocks(cfg, MULTIOBJECTIVE, True)
    zero = RationalTF.zero(cfg.ts)
    one_minus_d = RationalTF(P.polysub(b.d.den, b.d.num), b.d.den, 0.0, cfg.ts)
    ff = b.ff
    rows = [(tf_mul(W.ws, one_minus_d), -tf_mul(W.ws, b.l))]
    labels = ["ws_s"]
    if W.wu is not None:
        rows.append((zero, -W.wu))
        labels.append("wu_u")
    rows += [
        (tf_mul(W.wt, ff), tf_mul(W.wt, b.g)),
        (ff, b.g),
        (one_minus_d, -b.l),
    ]
    labels += ["wt_t", "t"]
    return GeneralizedPlant(tuple(rows), tuple(labels))


def augmented_plant_traditional(cfg, W):
    """Traditional plant without spacing policy: ``[W_S, -W_S G; 0, -W_U; 0, W_T G; 1, -G]``."""
    _weights_ts(W, cfg.ts)
    b = loop_blocks(cfg.replace(mode=ACC), TRADITIONAL, True)
    zero = RationalTF.zero(cfg.ts)
    one = RationalTF.gain(1.0, cfg.ts)
    rows = [(W.ws, -tf_mul(W.ws, b.g))]
    labels = ["ws_s"]
    if W.wu is not None:
        rows.append((zero, -W.wu))
        labels.append("wu_u")
    rows += [(zero, tf_mul(W.wt, b.g)), (one, -b.g)]
    labels += ["wt_t"]
    return GeneralizedPlant(tuple(rows), tuple(labels))


def augmented_plant(cfg, W):
    return augmented_plant_acc(cfg, W) if cfg.mode == ACC else augmented_plant_cacc(cfg, W)


__all__ = [
    "ACC",
    "CACC",
    "MULTIOBJECTIVE",
    "TRADITIONAL",
    "VehicleParams",
    "SpacingPolicy",
    "CommLink",
    "PlatoonConfig",
    "LoopBlocks",
    "GeneralizedPlant",
    "vehicle_tf",
    "spacing_tf",
    "comm_delay_tf",
    "loop_blocks",
    "closed_loops",
    "acc_closed_loops",
    "cacc_closed_loops",
    "string_stability_fn",
    "control_sensitivity",
    "characteristic_polynomial",
    "augmented_plant_acc",
    "augmented_plant_cacc",
    "augmented_plant_traditional",
    "augmented_plant",
]
