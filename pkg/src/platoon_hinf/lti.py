"""SISO transfer-function algebra, delay approximation and frequency-domain tools.

Polynomials are plain float arrays of coefficients in *ascending* powers of
``s`` or ``z``. A :class:`RationalTF` carries a numerator, a denominator, an
exact pure delay in seconds and, for discrete systems, the sampling period.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from math import factorial

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.linalg import expm

from . import _kernels
from .errors import DelayAdditionError, DomainError, FrequencyRangeError

MAX_DEGREE = 30
_TRIM_RTOL = 1e-14

#: Returned by :func:`hinf_norm` for unstable systems.
INFINITE = math.inf


def trim(coeffs, rtol=_TRIM_RTOL):
    """Drop negligible highest-power coefficients; ``[0.]`` for the zero polynomial."""
    c = np.atleast_1d(np.asarray(coeffs, dtype=float)).copy()
    if c.size == 0:
        return np.zeros(1)
    scale = np.max(np.abs(c))
    if scale == 0.0:
        return np.zeros(1)
    nz = np.nonzero(np.abs(c) > rtol * scale)[0]
    return c[: nz[-1] + 1]


def degree(coeffs):
    c = trim(coeffs)
    return len(c) - 1


def _same_ts(a, b):
    if a is None or b is None:
        return a is None and b is None
    return math.isclose(a, b, rel_tol=1e-12, abs_tol=0.0)


@dataclass(frozen=True, eq=False)
class RationalTF:
    """Rational transfer function ``num/den`` times ``exp(-delay*s)``.

    ``ts`` is ``None`` for continuous-time systems and the sampling period in
    seconds for discrete-time ones. The denominator is stored monic.
    """

    num: np.ndarray
    den: np.ndarray
    delay: float = 0.0
    ts: float | None = None

    def __post_init__(self):
        num = trim(self.num)
        den = trim(self.den)
        if den.size == 1 and den[0] == 0.0:
            raise DomainError("denominator is the zero polynomial")
        if max(len(num), len(den)) - 1 > MAX_DEGREE:
            raise DomainError(f"polynomial degree exceeds {MAX_DEGREE}")
        if self.delay < 0 or not math.isfinite(self.delay):
            raise DomainError(f"delay must be finite and nonnegative, got {self.delay}")
        if self.ts is not None and not (self.ts > 0 and math.isfinite(self.ts)):
            raise DomainError(f"sampling period must be positive, got {self.ts}")
        lead = den[-1]
        num = num / lead
        den = den / lead
        if num.size == 1 and num[0] == 0.0:
            num = np.zeros(1)
        num.flags.writeable = False
        den.flags.writeable = False
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)
        object.__setattr__(self, "delay", float(self.delay))
        object.__setattr__(self, "ts", None if self.ts is None else float(self.ts))

    # -- constructors -----------------------------------------------------

    @classmethod
    def gain(cls, k, ts=None):
        return cls([float(k)], [1.0], 0.0, ts)

    @classmethod
    def zero(cls, ts=None):
        return cls([0.0], [1.0], 0.0, ts)

    # -- properties -------------------------------------------------------

    @property
    def is_discrete(self):
        return self.ts is not None

    @property
    def order(self):
        return max(len(self.num), len(self.den)) - 1

    @property
    def is_zero(self):
        return self.num.size == 1 and self.num[0] == 0.0

    @property
    def is_proper(self):
        return self.is_zero or len(self.num) <= len(self.den)

    @property
    def is_rational(self):
        return self.delay == 0.0

    def without_delay(self):
        return RationalTF(self.num, self.den, 0.0, self.ts)

    def __call__(self, x):
        """Evaluate at complex points ``x`` (``s`` or ``z``), delay included."""
        x = np.asarray(x, dtype=complex)
        val = P.polyval(x, self.num) / P.polyval(x, self.den)
        if self.delay and not self.is_discrete:
            val = val * np.exp(-self.delay * x)
        return val

    def __mul__(self, other):
        return tf_mul(self, _coerce(other, self))

    __rmul__ = __mul__

    def __add__(self, other):
        return tf_add(self, _coerce(other, self))

    __radd__ = __add__

    def __neg__(self):
        return RationalTF(-self.num, self.den, self.delay, self.ts)

    def __sub__(self, other):
        return tf_add(self, -_coerce(other, self))

    def __rsub__(self, other):
        return tf_add(_coerce(other, self), -self)

    def inv(self):
        """Multiplicative inverse of a rational system."""
        if self.delay:
            raise DelayAdditionError("cannot invert a pure delay")
        if self.is_zero:
            raise DomainError("cannot invert the zero system")
        return RationalTF(self.den, self.num, 0.0, self.ts)

    def __repr__(self):
        dom = "s" if self.ts is None else f"z, Ts={self.ts:g}"
        extra = f", delay={self.delay:g}" if self.delay else ""
        return f"RationalTF(num={self.num.tolist()}, den={self.den.tolist()}, {dom}{extra})"


def _coerce(x, like):
    if isinstance(x, RationalTF):
        return x
    return RationalTF.gain(float(x), like.ts)


def _check_domain(a, b):
    if not _same_ts(a.ts, b.ts):
        raise DomainError(f"domain mismatch: Ts={a.ts} vs Ts={b.ts}")


def tf_mul(a, b):
    """Series connection; common factors are kept."""
    _check_domain(a, b)
    return RationalTF(P.polymul(a.num, b.num), P.polymul(a.den, b.den), a.delay + b.delay, a.ts)


def tf_add(a, b):
    """Parallel connection of two systems with equal pure delay."""
    _check_domain(a, b)
    if a.is_zero:
        return b
    if b.is_zero:
        return a
    if not math.isclose(a.delay, b.delay, rel_tol=0.0, abs_tol=1e-15):
        raise DelayAdditionError(
            f"cannot add systems with delays {a.delay} and {b.delay}; expand with pade() first"
        )
    num = P.polyadd(P.polymul(a.num, b.den), P.polymul(b.num, a.den))
    return RationalTF(num, P.polymul(a.den, b.den), a.delay, a.ts)


def tf_feedback(forward, loop):
    """``forward / (1 + forward*loop)`` as one rational system."""
    _check_domain(forward, loop)
    if forward.delay or loop.delay:
        raise DelayAdditionError("feedback loop contains an unexpanded pure delay")
    if loop.is_zero:
        return forward
    num = P.polymul(forward.num, loop.den)
    den = P.polyadd(P.polymul(forward.den, loop.den), P.polymul(forward.num, loop.num))
    return RationalTF(num, den, 0.0, forward.ts)


def pade_coefficients(delay, order):
    """Numerator and denominator (ascending) of the diagonal Padé approximant."""
    if delay < 0:
        raise DomainError("delay must be nonnegative")
    if order < 1:
        raise DomainError("Padé order must be >= 1")
    n = int(order)
    c = np.array(
        [
            factorial(2 * n - k) * factorial(n) / (factorial(2 * n) * factorial(k) * factorial(n - k))
            for k in range(n + 1)
        ]
    )
    powers = delay ** np.arange(n + 1)
    signs = (-1.0) ** np.arange(n + 1)
    return c * powers * signs, c * powers


def pade(delay, order=4, ts=None):
    """Rational all-pass approximation of ``exp(-delay*s)``.

    With ``ts`` given the continuous approximant is Tustin-discretized.
    """
    if delay == 0:
        return RationalTF.gain(1.0, ts)
    num, den = pade_coefficients(delay, order)
    sys = RationalTF(num, den)
    return discretize_tustin(sys, ts) if ts is not None else sys


def expand_delay(sys, order=4):
    """Replace the exact delay of a continuous system by its Padé approximant."""
    if sys.delay == 0:
        return sys
    if sys.is_discrete:
        raise DomainError("delay expansion applies to continuous systems")
    return tf_mul(sys.without_delay(), pade(sys.delay, order))


def _require_rational_continuous(sys, ts):
    if sys.is_discrete:
        raise DomainError("system is already discrete")
    if sys.delay:
        raise DelayAdditionError("expand the pure delay with pade() before discretizing")
    if not (ts > 0):
        raise DomainError("sampling period must be positive")


def discretize_tustin(sys, ts):
    """Bilinear substitution ``s <- (2/ts)(z-1)/(z+1)``."""
    _require_rational_continuous(sys, ts)
    n = sys.order
    c = 2.0 / ts
    zm1 = np.array([-1.0, 1.0])
    zp1 = np.array([1.0, 1.0])
    basis = [c**k * P.polymul(P.polypow(zm1, k), P.polypow(zp1, n - k)) for k in range(n + 1)]

    def sub(coeffs):
        out = np.zeros(n + 1)
        for k, b in enumerate(coeffs):
            out[: len(basis[k])] += b * basis[k]
        return out

    return RationalTF(sub(sys.num), sub(sys.den), 0.0, ts)


def _companion(den):
    """Controllable canonical A for a monic ascending denominator."""
    n = len(den) - 1
    a = np.zeros((n, n))
    if n > 1:
        a[:-1, 1:] = np.eye(n - 1)
    a[-1, :] = -den[:-1]
    return a


def discretize_zoh(sys, ts):
    """Zero-order-hold equivalent of a proper continuous system.

    The discrete denominator is built from the exact pole map ``z = exp(p*ts)``
    so poles at the origin land exactly on ``z = 1``.
    """
    _require_rational_continuous(sys, ts)
    if not sys.is_proper:
        raise DomainError("zero-order hold needs a proper system")
    den = sys.den
    n = len(den) - 1
    if n == 0:
        return RationalTF(sys.num, den, 0.0, ts)
    num = np.zeros(n + 1)
    num[: len(sys.num)] = sys.num
    d = num[n]
    c = num[:n] - d * den[:n]
    a = _companion(den)
    m = np.zeros((n + 1, n + 1))
    m[:n, :n] = a * ts
    m[n - 1, n] = ts
    e = expm(m)
    phi = e[:n, :n]
    gam = e[:n, n]
    poles = np.roots(den[::-1])
    den_d = np.real(np.poly(np.exp(poles * ts)))[::-1]
    # det(zI - phi + gam c) - det(zI - phi) = c adj(zI - phi) gam
    num_d = np.real(np.poly(phi - np.outer(gam, c)))[::-1] - den_d + d * den_d
    return RationalTF(num_d, den_d, 0.0, ts)


def evaluate(sys, freqs_hz):
    """Complex response at arbitrary frequencies (Hz); no ordering required."""
    f = np.atleast_1d(np.asarray(freqs_hz, dtype=float))
    if sys.is_discrete:
        nyq = 0.5 / sys.ts
        if np.any(f >= nyq) or np.any(f < 0):
            raise FrequencyRangeError(f"frequencies must lie in [0, {nyq:g}) Hz")
        x = np.exp(2j * np.pi * f * sys.ts)
    else:
        x = 2j * np.pi * f
    val = _kernels.polyval(sys.num.astype(np.float64), x) / _kernels.polyval(
        sys.den.astype(np.float64), x
    )
    if sys.delay and not sys.is_discrete:
        val = val * np.exp(-2j * np.pi * f * sys.delay)
    return val


@dataclass(frozen=True, eq=False)
class FrequencyResponse:
    freqs_hz: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if len(self.freqs_hz) != len(self.values):
            raise ValueError("freqs_hz and values differ in length")
        if np.any(self.freqs_hz <= 0) or np.any(np.diff(self.freqs_hz) <= 0):
            raise ValueError("frequencies must be positive and strictly ascending")

    @property
    def magnitude(self):
        return np.abs(self.values)

    @property
    def mag_db(self):
        with np.errstate(divide="ignore"):
            return 20.0 * np.log10(np.abs(self.values))

    @property
    def phase_deg(self):
        return np.degrees(np.unwrap(np.angle(self.values)))


def freq_response(sys, freqs_hz):
    f = np.asarray(freqs_hz, dtype=float)
    return FrequencyResponse(f, evaluate(sys, f))


def poles(sys):
    if len(sys.den) == 1:
        return np.zeros(0, dtype=complex)
    return np.roots(sys.den[::-1])


def spectral_radius(den, discrete=True):
    """Largest |root| (discrete) or largest real part (continuous) of ``den``."""
    d = trim(den)
    if len(d) == 1:
        return -math.inf
    r = np.roots(d[::-1])
    return float(np.max(np.abs(r))) if discrete else float(np.max(r.real))


def is_stable(sys):
    """Strict stability of the denominator roots; a pure delay does not move poles."""
    if sys.den.size == 1 and sys.den[0] == 0:
        raise DomainError("zero denominator")
    if len(sys.den) == 1:
        return True
    if sys.is_discrete:
        return spectral_radius(sys.den, True) < 1.0
    return spectral_radius(sys.den, False) < 0.0


def default_grid(sys, points_per_decade=2000, f_min=1e-3):
    """Log grid from ``f_min`` Hz to just below Nyquist (discrete) or 1e3 rad/s."""
    if sys.is_discrete:
        f_max = 0.5 / sys.ts * (1.0 - 1e-9)
    else:
        f_max = 1e3 / (2.0 * np.pi)
    decades = math.log10(f_max / f_min)
    n = max(int(math.ceil(decades * points_per_decade)) + 1, 2)
    return np.logspace(math.log10(f_min), math.log10(f_max), n)


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_max(fun, lo, hi, tol=1e-10, max_iter=200):
    """Golden-section search for the maximizer of a unimodal ``fun`` on ``[lo, hi]``."""
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(max_iter):
        if abs(b - a) <= tol * max(1.0, abs(a) + abs(b)):
            break
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = fun(d)
    x = (a + b) / 2.0
    return x, fun(x)


def peak_gain(sys, points_per_decade=2000, f_min=1e-3):
    """``(peak, argmax_hz)`` of ``|sys|`` over the frequency axis, stability not checked.

    Dense log-grid scan plus golden-section refinement in log-frequency around
    the grid maximum. The DC value (and the value at infinity for continuous
    systems) are included when finite.
    """
    grid = default_grid(sys, points_per_decade, f_min)
    mag = np.abs(evaluate(sys, grid))
    k = int(np.argmax(mag))
    best, best_f = float(mag[k]), float(grid[k])

    lo = math.log10(grid[max(k - 1, 0)])
    hi = math.log10(grid[min(k + 1, len(grid) - 1)])
    if hi > lo:
        xr, vr = _golden_max(lambda x: float(np.abs(evaluate(sys, [10.0**x])[0])), lo, hi)
        if vr > best:
            best, best_f = vr, 10.0**xr

    dc_pt = 1.0 if sys.is_discrete else 0.0
    den0 = P.polyval(dc_pt, sys.den)
    if den0 != 0.0:
        v = abs(P.polyval(dc_pt, sys.num) / den0)
        if v >= best:
            best, best_f = v, 0.0
    if not sys.is_discrete and len(sys.num) == len(sys.den):
        v = abs(sys.num[-1])
        if v > best:
            best, best_f = v, math.inf
    return best, best_f


def hinf_norm(sys, points_per_decade=2000, f_min=1e-3):
    """Peak gain of a stable system; :data:`INFINITE` if unstable."""
    if not is_stable(sys.without_delay()):
        return INFINITE
    return peak_gain(sys, points_per_decade, f_min)[0]
