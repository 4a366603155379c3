import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import signal

from platoon_hinf.errors import DelayAdditionError, DomainError, FrequencyRangeError
from platoon_hinf.lti import (
    INFINITE,
    RationalTF,
    default_grid,
    discretize_tustin,
    discretize_zoh,
    evaluate,
    expand_delay,
    freq_response,
    hinf_norm,
    is_stable,
    pade,
    peak_gain,
    poles,
    tf_add,
    tf_feedback,
    tf_mul,
)

TS = 0.1


def random_stable_discrete(rng, n=None, ts=TS):
    n = n or int(rng.integers(1, 6))
    radii = rng.uniform(0.05, 0.95, n)
    angles = rng.uniform(0, np.pi, n)
    roots = []
    for r, a in zip(radii, angles):
        if len(roots) + 2 <= n and rng.random() < 0.5:
            roots += [r * np.exp(1j * a), r * np.exp(-1j * a)]
        elif len(roots) < n:
            roots.append(r * np.sign(rng.normal()))
    den = np.real(np.poly(roots))[::-1]
    num = rng.normal(size=len(den))
    return RationalTF(num, den, 0.0, ts)


def brute_norm(sys, n=1_000_000):
    f = np.linspace(0.0, 0.5 / sys.ts, n)
    z = np.exp(2j * np.pi * f * sys.ts)
    return np.max(np.abs(np.polyval(sys.num[::-1], z) / np.polyval(sys.den[::-1], z)))


class TestRationalTF:
    def test_monic_normalization(self):
        g = RationalTF([2.0, 4.0], [2.0, 2.0])
        np.testing.assert_allclose(g.den, [1.0, 1.0])
        np.testing.assert_allclose(g.num, [1.0, 2.0])

    def test_arrays_are_read_only(self):
        g = RationalTF([1.0], [1.0, 1.0])
        with pytest.raises(ValueError):
            g.num[0] = 3.0

    def test_zero_denominator_rejected(self):
        with pytest.raises(DomainError):
            RationalTF([1.0], [0.0])

    def test_mixed_domains_rejected(self):
        a = RationalTF([1.0], [1.0, 1.0])
        b = RationalTF([1.0], [-0.5, 1.0], 0.0, TS)
        with pytest.raises(DomainError):
            tf_mul(a, b)
        with pytest.raises(DomainError):
            tf_mul(b, RationalTF([1.0], [-0.5, 1.0], 0.0, 0.2))

    def test_adding_unequal_delays_needs_pade(self):
        a = RationalTF([1.0], [1.0, 1.0], 0.2)
        with pytest.raises(DelayAdditionError):
            tf_add(a, RationalTF.gain(1.0))
        # equal delays factor out
        s = tf_add(a, a)
        assert s.delay == pytest.approx(0.2)

    def test_discretizing_a_delay_needs_pade(self):
        with pytest.raises(DelayAdditionError):
            discretize_zoh(RationalTF([1.0], [1.0, 1.0], 0.2), TS)

    def test_operators_match_pointwise_algebra(self):
        rng = np.random.default_rng(3)
        a = random_stable_discrete(rng)
        b = random_stable_discrete(rng)
        z = np.exp(1j * rng.uniform(0, np.pi, 50))
        np.testing.assert_allclose((a * b)(z), a(z) * b(z), rtol=1e-9)
        np.testing.assert_allclose((a + b)(z), a(z) + b(z), rtol=1e-9)
        np.testing.assert_allclose((a - b)(z), a(z) - b(z), rtol=1e-9, atol=1e-12)
        fb = tf_feedback(a, b)
        np.testing.assert_allclose(fb(z), a(z) / (1 + a(z) * b(z)), rtol=1e-8)

    def test_properness(self):
        assert RationalTF([1.0], [1.0, 1.0]).is_proper
        assert not RationalTF([0.0, 0.0, 1.0], [1.0, 1.0]).is_proper


class TestPade:
    @settings(max_examples=40, deadline=None)
    @given(
        delay=st.floats(0.01, 1.0),
        order=st.integers(1, 8),
        w=st.floats(1e-3, 1e3),
    )
    def test_all_pass(self, delay, order, w):
        p = pade(delay, order)
        assert abs(abs(p(1j * w)) - 1.0) < 1e-9

    def test_phase_matches_delay_at_low_frequency(self):
        p = pade(0.2, 4)
        w = np.linspace(0.01, 5.0, 200)
        np.testing.assert_allclose(p(1j * w), np.exp(-0.2j * w), atol=1e-6)

    def test_matches_scipy_free_closed_form_first_order(self):
        # first order: (1 - s T/2) / (1 + s T/2)
        p = pade(0.3, 1)
        s = 0.7j
        assert p(s) == pytest.approx((1 - 0.15 * s) / (1 + 0.15 * s))

    def test_expand_delay(self):
        g = RationalTF([1.0], [1.0, 1.0], 0.2)
        e = expand_delay(g, 4)
        assert e.delay == 0.0
        assert abs(e(1j) - g(1j)) < 1e-6


class TestDiscretization:
    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_zoh_matches_scipy(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 5))
        den = np.real(np.poly(-rng.uniform(0.2, 5.0, n)))[::-1]
        num = rng.normal(size=int(rng.integers(1, n + 2)))
        sys = RationalTF(num, den)
        d = discretize_zoh(sys, TS)
        numd, dend, _ = signal.cont2discrete((num[::-1], den[::-1]), TS, method="zoh")
        z = np.exp(1j * np.linspace(0.05, 3.0, 40))
        ref = np.polyval(np.ravel(numd), z) / np.polyval(dend, z)
        np.testing.assert_allclose(d(z), ref, rtol=1e-8, atol=1e-10)

    def test_zoh_double_integrator_exact(self):
        # 1/s^2 -> T^2 (z + 1) / (2 (z - 1)^2)
        d = discretize_zoh(RationalTF([1.0], [0.0, 0.0, 1.0]), TS)
        np.testing.assert_allclose(d.den, [1.0, -2.0, 1.0], atol=1e-15)
        np.testing.assert_allclose(d.num, [TS**2 / 2, TS**2 / 2], atol=1e-15)

    def test_tustin_matches_scipy(self):
        num, den = [1.0, 2.0], [3.0, 4.0, 1.0]
        d = discretize_tustin(RationalTF(num, den), TS)
        nb, db = signal.bilinear(num[::-1], den[::-1], fs=1 / TS)
        z = np.exp(1j * np.linspace(0.05, 3.0, 40))
        np.testing.assert_allclose(d(z), np.polyval(nb, z) / np.polyval(db, z), rtol=1e-10)


class TestFrequencyTools:
    def test_nyquist_rejected(self):
        sys = RationalTF([1.0], [-0.5, 1.0], 0.0, TS)
        with pytest.raises(FrequencyRangeError):
            evaluate(sys, [5.0])
        evaluate(sys, [4.99])

    def test_freq_response_db(self):
        sys = RationalTF.gain(10.0, TS)
        fr = freq_response(sys, [0.1, 1.0])
        np.testing.assert_allclose(fr.mag_db, 20.0)

    def test_grid_is_ascending_below_nyquist(self):
        sys = RationalTF([1.0], [-0.5, 1.0], 0.0, TS)
        g = default_grid(sys, 100)
        assert np.all(np.diff(g) > 0) and g[-1] < 5.0


class TestNorms:
    def test_first_order_closed_form(self):
        # 1/(z - a) peaks at z = 1 (a > 0) with value 1/(1 - a)
        sys = RationalTF([1.0], [-0.8, 1.0], 0.0, TS)
        assert hinf_norm(sys) == pytest.approx(5.0, rel=1e-9)

    def test_resonant_peak_refined(self):
        rng = np.random.default_rng(11)
        for _ in range(5):
            sys = random_stable_discrete(rng, 4)
            assert hinf_norm(sys) == pytest.approx(brute_norm(sys, 200_000), rel=1e-3)

    def test_unstable_is_infinite(self):
        sys = RationalTF([1.0], [-1.2, 1.0], 0.0, TS)
        assert not is_stable(sys)
        assert hinf_norm(sys) == INFINITE

    def test_peak_gain_reports_argmax(self):
        sys = RationalTF([1.0], [0.8, 1.0], 0.0, TS)  # pole at -0.8 peaks at Nyquist
        g, f = peak_gain(sys)
        assert g == pytest.approx(5.0, rel=1e-6)
        assert f > 4.9

    def test_continuous_norm(self):
        # 1/(s + 1): peak 1 at DC
        assert hinf_norm(RationalTF([1.0], [1.0, 1.0])) == pytest.approx(1.0)

    def test_poles(self):
        sys = RationalTF([1.0], [0.06, -0.5, 1.0], 0.0, TS)
        np.testing.assert_allclose(np.sort(np.real(poles(sys))), [0.2, 0.3])


def test_stability_of_marginal_pole():
    sys = RationalTF([1.0], [-1.0, 1.0], 0.0, TS)
    assert not is_stable(sys)
    assert math.isinf(hinf_norm(sys))
