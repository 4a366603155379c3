import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from platoon_hinf.errors import ConfigError, DomainError
from platoon_hinf.lti import RationalTF, evaluate, pade
from platoon_hinf.platoon import (
    ACC,
    CACC,
    TRADITIONAL,
    PlatoonConfig,
    acc_closed_loops,
    augmented_plant,
    augmented_plant_traditional,
    cacc_closed_loops,
    closed_loops,
    comm_delay_tf,
    control_sensitivity,
    loop_blocks,
    spacing_tf,
    string_stability_fn,
    vehicle_tf,
)
from platoon_hinf.synthesis import Controller, default_weights

TS = 0.1
# a stabilizing hand-tuned PD-like controller for both modes
PD = Controller.from_coefficients([-8.0, 10.0], [0.0, 1.0], TS)


def freqs(n=100, seed=0):
    rng = np.random.default_rng(seed)
    return np.sort(rng.uniform(1e-3, 4.9, n))


class TestConfig:
    def test_defaults(self):
        cfg = PlatoonConfig()
        assert (cfg.vehicle.tau, cfg.vehicle.phi, cfg.link.theta, cfg.ts) == (0.1, 0.2, 0.15, 0.1)

    def test_cacc_default_headway(self):
        assert PlatoonConfig.from_flat(mode="cacc").policy.h == 0.5
        assert PlatoonConfig.from_flat(mode="ACC").policy.h == 1.0

    @pytest.mark.parametrize(
        "kw",
        [
            {"mode": "XACC"},
            {"h": 0.0},
            {"tau": -1.0},
            {"phi": -0.1},
            {"theta": -0.1},
            {"m": 0},
            {"ts": 0.0},
            {"discretization": "euler"},
        ],
    )
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            PlatoonConfig.from_flat(**kw)

    def test_replace_roundtrip(self):
        cfg = PlatoonConfig.from_flat(mode="CACC", h=0.7)
        assert cfg.replace(h=0.9).policy.h == 0.9
        assert cfg.replace().flat() == cfg.flat()


class TestBlocks:
    def test_continuous_models(self):
        s = 0.3j
        p = PlatoonConfig().vehicle
        g = vehicle_tf(p)
        assert g(s) == pytest.approx(np.exp(-0.2 * s) / (s**2 * (0.1 * s + 1)))
        assert spacing_tf(PlatoonConfig().policy)(s) == pytest.approx(1 + s)
        assert comm_delay_tf(PlatoonConfig().link)(s) == pytest.approx(np.exp(-0.15 * s))

    def test_zoh_plant_has_exact_integrator_poles(self):
        b = loop_blocks(PlatoonConfig(), discrete=True)
        assert b.g(1.0 + 0j) == np.inf or abs(np.polyval(b.g.den[::-1], 1.0)) < 1e-14

    def test_sampled_spacing_operator_maps_position_to_p_plus_hv(self):
        # ZOH of G*(hs+1) equals H_eff * ZOH(G) exactly
        cfg = PlatoonConfig.from_flat(h=1.3)
        b = loop_blocks(cfg)
        z = np.exp(2j * np.pi * freqs(20) * TS)
        np.testing.assert_allclose(b.h(z) * b.g(z), b.l(z), rtol=1e-10)

    def test_traditional_structure_drops_spacing_policy(self):
        b = loop_blocks(PlatoonConfig(), TRADITIONAL)
        z = np.exp(2j * np.pi * freqs(20) * TS)
        np.testing.assert_allclose(b.l(z), b.g(z), rtol=1e-12)

    def test_comm_delay_is_pade_tustin(self):
        b = loop_blocks(PlatoonConfig.from_flat(mode="CACC"))
        f = freqs(20)
        d = evaluate(b.d, f)
        np.testing.assert_allclose(np.abs(d), 1.0, atol=1e-9)


def pointwise_loops(cfg, K, f):
    """Independent oracle: closed loops from block values, no polynomial algebra."""
    b = loop_blocks(cfg)
    z = np.exp(2j * np.pi * f * cfg.ts)
    G, H, Kz = b.g(z), b.h(z), K.tf(z)
    L = G * H * Kz
    if cfg.mode == ACC:
        return 1 / (1 + L), G * Kz / (1 + L)
    D, Hi = b.d(z), b.hinv(z)
    return (1 - D) / (1 + L), (D * Hi + G * Kz) / (1 + L)


@pytest.mark.parametrize("mode,h", [(ACC, 1.0), (CACC, 0.5)])
def test_closed_loops_match_pointwise_oracle(mode, h):
    cfg = PlatoonConfig.from_flat(mode=mode, h=h)
    f = freqs()
    s, t = closed_loops(cfg, PD)
    s_ref, t_ref = pointwise_loops(cfg, PD, f)
    np.testing.assert_allclose(evaluate(s, f), s_ref, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(evaluate(t, f), t_ref, rtol=1e-9, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(
    mode_disc=st.sampled_from([(ACC, "zoh"), (ACC, "tustin"), (CACC, "tustin")]),
    h=st.floats(0.2, 3.0),
    kp=st.floats(0.1, 5.0),
    kd=st.floats(0.1, 5.0),
)
def test_s_plus_h_t_is_one(mode_disc, h, kp, kd):
    # S + H T = 1 whatever the controller; CACC needs H * (1/H) = 1 exactly,
    # which holds when both are Tustin images (ZOH-mode CACC has a sampled H)
    mode, disc = mode_disc
    cfg = PlatoonConfig.from_flat(mode=mode, h=h, discretization=disc)
    K = Controller.from_coefficients([-kd / TS, kp + kd / TS], [0.0, 1.0], TS)
    s, t = closed_loops(cfg, K)
    f = freqs()
    hz = evaluate(loop_blocks(cfg).h, f)
    np.testing.assert_allclose(evaluate(s, f) + hz * evaluate(t, f), 1.0, atol=1e-9)


def test_cacc_without_feedforward_equals_acc():
    # D = 0: CACC's T collapses to the ACC expression G K / (1 + G H K)
    acc = PlatoonConfig.from_flat(mode=ACC, h=0.5)
    cacc = PlatoonConfig.from_flat(mode=CACC, h=0.5)
    f = freqs(30)
    t_acc = evaluate(closed_loops(acc, PD)[1], f)
    b = loop_blocks(cacc)
    z = np.exp(2j * np.pi * f * TS)
    L = b.g(z) * b.h(z) * PD.tf(z)
    np.testing.assert_allclose(t_acc, b.g(z) * PD.tf(z) / (1 + L), rtol=1e-9)


def test_mode_checked_wrappers():
    with pytest.raises(ConfigError):
        cacc_closed_loops(PlatoonConfig(), PD)
    with pytest.raises(ConfigError):
        acc_closed_loops(PlatoonConfig.from_flat(mode="CACC"), PD)


def test_zero_controller_loops():
    f = freqs(10)
    s, t = closed_loops(PlatoonConfig(), Controller.zero(3, TS))
    np.testing.assert_allclose(evaluate(s, f), 1.0)
    np.testing.assert_allclose(evaluate(t, f), 0.0)
    cfg = PlatoonConfig.from_flat(mode="CACC")
    s, t = closed_loops(cfg, Controller.zero(3, TS))
    b = loop_blocks(cfg)
    np.testing.assert_allclose(evaluate(s, f), 1 - evaluate(b.d, f), atol=1e-12)
    np.testing.assert_allclose(evaluate(t, f), evaluate(b.ff, f), atol=1e-12)


def test_controller_ts_mismatch():
    K = Controller.from_coefficients([1.0], [0.0, 1.0], 0.2)
    with pytest.raises(DomainError):
        closed_loops(PlatoonConfig(), K)


def test_continuous_controller_uses_continuous_blocks():
    cfg = PlatoonConfig()
    K = RationalTF([1.0, 2.0], [1.0, 0.05])
    s, t = closed_loops(cfg, K)
    w = 0.7
    G = RationalTF([1.0], [0.0, 0.0, 1.0, 0.1]) * pade(0.2, 4)
    L = G(1j * w) * (1 + 1j * w) * K(1j * w)
    assert s(1j * w) == pytest.approx(1 / (1 + L))


@pytest.mark.parametrize(
    "mode,structure,disc",
    [(ACC, None, "zoh"), (ACC, TRADITIONAL, "zoh"), (CACC, None, "tustin")],
)
def test_generalized_plant_lft_matches_closed_loops(mode, structure, disc):
    # the CACC block plant assumes H * (1/H) = 1, exact only for Tustin H
    cfg = PlatoonConfig.from_flat(mode=mode, discretization=disc)
    W = default_weights(TS)
    if structure is None:
        K, P = PD, augmented_plant(cfg, W)
    else:
        K = Controller.from_coefficients([-8.0, 10.0], [0.0, 1.0], TS, TRADITIONAL)
        P = augmented_plant_traditional(cfg, W)
    # the LFT form W_S - W_S L K/(1+LK) cancels badly where |L| is huge, so stay
    # above the deep low-frequency band
    f = np.sort(np.random.default_rng(1).uniform(0.02, 4.9, 50))
    resp = P.lft_response(K, f)
    s, t = closed_loops(cfg, K)
    np.testing.assert_allclose(
        resp[P.row("ws_s")], evaluate(W.ws, f) * evaluate(s, f), rtol=1e-8, atol=1e-12
    )
    np.testing.assert_allclose(
        resp[P.row("wt_t")], evaluate(W.wt, f) * evaluate(t, f), rtol=1e-8, atol=1e-12
    )
    if "t" in P.labels:
        np.testing.assert_allclose(resp[P.row("t")], evaluate(t, f), rtol=1e-8, atol=1e-12)


def test_control_sensitivity_pointwise():
    cfg = PlatoonConfig()
    f = freqs(30)
    b = loop_blocks(cfg)
    z = np.exp(2j * np.pi * f * TS)
    L = b.g(z) * b.h(z) * PD.tf(z)
    u = control_sensitivity(cfg, PD)
    np.testing.assert_allclose(evaluate(u, f), PD.tf(z) / (1 + L), rtol=1e-9)


def test_string_stability_fn_is_t():
    cfg = PlatoonConfig()
    f = freqs(5)
    np.testing.assert_allclose(
        evaluate(string_stability_fn(cfg, PD), f), evaluate(closed_loops(cfg, PD)[1], f)
    )
