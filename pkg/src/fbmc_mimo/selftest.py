"""Fast built-in invariant suite.

Every check looks its target up through the module object at call time, so
a monkeypatched (corrupted) implementation is exercised rather than a copy
bound at import.
"""

from __future__ import annotations

import logging

import numpy as np

from . import blind, channel, detectors, metrics, modem, prototype

log = logging.getLogger(__name__)

CHECKS = []


def check(fn):
    CHECKS.append(fn)
    return fn


def _rng(tag):
    return np.random.default_rng([20140, tag])


# -- prototype ---------------------------------------------------------------


@check
def prototype_small_case():
    f = prototype.design_prototype(2, 4)
    h = f.coefficients
    return len(h) == 9 and np.allclose(h, h[::-1]) and abs(np.sum(h**2) - 1) < 1e-12


@check
def prototype_deterministic():
    a = prototype.design_prototype(32, 6).coefficients
    b = prototype.design_prototype(32, 6).coefficients
    return np.array_equal(a, b)


@check
def prototype_nyquist():
    return prototype.nyquist_residual(prototype.design_prototype(32, 6)) <= 1e-3


@check
def residual_of_rectangle_and_impulse():
    rect = np.ones(8) / np.sqrt(8)
    imp = np.zeros(9)
    imp[4] = 1.0
    return prototype.nyquist_residual(rect, 8) == 0 and prototype.nyquist_residual(imp, 8) == 0


# -- modem --------------------------------------------------------------------


@check
def single_pulse_energy():
    f = prototype.design_prototype(16, 6)
    s = np.zeros((16, 1))
    s[0, 0] = 1.0
    x = modem.cmt_modulate(s, f)
    return abs(np.sum(np.abs(x) ** 2) - 1) < 1e-9


@check
def zero_grid_zero_signal():
    f = prototype.design_prototype(8, 4)
    x = modem.cmt_modulate(np.zeros((8, 10)), f)
    y = modem.cmt_demodulate(np.zeros_like(x), f, 8, 10)
    return not np.any(x) and not np.any(y)


@check
def cmt_round_trip():
    L, T = 16, 60
    f = prototype.design_prototype(L, 6)
    s = modem.random_symbols((L, T), modem.pam_alphabet(2), _rng(1))
    y = modem.cmt_demodulate(modem.cmt_modulate(s, f), f, L, T).real
    keep = slice(6, T - 6)
    err = np.mean((y[:, keep] - s[:, keep]) ** 2)
    return metrics.to_db(1 / err) >= 50


@check
def ofdm_round_trip():
    L, T = 16, 8
    rng = _rng(2)
    s = rng.standard_normal((L, T)) + 1j * rng.standard_normal((L, T))
    y = modem.ofdm_demodulate(modem.ofdm_modulate(s, L, 4), L, 4, T)
    return np.allclose(y, s, atol=1e-12)


# -- channel ------------------------------------------------------------------


@check
def sui4_tap_delays():
    ch = channel.realize_sui4(1, 1, 2.8e6, 7)
    return set(np.flatnonzero(ch.taps[0, 0])) == {0, 4, 11}


@check
def flat_tap_gains():
    c = 0.3 - 0.7j
    ch = channel.ChannelSet(np.full((1, 1, 1), c))
    return np.allclose(channel.subcarrier_gains(ch, 16), c)


@check
def mirrored_gains_conjugate():
    taps = _rng(3).standard_normal((1, 1, 5)) + 0j
    H = channel.subcarrier_gains(channel.ChannelSet(taps), 16)[:, 0, 0]
    return np.allclose(H, np.conj(H[::-1]))


@check
def superposition():
    rng = _rng(4)
    g = np.array([0.5 + 1j, -2.0])
    ch = channel.ChannelSet(g.reshape(2, 1, 1))
    s = rng.standard_normal((2, 50)) + 1j * rng.standard_normal((2, 50))
    y = channel.apply_channel(s, ch)
    return np.allclose(y[0], g[0] * s[0] + g[1] * s[1])


# -- detectors ----------------------------------------------------------------


@check
def stacking_identities():
    sys = detectors.stack_real(np.array([[1 + 1j]]))
    ht, hb = sys.H_tilde[:, 0], sys.H_breve[:, 0]
    return np.array_equal(ht, [1, 1]) and np.array_equal(hb, [-1, 1]) and ht @ hb == 0


@check
def mf_single_user_exact():
    rng = _rng(5)
    h = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    sys = detectors.stack_real(h)
    s, q = rng.standard_normal(2)
    x = sys.H_tilde[:, 0] * s + sys.H_breve[:, 0] * q
    return abs(detectors.detect(detectors.mf_weights(sys), x)[0] - s) < 1e-12


@check
def mf_sinr_formula():
    sys = detectors.stack_real(np.array([1 + 1j, 1 + 1j]), 0.1)
    return np.allclose(detectors.sinr_mf_theory(sys), [40.0])


@check
def mf_sinr_noise_free_single_user():
    sys = detectors.stack_real(np.array([1 - 2j]), 0.0)
    return np.all(np.isinf(detectors.sinr_mf_theory(sys)))


@check
def mmse_beats_mf():
    rng = _rng(6)
    H = rng.standard_normal((4, 3)) + 1j * rng.standard_normal((4, 3))
    sys = detectors.stack_real(H, 0.2)
    return np.all(detectors.sinr_mmse_theory(sys) >= detectors.sinr_mf_theory(sys) * (1 - 1e-12))


@check
def mmse_equals_mf_single_user():
    sys = detectors.stack_real(np.array([0.3 + 1j, -1.2, 0.5j]), 0.3)
    return np.allclose(detectors.sinr_mmse_theory(sys), detectors.sinr_mf_theory(sys))


@check
def simplified_mmse_is_mf():
    rng = _rng(7)
    H = rng.standard_normal((5, 2)) + 1j * rng.standard_normal((5, 2))
    sys = detectors.stack_real(H, 0.1)
    return np.allclose(detectors.mf_as_simplified_mmse(sys).W, detectors.mf_weights(sys).W, atol=1e-12)


@check
def mf_sinr_monte_carlo():
    """Closed-form MF SINR against a direct simulation of the stacked model."""
    rng = _rng(8)
    H = rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))
    sys = detectors.stack_real(H, 0.5)
    n = 200_000
    s, q = rng.standard_normal((2, 2, n))
    v = np.sqrt(sys.sigma_v2) * rng.standard_normal((8, n))
    x = sys.H_tilde @ s + sys.H_breve @ q + v
    est = detectors.detect(detectors.mf_weights(sys), x)
    sim = metrics.to_db(metrics.measure_sinr(est, s))
    return np.all(np.abs(sim - metrics.to_db(detectors.sinr_mf_theory(sys))) < 0.2)


# -- blind equalizer ----------------------------------------------------------


@check
def godard_constants():
    return blind.godard_R([-1, 1], 2) == 1 and abs(blind.godard_R([-3, -1, 1, 3], 2) - 8.2) < 1e-12


@check
def godard_fixed_point():
    p = blind.GodardParams()
    return blind.godard_step(1.0 + 0j, 1.0 + 0j, p) == 1 and blind.godard_step(0.7 + 0.2j, 0j, p) == 0.7 + 0.2j


# -- metrics ------------------------------------------------------------------


@check
def sinr_scale_invariant():
    s = _rng(9).choice([-1.0, 1.0], 200)
    return np.isinf(metrics.measure_sinr(s, s)) and np.isinf(metrics.measure_sinr(2 * s, s))


@check
def constant_modulus_papr():
    x = np.exp(2j * np.pi * _rng(10).random(1000))
    return np.allclose(metrics.papr_ccdf(x, 10).papr_db, 0, atol=1e-9)


def run_selftest(verbose: bool = False) -> int:
    """Run all checks; return the number of failures (0 means healthy)."""
    failures = 0
    for fn in CHECKS:
        try:
            ok = bool(fn())
            detail = ""
        except Exception as exc:  # a crash is a failed check
            ok, detail = False, f" ({type(exc).__name__}: {exc})"
        if not ok:
            failures += 1
        if verbose or not ok:
            print(f"{'ok  ' if ok else 'FAIL'} {fn.__name__}{detail}")
    return failures
