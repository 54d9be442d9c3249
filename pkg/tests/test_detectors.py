"""Real-stacked model, MF/MMSE weights and their closed-form SINR."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fbmc_mimo.detectors import (
    DegenerateUserError,
    DetectorWeights,
    SingularSystemError,
    complex_mf_weights,
    complex_mmse_weights,
    complex_sinr,
    detect,
    mf_as_simplified_mmse,
    mf_weights,
    mmse_weights,
    sinr_mf_theory,
    sinr_mmse_theory,
    stack_real,
)
from fbmc_mimo.metrics import to_db

from conftest import crandn, monte_carlo_sinr

finite = st.floats(-10, 10, allow_nan=False)
complex_mats = st.tuples(st.integers(1, 8), st.integers(1, 4)).flatmap(
    lambda nk: st.tuples(arrays(float, nk, elements=finite), arrays(float, nk, elements=finite))
)


def eq12(h, sigma_v2):
    """Term-by-term MF SINR oracle written from the scalar expansion."""
    ht = np.vstack([h.real, h.imag])
    hb = np.vstack([-h.imag, h.real])
    K = h.shape[1]
    out = []
    for l in range(K):
        n2 = ht[:, l] @ ht[:, l]
        interf = sum((ht[:, l] @ ht[:, i]) ** 2 + (ht[:, l] @ hb[:, i]) ** 2 for i in range(K) if i != l)
        out.append(n2**2 / (interf + sigma_v2 * n2))
    return np.array(out)


class TestStacking:
    def test_direct_substitution(self):
        sys = stack_real(np.array([[1 + 1j]]))
        np.testing.assert_array_equal(sys.H_tilde[:, 0], [1, 1])
        np.testing.assert_array_equal(sys.H_breve[:, 0], [-1, 1])
        assert sys.H_tilde[:, 0] @ sys.H_breve[:, 0] == 0

    def test_shapes_and_gamma(self, rng):
        sys = stack_real(crandn(rng, 5, 3), 0.1)
        assert sys.A.shape == (10, 6)
        assert (sys.num_antennas, sys.num_users) == (5, 3)
        np.testing.assert_array_equal(sys.Gamma, np.eye(3, 6))
        assert sys.D.shape == (3,)

    @settings(max_examples=60, deadline=None)
    @given(complex_mats)
    def test_exact_identities(self, parts):
        re, im = parts
        H = re + 1j * im
        if not np.all(np.any(H != 0, axis=0)):
            return
        sys = stack_real(H)
        Ht, Hb = sys.H_tilde, sys.H_breve
        scale = max(np.max(np.abs(H)) ** 2, 1e-300)
        np.testing.assert_allclose(np.einsum("al,al->l", Ht, Hb), 0, atol=1e-14 * scale)
        np.testing.assert_allclose(np.sum(Ht**2, 0), np.sum(Hb**2, 0), rtol=1e-14)
        np.testing.assert_allclose(sys.D, np.sum(np.abs(H) ** 2, 0), rtol=1e-14)
        G = H.conj().T @ H
        np.testing.assert_allclose(Ht.T @ Ht, G.real, atol=1e-12 * scale * H.shape[0])
        # entry [l, i] is Im(h_i^H h_l) = -Im(h_l^H h_i), the sign following
        # from h^ = [-Im h; Re h] by direct expansion
        np.testing.assert_allclose(Ht.T @ Hb, G.imag.T, atol=1e-12 * scale * H.shape[0])

    def test_duplicate_users_construct(self, rng):
        h = crandn(rng, 4)
        sys = stack_real(np.column_stack([h, h]))
        assert sys.A.shape == (8, 4)

    def test_zero_user(self):
        with pytest.raises(DegenerateUserError):
            stack_real(np.array([[1, 0], [2j, 0]]))

    def test_negative_noise(self):
        with pytest.raises(ValueError):
            stack_real(np.ones((2, 1)), -0.1)

    def test_vector_input(self):
        assert stack_real(np.array([1, 1j])).A.shape == (4, 2)


class TestMatchedFilter:
    def test_single_user_exact(self, rng):
        sys = stack_real(crandn(rng, 7))
        s, q = 0.7, -1.3
        x = sys.H_tilde[:, 0] * s + sys.H_breve[:, 0] * q
        assert detect(mf_weights(sys), x)[0] == pytest.approx(s, abs=1e-13)

    def test_orthogonal_users_exact(self):
        H = np.array([[1, 0], [0, 1j], [1j, 0], [0, 1]], dtype=complex)
        sys = stack_real(H)
        assert abs(sys.H_tilde[:, 0] @ sys.H_tilde[:, 1]) < 1e-15
        assert abs(sys.H_tilde[:, 0] @ sys.H_breve[:, 1]) < 1e-15
        s, q = np.array([1.0, -1.0]), np.array([0.3, 2.0])
        x = sys.H_tilde @ s + sys.H_breve @ q
        np.testing.assert_allclose(detect(mf_weights(sys), x), s, atol=1e-14)

    def test_term_by_term_expansion(self, rng):
        sys = stack_real(crandn(rng, 4, 2))
        s, q = rng.standard_normal(2), rng.standard_normal(2)
        x = sys.H_tilde @ s + sys.H_breve @ q
        est = detect(mf_weights(sys), x)
        Ht, Hb, D = sys.H_tilde, sys.H_breve, sys.D
        for l, i in ((0, 1), (1, 0)):
            expected = s[l] + (Ht[:, l] @ (Ht[:, i] * s[i] + Hb[:, i] * q[i])) / D[l]
            assert est[l] == pytest.approx(expected, abs=1e-12)

    def test_noise_term(self, rng):
        sys = stack_real(crandn(rng, 3), 0.5)
        v = rng.standard_normal(6)
        x = sys.H_tilde[:, 0] * 1.0 + v
        expected = 1.0 + sys.H_tilde[:, 0] @ v / sys.D[0]
        assert detect(mf_weights(sys), x)[0] == pytest.approx(expected)

    def test_simplified_mmse_single_user(self, rng):
        sys = stack_real(crandn(rng, 5))
        np.testing.assert_allclose(mf_as_simplified_mmse(sys).W[:, 0], sys.H_tilde[:, 0] / sys.D[0], atol=1e-15)

    def test_simplified_mmse_random(self, rng):
        for _ in range(20):
            sys = stack_real(crandn(rng, 6, 3), rng.random())
            np.testing.assert_allclose(mf_as_simplified_mmse(sys).W, mf_weights(sys).W, atol=1e-12)


class TestDetect:
    def test_picks_coordinate(self):
        W = DetectorWeights(np.eye(4, 2), "MF")
        np.testing.assert_array_equal(detect(W, np.eye(4)[0]), [1, 0])

    def test_block_input(self, rng):
        sys = stack_real(crandn(rng, 4, 2))
        x = rng.standard_normal((8, 10))
        np.testing.assert_allclose(detect(mf_weights(sys), x), mf_weights(sys).W.T @ x)

    def test_dimension_mismatch(self, rng):
        sys = stack_real(crandn(rng, 4, 2))
        with pytest.raises(ValueError):
            detect(mf_weights(sys), np.ones(7))

    def test_mmse_has_lower_mse_than_mf(self, rng):
        sys = stack_real(crandn(rng, 4, 3), 0.3)
        n = 100_000
        sq = rng.standard_normal((6, n))
        x = sys.A @ sq + np.sqrt(0.3) * rng.standard_normal((8, n))
        mse = [np.mean((detect(w, x) - sq[:3]) ** 2) for w in (mmse_weights(sys), mf_weights(sys))]
        assert mse[0] <= mse[1]


class TestMmse:
    def test_large_noise_tends_to_mf_direction(self, rng):
        sys = stack_real(crandn(rng, 6, 3), 1e6)
        W = mmse_weights(sys).W
        ref = sys.A @ sys.Gamma.T
        cos = np.sum(W * ref, 0) / np.linalg.norm(W, axis=0) / np.linalg.norm(ref, axis=0)
        assert np.all(cos > 1 - 1e-6)

    def test_zero_forcing_square(self, rng):
        sys = stack_real(crandn(rng, 3, 3), 0.0)
        sq = rng.standard_normal(6)
        np.testing.assert_allclose(detect(mmse_weights(sys), sys.A @ sq), sq[:3], atol=1e-9)

    def test_singular_without_noise(self, rng):
        h = crandn(rng, 4)
        with pytest.raises(SingularSystemError):
            mmse_weights(stack_real(np.column_stack([h, h]), 0.0))

    def test_duplicate_users_with_noise(self, rng):
        h = crandn(rng, 4)
        W = mmse_weights(stack_real(np.column_stack([h, h]), 0.1)).W
        assert np.all(np.isfinite(W))

    def test_orthogonal_columns_noise_free_equals_mf(self):
        H = np.array([[1, 0], [0, 2], [0, 0], [0, 0]], dtype=complex)
        sys = stack_real(H, 0.0)
        np.testing.assert_allclose(mmse_weights(sys).W, mf_weights(sys).W, atol=1e-15)

    def test_minimizes_empirical_cost(self, rng):
        sys = stack_real(crandn(rng, 8, 2), 0.1)
        n = 100_000
        sq = rng.standard_normal((4, n))
        x = sys.A @ sq + np.sqrt(0.1) * rng.standard_normal((16, n))
        Wo = mmse_weights(sys).W

        def cost(W):
            return np.mean(np.sum((W.T @ x - sq[:2]) ** 2, axis=0))

        base = cost(Wo)
        for _ in range(10):
            delta = rng.standard_normal(Wo.shape)
            assert cost(Wo + 0.05 * delta / np.linalg.norm(delta)) > base


class TestSinrFormulas:
    def test_single_user_arithmetic(self):
        sys = stack_real(np.array([1 + 1j, 1 + 1j]), 0.1)
        np.testing.assert_array_equal(sys.H_tilde[:, 0], [1, 1, 1, 1])
        sinr = sinr_mf_theory(sys)
        assert sinr[0] == pytest.approx(40.0)
        assert to_db(sinr[0]) == pytest.approx(16.02, abs=0.01)

    def test_noise_free_single_user_infinite(self, rng):
        sys = stack_real(crandn(rng, 3), 0.0)
        assert np.isinf(sinr_mf_theory(sys)[0])

    def test_matches_term_by_term_oracle(self, rng):
        for _ in range(10):
            H = crandn(rng, 5, 3)
            np.testing.assert_allclose(sinr_mf_theory(stack_real(H, 0.2)), eq12(H, 0.2), rtol=1e-12)

    def test_mf_formula_equals_weight_evaluation(self, rng):
        from fbmc_mimo.detectors import _sinr_from_weights

        sys = stack_real(crandn(rng, 6, 3), 0.4)
        np.testing.assert_allclose(sinr_mf_theory(sys), _sinr_from_weights(mf_weights(sys).W, sys), rtol=1e-12)

    def test_single_user_mmse_equals_mf(self, rng):
        sys = stack_real(crandn(rng, 6), 0.25)
        np.testing.assert_allclose(sinr_mmse_theory(sys), sinr_mf_theory(sys), rtol=1e-10)

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), N=st.integers(1, 10), K=st.integers(1, 4), s2=st.floats(1e-3, 10))
    def test_mmse_dominates_mf(self, seed, N, K, s2):
        rng = np.random.default_rng(seed)
        sys = stack_real(crandn(rng, N, K), s2)
        assert np.all(sinr_mmse_theory(sys) >= sinr_mf_theory(sys) * (1 - 1e-9))

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), c=st.floats(0.01, 100).map(lambda x: x * np.random.choice([-1, 1])))
    def test_scale_invariance(self, seed, c):
        rng = np.random.default_rng(seed)
        H = crandn(rng, 4, 3)
        a = sinr_mf_theory(stack_real(H, 0.3))
        b = sinr_mf_theory(stack_real(c * H, 0.3 * c**2))
        np.testing.assert_allclose(a, b, rtol=1e-9)

    def test_monte_carlo_mf_and_mmse(self, rng):
        sys = stack_real(crandn(rng, 4, 2), 0.3)
        for W, theory in (
            (mf_weights(sys).W, sinr_mf_theory(sys)),
            (mmse_weights(sys).W, sinr_mmse_theory(sys)),
        ):
            sim = monte_carlo_sinr(sys, W, 1_000_000, rng)
            np.testing.assert_allclose(to_db(sim), to_db(theory), atol=0.2)

    def test_processing_gain_law(self):
        rng = np.random.default_rng(3)
        s2 = 10 ** 0.1
        for N in (8, 32, 128):
            vals = [sinr_mf_theory(stack_real(crandn(rng, N) / np.sqrt(2), s2))[0] for _ in range(1000)]
            gain = to_db(np.mean(vals) * s2)
            assert gain == pytest.approx(to_db(N), abs=0.3)

    def test_interference_vanishes_as_one_over_n(self):
        rng = np.random.default_rng(4)
        Ns = [8, 16, 32, 64, 128, 256]
        med = []
        for N in Ns:
            isr = [1 / sinr_mf_theory(stack_real(crandn(rng, N, 4) / np.sqrt(2), 0.0)) for _ in range(400)]
            med.append(np.median(isr))
        slopes = np.diff(to_db(med))
        assert np.all(np.abs(slopes + 3.0) <= 1.0)


class TestComplexBaseline:
    def test_mf_mmse_single_user_agree(self, rng):
        H = crandn(rng, 5, 1)
        a = complex_sinr(complex_mf_weights(H), H, 0.2)
        b = complex_sinr(complex_mmse_weights(H, 0.2), H, 0.2)
        np.testing.assert_allclose(a, b, rtol=1e-10)
        assert a[0] == pytest.approx(np.sum(np.abs(H) ** 2) / 0.2)

    def test_mmse_dominates(self, rng):
        H = crandn(rng, 6, 3)
        assert np.all(
            complex_sinr(complex_mmse_weights(H, 0.1), H, 0.1) >= complex_sinr(complex_mf_weights(H), H, 0.1) * (1 - 1e-12)
        )

    def test_zero_user(self):
        with pytest.raises(DegenerateUserError):
            complex_mf_weights(np.zeros((3, 1)))

    def test_singular(self, rng):
        h = crandn(rng, 3)
        with pytest.raises(SingularSystemError):
            complex_mmse_weights(np.column_stack([h, h]), 0.0)
