import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from predictive_csi import channel as ch
from predictive_csi import kalman as kf
from predictive_csi.errors import ContractViolation

from oracles import ScalarRLS


def scalar_model(phi, q_w, q_v):
    return kf.StateSpaceModel(np.array([[phi]]), np.array([[q_w]]), np.array([1.0]), q_v)


class TestInitBelief:
    @pytest.mark.parametrize("p", [1, 2, 3, 5])
    def test_zero_state_identity_covariance(self, p):
        b = kf.init_belief(p)
        assert np.array_equal(b.state_estimate, np.zeros(p))
        assert np.array_equal(b.error_covariance, np.eye(p))
        assert np.trace(b.error_covariance).real == p

    def test_batch_shape(self):
        b = kf.init_belief(2, (3, 4))
        assert b.state_estimate.shape == (3, 4, 2)
        assert b.error_covariance.shape == (2, 2)

    def test_bad_order(self):
        with pytest.raises(ContractViolation):
            kf.init_belief(0)


class TestModel:
    def test_from_fading(self):
        cfg = ch.gauss_markov(0.6)
        m = kf.StateSpaceModel.from_fading(cfg, 0.1)
        assert m.transition[0, 0] == pytest.approx(0.8)
        assert m.process_noise_cov[0, 0] == pytest.approx(0.36)
        assert m.measurement_noise_cov == 0.1

    def test_frozen_allowed(self):
        kf.StateSpaceModel.from_fading(ch.gauss_markov(0.0), 0.0)

    def test_unstable_with_noise_rejected(self):
        with pytest.raises(ContractViolation):
            scalar_model(1.0, 0.1, 0.1)

    def test_dimension_mismatch(self):
        with pytest.raises(ContractViolation):
            kf.StateSpaceModel(np.eye(2), np.eye(3), np.array([1.0, 0.0]), 0.1)

    def test_non_hermitian_noise(self):
        with pytest.raises(ContractViolation):
            kf.StateSpaceModel(0.5 * np.eye(2), np.array([[1.0, 1j], [1j, 1.0]]), np.array([1.0, 0.0]), 0.1)

    def test_negative_measurement_noise(self):
        with pytest.raises(ContractViolation):
            scalar_model(0.5, 0.1, -1.0)


class TestPredict:
    def test_hand_arithmetic(self):
        prior = kf.predict(kf.init_belief(1), scalar_model(0.8, 0.36, 0.1))
        assert prior.state_estimate[0] == 0
        assert prior.error_covariance[0, 0].real == pytest.approx(1.0)

    def test_identity_noiseless_unchanged(self):
        b = kf.KalmanBelief(np.array([1 + 2j, -0.5j]), np.array([[2.0, 0.3j], [-0.3j, 1.0]]))
        model = kf.StateSpaceModel(np.eye(2), np.zeros((2, 2)), np.array([1.0, 0.0]), 0.1)
        out = kf.predict(b, model)
        assert np.array_equal(out.state_estimate, b.state_estimate)
        np.testing.assert_allclose(out.error_covariance, b.error_covariance, atol=1e-15)

    def test_converges_to_lyapunov(self):
        model = scalar_model(0.8, 0.36, 0.1)
        b = kf.KalmanBelief(np.zeros(1, dtype=complex), np.array([[5.0 + 0j]]))
        for _ in range(200):
            b = kf.predict(b, model)
        # Fixed point of P = 0.64 P + 0.36.
        assert b.error_covariance[0, 0].real == pytest.approx(1.0, abs=1e-12)

    def test_order_mismatch(self):
        with pytest.raises(ContractViolation):
            kf.predict(kf.init_belief(2), scalar_model(0.5, 0.1, 0.1))


class TestUpdate:
    def test_noiseless_measurement_trusted(self):
        model = scalar_model(0.5, 0.1, 0.0)
        post, _ = kf.update(kf.init_belief(1), np.array(0.7 - 0.2j), model)
        assert post.state_estimate[0] == 0.7 - 0.2j
        assert post.error_covariance[0, 0] == 0

    def test_hand_arithmetic(self):
        model = scalar_model(1.0, 0.0, 1.0)
        post, inn = kf.update(kf.init_belief(1), np.array(2.0), model)
        assert inn.gain[0] == pytest.approx(0.5)
        assert inn.value == pytest.approx(2.0)
        assert post.state_estimate[0] == pytest.approx(1.0)
        assert post.error_covariance[0, 0].real == pytest.approx(0.5)

    def test_zero_innovation_variance_gives_zero_gain(self):
        model = scalar_model(1.0, 0.0, 0.0)
        b = kf.KalmanBelief(np.array([0.3 + 0j]), np.zeros((1, 1), dtype=complex))
        post, inn = kf.update(b, np.array(5.0), model)
        assert inn.gain[0] == 0
        assert post.state_estimate[0] == 0.3

    @pytest.mark.parametrize("sigma2", [0.01, 0.5, 3.0])
    def test_static_channel_equals_rls(self, sigma2):
        """Criterion-grade oracle: 10^3 steps agree with RLS to 1e-12."""
        rng = np.random.default_rng(5)
        ys = (1.3 - 0.4j) + np.sqrt(sigma2 / 2) * (rng.standard_normal(1000) + 1j * rng.standard_normal(1000))
        model = scalar_model(1.0, 0.0, sigma2)
        rls = ScalarRLS(0.0, 1.0, sigma2)
        b = kf.init_belief(1)
        for n, y in enumerate(ys, start=1):
            b, _ = kf.update(kf.predict(b, model), np.array(y), model)
            r = rls.update(y)
            assert abs(b.state_estimate[0] - r) < 1e-12
            assert abs(b.error_covariance[0, 0].real - rls.p) < 1e-12
            assert b.error_covariance[0, 0].real == pytest.approx(sigma2 / (n + sigma2), rel=1e-12)
        assert abs(b.state_estimate[0] - ScalarRLS.batch(ys, 0.0, 1.0, sigma2)) < 1e-12

    def test_batched_matches_single(self):
        cfg = ch.jakes(2, 0.05)
        model = kf.StateSpaceModel.from_fading(cfg, 0.2)
        rng = np.random.default_rng(8)
        ys = rng.standard_normal((50, 3)) + 1j * rng.standard_normal((50, 3))
        batch = kf.init_belief(2, (3,))
        singles = [kf.init_belief(2) for _ in range(3)]
        for y in ys:
            batch, _ = kf.update(kf.predict(batch, model), y, model)
            for i in range(3):
                singles[i], _ = kf.update(kf.predict(singles[i], model), np.array(y[i]), model)
        for i in range(3):
            np.testing.assert_allclose(batch.state_estimate[i], singles[i].state_estimate, atol=1e-13)

    @settings(max_examples=40, deadline=None)
    @given(
        # |coefficients| summing below 1 keeps every companion matrix stable.
        st.lists(st.floats(-0.3, 0.3), min_size=1, max_size=3),
        st.floats(0.01, 2.0),
        st.floats(0.0, 2.0),
        st.integers(0, 2**32 - 1),
    )
    def test_covariance_stays_hermitian_psd(self, coeffs, q, r, seed):
        p = len(coeffs)
        phi = np.zeros((p, p), dtype=complex)
        phi[0] = coeffs
        phi[1:, :-1] = np.eye(p - 1)
        q_w = np.zeros((p, p))
        q_w[0, 0] = q
        m = np.zeros(p)
        m[0] = 1.0
        model = kf.StateSpaceModel(phi, q_w, m, r)
        rng = np.random.default_rng(seed)
        b = kf.init_belief(p)
        for _ in range(60):
            b = kf.predict(b, model)
            b, _ = kf.update(b, np.array(rng.standard_normal() + 1j * rng.standard_normal()), model)
            cov = b.error_covariance
            assert np.array_equal(cov, cov.conj().T)
            assert np.min(np.linalg.eigvalsh(cov)) > -1e-10


class TestPredictChannel:
    def test_static(self):
        b = kf.KalmanBelief(np.array([0.4 + 0.1j]), np.eye(1))
        assert kf.predict_channel(b, scalar_model(1.0, 0.0, 0.1)) == 0.4 + 0.1j

    def test_scalar_product(self):
        b = kf.KalmanBelief(np.array([1 + 0j]), np.eye(1))
        assert kf.predict_channel(b, scalar_model(0.8, 0.36, 0.1)) == pytest.approx(0.8)

    def test_second_order(self):
        a1, a2 = 0.9 + 0.1j, -0.3
        phi = np.array([[a1, a2], [1, 0]])
        model = kf.StateSpaceModel(phi, np.diag([0.1, 0.0]), np.array([1.0, 0.0]), 0.1)
        u, v = 0.5 - 1j, 2.0 + 0.25j
        b = kf.KalmanBelief(np.array([u, v]), np.eye(2))
        assert kf.predict_channel(b, model) == pytest.approx((phi @ np.array([u, v]))[0])
        assert kf.predict_channel(b, model) == pytest.approx(a1 * u + a2 * v)


class TestMatchedModel:
    def test_innovations_white(self):
        """On a matched model the innovation sequence is uncorrelated."""
        cfg = ch.gauss_markov(0.3)
        n = 100_000
        h, _ = ch.simulate(cfg, n, np.random.default_rng(31))
        rng = np.random.default_rng(32)
        v = np.sqrt(0.1 / 2) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
        model = kf.StateSpaceModel.from_fading(cfg, 0.1)
        b = kf.init_belief(1, (1,))
        innov = np.empty(n, dtype=complex)
        for t in range(n):
            b, inn = kf.update(kf.predict(b, model), np.array([h[t] + v[t]]), model)
            innov[t] = inn.value[0]
        tail = innov[100:]
        rho = np.vdot(tail[:-1], tail[1:]) / np.vdot(tail, tail)
        assert abs(rho) < 0.02

    def test_filter_beats_raw_observation(self):
        cfg = ch.gauss_markov(0.2)
        n = 10_000
        h, _ = ch.simulate(cfg, n, np.random.default_rng(41))
        rng = np.random.default_rng(42)
        y = h + np.sqrt(0.1 / 2) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
        model = kf.StateSpaceModel.from_fading(cfg, 0.1)
        b = kf.init_belief(1, (1,))
        est = np.empty(n, dtype=complex)
        for t in range(n):
            b, _ = kf.update(kf.predict(b, model), y[t : t + 1], model)
            est[t] = b.state_estimate[0, 0]
        assert np.mean(np.abs(est - h) ** 2) < np.mean(np.abs(y - h) ** 2)
