import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from predictive_csi.channel import ChannelTensor
from predictive_csi.errors import ContractViolation, DegenerateChannelError
from predictive_csi.metrics import (
    MetricsRecord,
    PrecodingSetup,
    mf_precoder,
    mse,
    received_snr,
    snr_gain_percent,
    to_db,
)

complex_entries = st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False)


def tensor(*shape, seed=0):
    rng = np.random.default_rng(seed)
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


class TestMSE:
    def test_perfect(self):
        h = tensor(5, 4, 2, 1)
        assert mse(h, h) == 0.0

    def test_constant_error(self):
        d = 0.3 - 0.4j
        actual = np.zeros((7, 1, 1, 1), dtype=complex)
        assert mse(actual, actual + d) == pytest.approx(abs(d) ** 2)

    def test_hand_listed_two_by_two(self):
        a = [ChannelTensor(np.array([[1, 2j], [0, 1]]).reshape(2, 2, 1)),
             ChannelTensor(np.array([[1, 1], [1, 1]]).reshape(2, 2, 1))]
        e = [ChannelTensor(np.array([[0, 2j], [1j, 1]]).reshape(2, 2, 1)),
             ChannelTensor(np.array([[1, 1], [1, -1]]).reshape(2, 2, 1))]
        # step 1: |1|^2 + |0|^2 + |-1j|^2 + 0 = 2 ; step 2: |2|^2 = 4
        total = 0.0
        for x, y in zip(a, e):
            for i in range(2):
                for j in range(2):
                    total += abs(x.gains[i, j, 0] - y.gains[i, j, 0]) ** 2
        assert mse(a, e) == pytest.approx(total / 2) == pytest.approx(3.0)

    def test_shape_mismatch(self):
        with pytest.raises(ContractViolation):
            mse(tensor(2, 2, 2, 1), tensor(3, 2, 2, 1))


class TestPrecoder:
    def test_aligned_beam(self):
        w = mf_precoder(np.array([1.0, 0.0]).reshape(2, 1, 1))
        np.testing.assert_allclose(w[:, 0, 0], [1, 0])

    def test_conjugate(self):
        w = mf_precoder((np.array([1, 1j]) / math.sqrt(2)).reshape(2, 1, 1))
        np.testing.assert_allclose(w[:, 0, 0], np.array([1, -1j]) / math.sqrt(2))

    @settings(max_examples=50)
    @given(arrays(np.complex128, (4, 2, 3), elements=complex_entries))
    def test_unit_norm(self, h):
        if np.any(np.sum(np.abs(h) ** 2, axis=(0, 1)) < 1e-12):
            return
        w = mf_precoder(h)
        norms = np.sqrt(np.sum(np.abs(w) ** 2, axis=(0, 1)))
        np.testing.assert_allclose(norms, 1.0, atol=1e-12)

    def test_zero_estimate(self):
        with pytest.raises(DegenerateChannelError):
            mf_precoder(np.zeros((4, 2, 1)))

    def test_setup_shape_check(self):
        with pytest.raises(ContractViolation):
            mf_precoder(tensor(2, 2, 1), PrecodingSetup(n_t=4, n_r=2))


class TestSNR:
    def test_miso_closed_form(self):
        h = tensor(4, 1, 1, seed=3)
        setup = PrecodingSetup(tx_power=2.0, noise_variance=0.5, n_t=4, n_r=1)
        snr = received_snr(h, mf_precoder(h), setup)
        assert snr == pytest.approx(2.0 * np.sum(np.abs(h) ** 2) / 0.5, rel=1e-12)

    def test_matches_matrix_form(self):
        h = tensor(4, 2, 3, seed=4)
        est = h + 0.3 * tensor(4, 2, 3, seed=5)
        setup = PrecodingSetup()
        w = mf_precoder(est, setup)
        ref = np.mean(
            [np.linalg.norm(ChannelTensor(h).matrix(k) @ w[:, :, k], "fro") ** 2 for k in range(3)]
        ) / (2 * 0.1)
        assert received_snr(h, w, setup) == pytest.approx(ref, rel=1e-12)

    def test_null_beam(self):
        h = np.array([1.0, 0.0]).reshape(2, 1, 1)
        w = np.array([0.0, 1.0]).reshape(2, 1, 1)
        assert received_snr(h, w, PrecodingSetup(n_t=2, n_r=1)) == 0.0

    def test_quadratic_in_channel(self):
        h = tensor(4, 2, 1, seed=6)
        w = mf_precoder(tensor(4, 2, 1, seed=7))
        s = PrecodingSetup()
        assert received_snr(2 * h, w, s) == pytest.approx(4 * received_snr(h, w, s), rel=1e-12)

    def test_noiseless_is_infinite(self):
        h = tensor(4, 2, 1)
        assert received_snr(h, mf_precoder(h), PrecodingSetup(noise_variance=0.0)) == math.inf

    def test_batched(self):
        h = tensor(5, 4, 2, 1)
        s = PrecodingSetup()
        out = received_snr(h, mf_precoder(h), s)
        assert out.shape == (5,)
        assert out[2] == pytest.approx(received_snr(h[2], mf_precoder(h[2]), s))

    def test_mf_is_best_for_perfect_csi(self):
        h = tensor(4, 2, 1, seed=8)
        s = PrecodingSetup()
        best = received_snr(h, mf_precoder(h), s)
        for seed in range(20):
            assert received_snr(h, mf_precoder(tensor(4, 2, 1, seed=100 + seed)), s) <= best + 1e-12


class TestGain:
    @pytest.mark.parametrize("p, c, g", [(1.17, 1.0, 17.0), (3.0, 3.0, 0.0), (2.0, 1.0, 100.0)])
    def test_values(self, p, c, g):
        assert snr_gain_percent(p, c) == pytest.approx(g)

    def test_zero_baseline(self):
        with pytest.raises(ValueError):
            snr_gain_percent(1.0, 0.0)


class TestRecords:
    def test_db(self):
        assert to_db(100.0) == pytest.approx(20.0)
        assert to_db(0.0) == -math.inf
        assert MetricsRecord(0.1, 10.0, 17.0).received_snr_db == pytest.approx(10.0)

    def test_negative_rejected(self):
        with pytest.raises(ContractViolation):
            MetricsRecord(-0.1, 1.0, 1.0)
        with pytest.raises(ContractViolation):
            PrecodingSetup(noise_variance=-1.0)
