"""Synthetic generators: marginal structure, determinism, model consistency."""

import numpy as np
import pytest
from scipy.stats import kurtosis

from qfactor import ChainState, ConfigurationError, ModelSpec, RngStream, implied_moments, tau_constants
from qfactor.synthetic import CASE1_COVARIANCE, CASE2_SCATTER, gen_case1, gen_case2, gen_qfm


class TestCase1:
    def test_shape_and_block_correlation(self):
        data = gen_case1(150, RngStream(1))
        assert data.shape == (150, 5)
        assert np.corrcoef(data[:, 2], data[:, 3])[0, 1] == pytest.approx(0.95, abs=0.05)

    def test_rows_outside_joint_tail_untouched(self):
        seed = RngStream(4)
        contaminated = gen_case1(400, seed)
        clean = gen_case1(400, seed, contamination_var=0.0)
        outside = (clean[:, 0] >= -0.4) | (clean[:, 1] >= -0.4)
        np.testing.assert_array_equal(contaminated[outside], clean[outside])
        assert np.any(~outside) and np.any(contaminated[~outside, 1] != clean[~outside, 1])

    def test_zero_contamination_is_base_gaussian(self):
        a = gen_case1(200, RngStream(5), contamination_var=0.0)
        cov = np.cov(a.T)
        assert np.abs(cov - CASE1_COVARIANCE).max() < 0.35

    def test_contamination_shifts_lower_tail_down(self):
        data = gen_case1(4000, RngStream(6))
        clean = gen_case1(4000, RngStream(6), contamination_var=0.0)
        hit = (clean[:, 0] < -0.4) & (clean[:, 1] < -0.4)
        shift = data[hit, 0] - clean[hit, 0]
        assert np.all(shift <= 0.0)
        np.testing.assert_allclose(data[hit, 0] - clean[hit, 0], data[hit, 1] - clean[hit, 1])

    def test_deterministic(self):
        np.testing.assert_array_equal(gen_case1(50, RngStream(7)), gen_case1(50, RngStream(7)))


class TestCase2:
    def test_shape_and_blocks(self):
        data = gen_case2(500, RngStream(8))
        assert data.shape == (500, 6)
        for i, j in ((0, 1), (2, 3), (4, 5)):
            assert abs(np.corrcoef(data[:, i], data[:, j])[0, 1]) > 0.8

    def test_off_block_weak_on_average(self):
        vals = []
        for seed in range(20):
            data = gen_case2(500, RngStream(100 + seed))
            for i, j in ((0, 2), (0, 4), (1, 3), (2, 5), (3, 4)):
                vals.append(abs(np.corrcoef(data[:, i], data[:, j])[0, 1]))
        assert np.mean(vals) < 0.2

    def test_heavy_tails(self):
        data = gen_case2(4000, RngStream(9))
        assert np.all(kurtosis(data, axis=0) > 3.0)

    def test_deterministic(self):
        np.testing.assert_array_equal(gen_case2(50, RngStream(10)), gen_case2(50, RngStream(10)))


class TestGenQfm:
    def test_zero_loadings_gives_al_margins(self):
        spec = ModelSpec(n=100_000, p=2, k=1, tau=0.2)
        data, truth = gen_qfm(spec, np.zeros((2, 1)), np.array([0.7, 1.3]), RngStream(11))
        for col in range(2):
            assert np.mean(data[:, col] < 0.0) == pytest.approx(0.2, abs=0.01)

    def test_covariance_matches_implied_moments(self):
        spec = ModelSpec(n=100_000, p=3, k=1, tau=0.3)
        beta = np.array([[1.0], [0.6], [-0.4]])
        sigma = np.array([0.5, 0.8, 0.6])
        data, truth = gen_qfm(spec, beta, sigma, RngStream(12))
        marginal, _ = implied_moments(
            ChainState(beta, np.zeros((1, 1)), sigma, np.ones(1)), spec.tau
        )
        centered = data - data.mean(axis=0)
        for l in range(3):
            for h in range(3):
                prod = centered[:, l] * centered[:, h]
                se = prod.std() / np.sqrt(spec.n)
                assert abs(prod.mean() - marginal[l, h]) < 4 * se

    def test_median_columns_centered(self):
        spec = ModelSpec(n=50_000, p=2, k=1, tau=0.5)
        data, _ = gen_qfm(spec, np.array([[1.0], [0.5]]), np.ones(2), RngStream(13))
        se = data.std(axis=0) / np.sqrt(spec.n)
        assert np.all(np.abs(data.mean(axis=0)) < 4 * se)

    def test_truth_record_roundtrip(self):
        spec = ModelSpec(n=30, p=3, k=2, tau=0.4)
        beta = np.array([[1.0, 0.0], [0.5, 0.8], [0.2, -0.4]])
        data, truth = gen_qfm(spec, beta, np.full(3, 0.6), RngStream(14))
        assert truth.factors.shape == (30, 2)
        assert truth.weights.shape == (30,)
        np.testing.assert_array_equal(truth.beta, beta)
        # data reconstructs from the truth up to the Gaussian noise scale
        location, scatter = (truth.sigma * tau_constants(0.4)[0], truth.sigma**2 * tau_constants(0.4)[1])
        resid = data - truth.factors @ beta.T - np.outer(truth.weights, location)
        standardized = resid / np.sqrt(truth.weights[:, None] * scatter)
        assert abs(standardized.std() - 1.0) < 0.2

    def test_validation(self):
        spec = ModelSpec(n=10, p=2, k=1, tau=0.4)
        with pytest.raises(ConfigurationError):
            gen_qfm(spec, np.zeros((3, 1)), np.ones(2), RngStream(0))
        with pytest.raises(ConfigurationError):
            gen_qfm(spec, np.zeros((2, 1)), np.array([1.0, -1.0]), RngStream(0))

    def test_deterministic(self):
        spec = ModelSpec(n=25, p=2, k=1, tau=0.4)
        a, _ = gen_qfm(spec, np.array([[1.0], [0.5]]), np.ones(2), RngStream(15))
        b, _ = gen_qfm(spec, np.array([[1.0], [0.5]]), np.ones(2), RngStream(15))
        np.testing.assert_array_equal(a, b)
