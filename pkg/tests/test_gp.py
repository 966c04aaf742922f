import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import approx_fprime

from jumpgp.gp import (
    Dataset,
    GPModel,
    MLEConvergenceWarning,
    _Profile,
    default_bounds,
    default_theta,
    fit_gp,
    fit_mle,
    global_gp_predict,
    neg_log_likelihood,
    predict,
    profile_tau2,
)
from jumpgp.kernel import Hyperparams, cov_matrix, kernel_eval


def dense_nll(X, Y, hyp):
    """Direct evaluation with an explicit inverse and determinant."""
    n = len(Y)
    S = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            S[i, j] = kernel_eval(X[i], X[j], hyp)
    S += hyp.tau2 * hyp.g * np.eye(n)
    return 0.5 * np.log(np.linalg.det(S)) + 0.5 * Y @ np.linalg.inv(S) @ Y


def draw_gp(rng, X, hyp):
    S = cov_matrix(X, hyp)
    return np.linalg.cholesky(S) @ rng.normal(size=len(X))


class TestDataset:
    def test_shapes(self):
        d = Dataset(np.arange(4.0), [1, 2, 3, 4])
        assert d.X.shape == (4, 1) and d.N == 4 and d.d == 1

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            Dataset(np.zeros((3, 2)), np.zeros(4))
        with pytest.raises(ValueError):
            Dataset(np.zeros((2, 1)), [0.0, np.nan])
        with pytest.raises(ValueError):
            Dataset(np.zeros((0, 1)), np.zeros(0))


class TestLikelihood:
    def test_scalar_cases(self):
        X = np.zeros((1, 1))
        h = Hyperparams(1.0, [1.0], g=0.0)
        assert neg_log_likelihood(Dataset(X, [0.0]), h) == pytest.approx(0.0, abs=1e-15)
        assert neg_log_likelihood(Dataset(X, [2.0]), h) == pytest.approx(2.0, rel=1e-14)

    def test_matches_dense_oracle(self, rng):
        for _ in range(10):
            X = rng.uniform(size=(8, 2))
            h = Hyperparams(rng.uniform(0.5, 2), rng.uniform(0.02, 0.5, 2), 1e-4)
            Y = draw_gp(rng, X, h)
            assert neg_log_likelihood(Dataset(X, Y), h) == pytest.approx(
                dense_nll(X, Y, h), abs=1e-10
            )

    def test_profile_equals_nll_at_profiled_scale(self, rng):
        X = rng.uniform(size=(15, 2))
        Y = rng.normal(size=15)
        theta = np.array([0.3, 0.6])
        data = Dataset(X, Y)
        tau2 = profile_tau2(data, theta, 1e-6)
        val, _ = _Profile(X, Y, 1e-6)(np.log(theta))
        assert val == pytest.approx(
            neg_log_likelihood(data, Hyperparams(tau2, theta, 1e-6)), rel=1e-10
        )

    def test_profile_gradient(self, rng):
        X = rng.uniform(size=(20, 3))
        Y = np.sin(4 * X[:, 0]) + X[:, 1] ** 2
        obj = _Profile(X, Y, 1e-4)
        x0 = np.log([0.2, 0.5, 1.3])
        _, grad = obj(x0)
        fd = approx_fprime(x0, lambda z: obj(z)[0], 1e-6)
        np.testing.assert_allclose(grad, fd, rtol=1e-4, atol=1e-6)


class TestFitMle:
    def test_recovers_lengthscale(self):
        est = []
        for seed in range(20):
            r = np.random.default_rng(seed)
            X = np.sort(r.uniform(size=60))[:, None]
            Y = draw_gp(r, X, Hyperparams(1.0, [0.1], 1e-8))
            hyp = fit_mle(Dataset(X, Y), n_starts=3, seed=seed)
            est.append(hyp.theta[0])
        assert 0.1 / 3 < np.median(est) < 0.3

    def test_constant_response(self):
        X = np.linspace(0, 1, 15)[:, None]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", MLEConvergenceWarning)
            hyp = fit_mle(Dataset(X, np.full(15, 2.5)))
        assert np.isfinite(hyp.tau2) and hyp.tau2 > 0
        m = fit_gp(Dataset(X, np.full(15, 2.5)), hyp, retries=3)
        np.testing.assert_allclose(predict(m, [[0.5]]).mean, 2.5, atol=1e-3)

    def test_grid_optimum(self, rng):
        X = rng.uniform(size=(25, 1))
        Y = np.sin(6 * X[:, 0])
        data = Dataset(X, Y)
        obj = _Profile(X, Y, 1e-8)
        grid = np.linspace(np.log(1e-3), np.log(10.0), 2001)
        vals = np.array([obj(np.array([t]))[0] for t in grid])
        best = grid[np.argmin(vals)]
        step = grid[1] - grid[0]
        hyp = fit_mle(
            data, Hyperparams(1.0, [np.exp(best)]), (np.array([1e-3]), np.array([10.0])),
            n_starts=1,
        )
        assert abs(np.log(hyp.theta[0]) - best) <= step

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_never_worse_than_init(self, seed):
        r = np.random.default_rng(seed)
        X = r.uniform(size=(12, 2))
        Y = np.cos(3 * X[:, 0]) * X[:, 1] + 0.1 * r.normal(size=12)
        data = Dataset(X, Y)
        init = Hyperparams(1.0, r.uniform(0.01, 2.0, 2), 1e-6)
        lo, hi = default_bounds(X)
        init = Hyperparams(1.0, np.clip(init.theta, lo, hi), 1e-6)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", MLEConvergenceWarning)
            hyp = fit_mle(data, init, (lo, hi), n_starts=2, seed=seed)
        init_best = Hyperparams(profile_tau2(data, init.theta, 1e-6), init.theta, 1e-6)
        assert neg_log_likelihood(data, hyp) <= neg_log_likelihood(data, init_best) + 1e-9

    def test_deterministic_given_seed(self, rng):
        X = rng.uniform(size=(30, 2))
        data = Dataset(X, np.sin(5 * X[:, 0]))
        a = fit_mle(data, n_starts=3, seed=7)
        b = fit_mle(data, n_starts=3, seed=7)
        np.testing.assert_array_equal(a.theta, b.theta)

    def test_default_theta_inside_bounds(self, rng):
        X = rng.uniform(size=(50, 3)) * [1, 10, 100]
        lo, hi = default_bounds(X)
        th = default_theta(X, (lo, hi))
        assert np.all(th >= lo) and np.all(th <= hi)


class TestPredict:
    def test_interpolates(self):
        X = np.linspace(0, 2 * np.pi, 40)[:, None]
        Y = np.sin(X[:, 0])
        hyp = Hyperparams(1.0, [1.0], 1e-8)
        res = predict(GPModel(Dataset(X, Y), hyp), X)
        assert np.max(np.abs(res.mean - Y)) <= 1e-4 * np.ptp(Y)
        assert np.max(res.var) <= 1e-6 * hyp.tau2

    def test_prior_reversion(self, rng):
        X = rng.uniform(size=(10, 2))
        hyp = Hyperparams(2.0, [0.01, 0.01])
        res = predict(GPModel(Dataset(X, rng.normal(size=10)), hyp), [[50.0, 50.0]])
        assert abs(res.mean[0]) < 1e-12
        assert res.var[0] == pytest.approx(2.0, rel=1e-12)

    def test_single_point_formula(self):
        hyp = Hyperparams(1.7, [0.4], 1e-3)
        x1, y1, xt = 0.2, 1.3, 0.55
        res = predict(GPModel(Dataset([[x1]], [y1]), hyp), [[xt]])
        k = kernel_eval([xt], [x1], hyp)
        assert res.mean[0] == pytest.approx(k * y1 / (hyp.tau2 * (1 + hyp.g)), abs=1e-12)
        assert res.var[0] == pytest.approx(hyp.tau2 - k * k / (hyp.tau2 * (1 + hyp.g)), abs=1e-12)

    def test_matches_dense_oracle(self, rng):
        X = rng.uniform(size=(10, 2))
        Y = rng.normal(size=10)
        hyp = Hyperparams(1.3, [0.3, 0.5], 1e-4)
        Xt = rng.uniform(size=(5, 2))
        S = cov_matrix(X, hyp)
        k = hyp.tau2 * np.exp(-(((Xt[:, None, :] - X[None]) ** 2) / hyp.theta).sum(-1))
        res = predict(GPModel(Dataset(X, Y), hyp), Xt)
        np.testing.assert_allclose(res.mean, k @ np.linalg.solve(S, Y), atol=1e-10)
        np.testing.assert_allclose(
            res.var, hyp.tau2 - np.einsum("ij,ji->i", k, np.linalg.solve(S, k.T)), atol=1e-10
        )

    def test_variance_bounds(self, rng):
        X = rng.uniform(size=(30, 2))
        hyp = Hyperparams(0.8, [0.05, 0.2], 1e-6)
        res = predict(GPModel(Dataset(X, rng.normal(size=30)), hyp), rng.uniform(-1, 2, (200, 2)))
        assert np.all(res.var >= 0) and np.all(res.var <= hyp.tau2 * (1 + hyp.g))

    def test_dimension_mismatch(self, rng):
        m = GPModel(Dataset(rng.uniform(size=(5, 2)), np.zeros(5)), Hyperparams(1, [1, 1]))
        with pytest.raises(ValueError):
            predict(m, np.zeros((2, 3)))

    def test_global_gp_runs(self, rng):
        X = rng.uniform(size=(40, 1))
        res = global_gp_predict(Dataset(X, np.sin(8 * X[:, 0])), [[0.5]], n_starts=2)
        assert abs(res.mean[0] - np.sin(4.0)) < 0.05
