"""Zero-mean GP regression: likelihood, MLE of lengthscales, prediction."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .kernel import (
    DEFAULT_JITTER,
    CovFactor,
    FactorizationError,
    Hyperparams,
    cov_matrix,
    cross_cov,
    factorize,
)


class MLEConvergenceWarning(RuntimeWarning):
    """The lengthscale optimizer stopped without reporting convergence."""


@dataclass(frozen=True)
class Dataset:
    """Inputs ``X`` (N x d) and responses ``Y`` (N,)."""

    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        Y = np.asarray(self.Y, dtype=float).ravel()
        if X.ndim != 2 or X.shape[1] < 1:
            raise ValueError(f"X must be an N x d matrix, got shape {X.shape}")
        if X.shape[0] != Y.size:
            raise ValueError(f"X has {X.shape[0]} rows but Y has {Y.size} entries")
        if Y.size < 1:
            raise ValueError("dataset is empty")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise ValueError("dataset contains non-finite values")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def N(self) -> int:
        return self.Y.size

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.X[idx], self.Y[idx])


@dataclass(frozen=True)
class PredictiveResult:
    """Pointwise predictive means and variances.

    ``nhat`` is set by neighborhood-searching methods, ``se_star`` holds the
    validation squared error at the chosen size and ``trace`` the full
    validation curve (one row per test point).  ``errors`` maps failed test
    indices to messages; those rows hold NaN.
    """

    mean: np.ndarray
    var: np.ndarray
    nhat: np.ndarray | None = None
    se_star: np.ndarray | None = None
    trace: np.ndarray | None = None
    errors: dict | None = None

    def __len__(self) -> int:
        return self.mean.size


def default_bounds(X) -> tuple[np.ndarray, np.ndarray]:
    """Lengthscale box ``[1e-4, 10] * (squared input range)`` per dimension."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    span = np.ptp(X, axis=0) ** 2
    span = np.where(span > 0, span, 1.0)
    return 1e-4 * span, 10.0 * span


def default_theta(X, bounds=None) -> np.ndarray:
    """Starting lengthscales: 10% quantile of squared pairwise distances.

    The same value is used in every dimension and clipped into ``bounds``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    d = X.shape[1]
    if bounds is None:
        bounds = default_bounds(X)
    n = X.shape[0]
    if n > 400:
        X = X[np.linspace(0, n - 1, 400).astype(int)]
    sq = np.sum((X[:, None, :] - X[None, :, :]) ** 2, axis=-1)
    sq = sq[np.triu_indices(X.shape[0], 1)]
    sq = sq[sq > 0]
    start = np.quantile(sq, 0.1) if sq.size else 1.0
    return np.clip(np.full(d, start), bounds[0], bounds[1])


def neg_log_likelihood(data: Dataset, hyp: Hyperparams) -> float:
    """``0.5 * log|Sigma| + 0.5 * Y' Sigma^{-1} Y`` (the 2*pi term is dropped)."""
    f = factorize(cov_matrix(data.X, hyp))
    z = f.half_solve(data.Y)
    return 0.5 * f.logdet + 0.5 * float(z @ z)


def profile_tau2(data: Dataset, theta, g: float = DEFAULT_JITTER) -> float:
    """Closed-form scale ``Y' K^{-1} Y / N`` for correlation matrix ``K``."""
    f = factorize(cov_matrix(data.X, Hyperparams(1.0, theta, g)))
    z = f.half_solve(data.Y)
    return max(float(z @ z) / data.N, np.finfo(float).tiny)


class _Profile:
    """Concentrated negative log-likelihood over ``log(theta)`` with gradient.

    Equals `neg_log_likelihood` at the profiled scale, i.e.
    ``N/2 log(tau2_hat) + 1/2 log|K| + N/2``.
    """

    PENALTY = 1e25

    def __init__(self, X: np.ndarray, Y: np.ndarray, g: float):
        self.Y = Y
        self.g = g
        self.N = Y.size
        # per-dimension squared differences, reused by every evaluation
        self.D = np.stack(
            [(X[:, k, None] - X[None, :, k]) ** 2 for k in range(X.shape[1])]
        )
        self.evals = 0

    def corr(self, theta: np.ndarray) -> np.ndarray:
        K = np.exp(-np.tensordot(1.0 / theta, self.D, axes=1))
        K[np.diag_indices_from(K)] += self.g
        return K

    def __call__(self, log_theta: np.ndarray) -> tuple[float, np.ndarray]:
        self.evals += 1
        theta = np.exp(log_theta)
        K = self.corr(theta)
        try:
            f = factorize(K)
        except FactorizationError:
            return self.PENALTY, np.zeros_like(log_theta)
        alpha = f.solve(self.Y)
        s = float(self.Y @ alpha)
        if not s > 0:
            return self.PENALTY, np.zeros_like(log_theta)
        N = self.N
        value = 0.5 * N * np.log(s / N) + 0.5 * f.logdet + 0.5 * N
        Kinv = f.inverse()
        # W = K without nugget; dK/dlog(theta_k) = W * D_k / theta_k
        W = K.copy()
        W[np.diag_indices_from(W)] -= self.g
        A = Kinv - (N / s) * np.outer(alpha, alpha)
        AW = A * W
        grad = 0.5 * np.tensordot(self.D, AW, axes=([1, 2], [0, 1])) / theta
        return float(value), grad


def fit_mle(
    data: Dataset,
    init: Hyperparams | None = None,
    bounds: tuple[np.ndarray, np.ndarray] | None = None,
    n_starts: int = 3,
    seed: int | np.random.SeedSequence | None = 0,
    maxiter: int = 100,
) -> Hyperparams:
    """Maximum likelihood lengthscales with the scale profiled out.

    Local L-BFGS-B searches in ``log(theta)`` are started from ``init`` and
    from ``n_starts - 1`` further points drawn log-uniformly inside
    ``bounds``.  The start with the lowest objective wins (ties go to the
    earlier start); the initialization itself is always a candidate, so the
    result never has a higher objective than ``init``.

    If no search reports convergence, the best iterate is returned and a
    `MLEConvergenceWarning` is issued.
    """
    if bounds is None:
        bounds = default_bounds(data.X)
    lo, hi = (np.broadcast_to(np.asarray(b, dtype=float), (data.d,)) for b in bounds)
    if init is None:
        init = Hyperparams(1.0, default_theta(data.X, (lo, hi)))
    if init.d != data.d:
        raise ValueError(f"init has {init.d} lengthscales, data has d={data.d}")
    g = init.g
    obj = _Profile(data.X, data.Y, g)
    log_lo, log_hi = np.log(lo), np.log(hi)
    x0 = np.clip(np.log(init.theta), log_lo, log_hi)

    starts = [x0]
    if n_starts > 1:
        rng = np.random.default_rng(seed)
        for _ in range(n_starts - 1):
            starts.append(rng.uniform(log_lo, log_hi))

    best_x, best_val = x0, obj(x0)[0]
    converged = False
    for s in starts:
        res = minimize(
            obj,
            s,
            jac=True,
            method="L-BFGS-B",
            bounds=list(zip(log_lo, log_hi)),
            options={"maxiter": maxiter},
        )
        converged |= bool(res.success)
        if res.fun < best_val:
            best_x, best_val = res.x, float(res.fun)

    if not converged:
        warnings.warn(
            "lengthscale optimization did not converge; returning best iterate",
            MLEConvergenceWarning,
            stacklevel=2,
        )
    theta = np.exp(best_x)
    if best_val >= _Profile.PENALTY:
        # nothing factorizable was found; keep the caller's scale
        return Hyperparams(init.tau2, theta, g)
    return Hyperparams(profile_tau2(data, theta, g), theta, g)


class GPModel:
    """A GP conditioned on a dataset at fixed hyperparameters."""

    def __init__(self, data: Dataset, hyp: Hyperparams, factor: CovFactor | None = None):
        if hyp.d != data.d:
            raise ValueError(f"hyperparameters have d={hyp.d}, data has d={data.d}")
        self.data = data
        self.hyp = hyp
        self.factor = factor if factor is not None else factorize(cov_matrix(data.X, hyp))
        self.alpha = self.factor.solve(data.Y)

    def predict(self, Xtest) -> PredictiveResult:
        return predict(self, Xtest)


def fit_gp(data: Dataset, hyp: Hyperparams, retries: int = 0) -> GPModel:
    """Condition on ``data``; on factorization failure retry with 10x nugget."""
    for attempt in range(retries + 1):
        try:
            return GPModel(data, hyp)
        except FactorizationError:
            if attempt == retries:
                raise
            hyp = Hyperparams(hyp.tau2, hyp.theta, max(hyp.g, 1e-12) * 10)


def predict(model: GPModel, Xtest) -> PredictiveResult:
    """Predictive mean and variance at the rows of ``Xtest``."""
    Xtest = np.asarray(Xtest, dtype=float)
    if Xtest.ndim == 1:
        Xtest = Xtest.reshape(-1, model.data.d) if model.data.d > 1 else Xtest[:, None]
    if Xtest.shape[1] != model.data.d:
        raise ValueError(
            f"test inputs have d={Xtest.shape[1]}, model has d={model.data.d}"
        )
    hyp = model.hyp
    k = cross_cov(Xtest, model.data.X, hyp)
    mean = k @ model.alpha
    z = model.factor.half_solve(k.T)
    var = hyp.tau2 - np.sum(z * z, axis=0)
    return PredictiveResult(mean=mean, var=np.maximum(var, 0.0))


def global_gp_predict(
    data: Dataset,
    Xtest,
    n_starts: int = 3,
    seed=0,
    theta0=None,
) -> PredictiveResult:
    """Fit lengthscales on all of ``data`` by MLE and predict at ``Xtest``."""
    bounds = default_bounds(data.X)
    theta = default_theta(data.X, bounds)
    if theta0 is not None:
        theta0 = np.asarray(theta0, dtype=float)
        theta = np.where(np.isnan(theta0), theta, theta0)
    hyp = fit_mle(data, Hyperparams(1.0, theta), bounds, n_starts=n_starts, seed=seed)
    return predict(fit_gp(data, hyp, retries=1), Xtest)
