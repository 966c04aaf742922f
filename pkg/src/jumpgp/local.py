"""Local approximate GPs on nearest-neighbor subsets, with validated sizes.

`lagp_predict` fits a GP to the ``n`` nearest training points of ``x``.
`olagp_search` chooses ``n`` per location: it grows the neighborhood of
``x*`` (the training point nearest ``x``, itself left out) one point at a
time from ``n_min`` to ``n_max``, predicts ``y*`` at every size and keeps the
size with the smallest squared error.  The covariance factor is extended in
O(n^2) per step; lengthscales are refit (and the factor rebuilt) only on the
logarithmic schedule ``n in {n_min, 16, 32, 64, 128, ...}``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import solve_triangular
from threadpoolctl import threadpool_limits

from .gp import (
    Dataset,
    PredictiveResult,
    default_bounds,
    default_theta,
    fit_gp,
    fit_mle,
    predict,
)
from .kernel import DEFAULT_JITTER, FactorizationError, GrowingCholesky, Hyperparams

DEFAULT_LAGP_N = 50


def log2_schedule(n: int) -> bool:
    """True when ``log2(n)`` is an integer."""
    return n > 0 and n & (n - 1) == 0


@dataclass(frozen=True)
class Neighborhood:
    center: np.ndarray
    indices: np.ndarray
    distances: np.ndarray

    def __len__(self) -> int:
        return self.indices.size


@dataclass(frozen=True)
class LagpConfig:
    """Fixed-size local GP."""

    n: int = DEFAULT_LAGP_N

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"neighborhood size must be at least 2, got {self.n}")


@dataclass(frozen=True)
class OlagpConfig:
    """Neighborhood-size search range and lengthscale refit schedule."""

    n_min: int = 12
    n_max: int = 160
    refit_schedule: Callable[[int], bool] = field(default=log2_schedule, compare=False)

    def __post_init__(self):
        if not 2 <= self.n_min < self.n_max:
            raise ValueError(
                f"need 2 <= n_min < n_max, got n_min={self.n_min}, n_max={self.n_max}"
            )

    def refit_at(self, n: int) -> bool:
        return n == self.n_min or bool(self.refit_schedule(n))


@dataclass
class OlagpSearch:
    """Outcome of the neighborhood-size search around one location.

    ``trace`` has columns ``(n, SE)``, one row per size in
    ``[n_min, n_max]``; failed sizes carry ``inf``.  ``hyp`` holds the
    lengthscales in effect at ``nhat`` (from the last refit at or below it).
    """

    nhat: int
    trace: np.ndarray
    x_star: int
    hyp: Hyperparams
    flops: int

    @property
    def se_at_nhat(self) -> float:
        return float(self.trace[self.nhat - int(self.trace[0, 0]), 1])


def _as_point(x, d: int) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
    if x.size != d:
        raise ValueError(f"point has {x.size} coordinates, data has d={d}")
    return x


def nn_neighborhood(
    x,
    data: Dataset,
    n: int,
    exclude_exact: bool = False,
    exclude_index: int | None = None,
) -> Neighborhood:
    """The ``n`` training rows closest to ``x`` in Euclidean distance.

    Ties are broken by lower row index.  ``exclude_exact`` drops rows equal
    to ``x``; ``exclude_index`` drops one specific row.
    """
    x = _as_point(x, data.d)
    diff = data.X - x
    d2 = np.einsum("ij,ij->i", diff, diff)
    keep = np.ones(data.N, dtype=bool)
    if exclude_exact:
        keep &= d2 > 0
    if exclude_index is not None:
        keep[exclude_index] = False
    avail = int(keep.sum())
    if not 1 <= n <= avail:
        raise ValueError(f"neighborhood size {n} outside [1, {avail}]")
    cand = np.flatnonzero(keep)
    dc = d2[cand]
    if n < cand.size:
        kth = np.partition(dc, n - 1)[n - 1]
        sel = dc <= kth
        cand, dc = cand[sel], dc[sel]
    order = np.lexsort((cand, dc))[:n]
    idx = cand[order]
    return Neighborhood(center=x, indices=idx, distances=np.sqrt(dc[order]))


def _initial_hyp(X: np.ndarray, bounds, theta0, g: float) -> Hyperparams:
    theta = default_theta(X, bounds)
    if theta0 is not None:
        theta0 = np.asarray(theta0, dtype=float)
        theta = np.where(np.isnan(theta0), theta, np.clip(theta0, *bounds))
    return Hyperparams(1.0, theta, g)


def lagp_predict(
    x,
    data: Dataset,
    n: int = DEFAULT_LAGP_N,
    *,
    bounds=None,
    theta0=None,
    init: Hyperparams | None = None,
    g: float = DEFAULT_JITTER,
    n_starts: int = 1,
    seed=0,
) -> PredictiveResult:
    """Local GP at ``x`` from its ``n`` nearest neighbors, lengthscales by MLE.

    ``bounds`` default to the full dataset's lengthscale box.  ``init`` (a
    warm start) takes precedence over ``theta0``, whose NaN entries fall back
    to the distance heuristic.
    """
    x = _as_point(x, data.d)
    n = min(n, data.N)
    if bounds is None:
        bounds = default_bounds(data.X)
    nb = nn_neighborhood(x, data, n)
    sub = data.subset(nb.indices)
    if init is None:
        init = _initial_hyp(sub.X, bounds, theta0, g)
    hyp = fit_mle(sub, init, bounds, n_starts=n_starts, seed=seed)
    model = fit_gp(sub, hyp, retries=1)
    return predict(model, x[None, :])


def _corr(A: np.ndarray, B: np.ndarray, theta: np.ndarray) -> np.ndarray:
    D = np.zeros((A.shape[0], B.shape[0]))
    for k in range(theta.size):
        diff = A[:, k, None] - B[None, :, k]
        D += diff * diff / theta[k]
    return np.exp(-D)


def olagp_search(
    x,
    data: Dataset,
    cfg: OlagpConfig = OlagpConfig(),
    *,
    bounds=None,
    theta0=None,
    g: float = DEFAULT_JITTER,
) -> OlagpSearch:
    """Validation search for the neighborhood size at ``x``.

    Predictive means only need correlations, so the factor is kept on the
    unit scale; the scale cancels from the mean.
    """
    x = _as_point(x, data.d)
    if data.N <= cfg.n_max:
        raise ValueError(f"need more than n_max={cfg.n_max} points, have {data.N}")
    if bounds is None:
        bounds = default_bounds(data.X)
    star = int(nn_neighborhood(x, data, 1).indices[0])
    nb = nn_neighborhood(data.X[star], data, cfg.n_max, exclude_index=star)
    Xn = data.X[nb.indices]
    Yn = data.Y[nb.indices]
    xs = data.X[star][None, :]
    ys = data.Y[star]
    n_min, n_max = cfg.n_min, cfg.n_max

    chol = GrowingCholesky(n_max)
    se = np.full(n_max - n_min + 1, np.inf)
    hyp = _initial_hyp(Xn[:n_min], bounds, theta0, g)
    kstar = z = q = None
    stale = True
    fits = []  # (size, hyperparameters) at each refit

    for n in range(n_min, n_max + 1):
        if chol.size == n - 1 and not stale and not cfg.refit_at(n):
            try:
                w, l = chol.append(
                    _corr(Xn[:n - 1], Xn[n - 1:n], hyp.theta).ravel(), 1.0 + hyp.g
                )
                z = np.append(z, (Yn[n - 1] - w @ z) / l)
                q = np.append(q, (kstar[n - 1] - w @ q) / l)
            except FactorizationError:
                stale = True
                continue
        else:
            if cfg.refit_at(n):
                hyp = fit_mle(Dataset(Xn[:n], Yn[:n]), hyp, bounds, n_starts=1)
                fits.append((n, hyp))
            kstar = _corr(xs, Xn, hyp.theta).ravel()
            try:
                _rebuild(chol, Xn[:n], hyp)
            except FactorizationError:
                stale = True
                continue
            stale = False
            L = chol.chol
            z = _tri(L, Yn[:n])
            q = _tri(L, kstar[:n])
        mu = float(q @ z)
        se[n - n_min] = (ys - mu) ** 2

    k = int(np.argmin(se))
    if not np.isfinite(se[k]):
        raise FactorizationError("every neighborhood size failed to factorize")
    nhat = n_min + k
    trace = np.column_stack([np.arange(n_min, n_max + 1), se])
    # lengthscales that produced the winning prediction
    active = [h for m, h in fits if m <= nhat]
    return OlagpSearch(
        nhat=nhat, trace=trace, x_star=star, hyp=active[-1] if active else hyp,
        flops=chol.flops,
    )


def _tri(L: np.ndarray, b: np.ndarray) -> np.ndarray:
    return solve_triangular(L, b, lower=True, check_finite=False)


def _rebuild(chol: GrowingCholesky, X: np.ndarray, hyp: Hyperparams) -> None:
    K = _corr(X, X, hyp.theta)
    K[np.diag_indices_from(K)] += hyp.g
    try:
        chol.reset(K)
    except FactorizationError:
        K[np.diag_indices_from(K)] += 9 * max(hyp.g, 1e-12)
        chol.reset(K)


def olagp_predict(
    x,
    data: Dataset,
    cfg: OlagpConfig = OlagpConfig(),
    *,
    bounds=None,
    theta0=None,
    g: float = DEFAULT_JITTER,
    keep_search: bool = False,
):
    """Search for ``nhat`` around ``x*`` then fit a local GP of that size at ``x``.

    The final fit is warm-started from the search's last lengthscales.
    Returns a `PredictiveResult` with ``nhat`` set, or the pair
    ``(result, search)`` when ``keep_search`` is true.
    """
    x = _as_point(x, data.d)
    if bounds is None:
        bounds = default_bounds(data.X)
    s = olagp_search(x, data, cfg, bounds=bounds, theta0=theta0, g=g)
    init = Hyperparams(1.0, s.hyp.theta, g)
    res = lagp_predict(x, data, s.nhat, bounds=bounds, init=init, g=g)
    out = PredictiveResult(
        mean=res.mean,
        var=res.var,
        nhat=np.array([s.nhat]),
        se_star=np.array([s.se_at_nhat]),
        trace=s.trace[None, :, 1],
    )
    return (out, s) if keep_search else out


def _predict_one(x, data, method, bounds, theta0, g):
    if isinstance(method, OlagpConfig):
        return olagp_predict(x, data, method, bounds=bounds, theta0=theta0, g=g)
    return lagp_predict(x, data, method.n, bounds=bounds, theta0=theta0, g=g)


def _predict_chunk(Xc, data, method, bounds, theta0, g):
    out = []
    # single-threaded BLAS everywhere so results do not depend on the pool
    with threadpool_limits(limits=1):
        for x in Xc:
            try:
                out.append(_predict_one(x, data, method, bounds, theta0, g))
            except (FactorizationError, ValueError, np.linalg.LinAlgError) as exc:
                out.append(exc)
    return out


def batch_predict(
    Xtest,
    data: Dataset,
    method: LagpConfig | OlagpConfig = LagpConfig(),
    *,
    workers: int = 1,
    bounds=None,
    theta0=None,
    g: float = DEFAULT_JITTER,
) -> PredictiveResult:
    """Independent local predictions at every row of ``Xtest``.

    Rows are split into contiguous chunks and mapped over ``workers``
    processes; each row's computation does not depend on the split, so the
    output is identical for any worker count.  Rows that fail get NaN and an
    entry in ``errors``.
    """
    Xtest = np.atleast_2d(np.asarray(Xtest, dtype=float))
    if Xtest.size == 0:
        Xtest = Xtest.reshape(0, data.d)
    if Xtest.shape[1] != data.d:
        raise ValueError(f"test inputs have d={Xtest.shape[1]}, data has d={data.d}")
    if bounds is None:
        bounds = default_bounds(data.X)
    m = Xtest.shape[0]
    if workers <= 1 or m < 2:
        results = _predict_chunk(Xtest, data, method, bounds, theta0, g)
    else:
        from joblib import Parallel, delayed

        chunks = np.array_split(np.arange(m), min(workers * 4, m))
        parts = Parallel(n_jobs=workers, backend="loky", inner_max_num_threads=1)(
            delayed(_predict_chunk)(Xtest[c], data, method, bounds, theta0, g)
            for c in chunks
        )
        results = [r for part in parts for r in part]

    local = isinstance(method, OlagpConfig)
    mean = np.full(m, np.nan)
    var = np.full(m, np.nan)
    nhat = np.zeros(m, dtype=int) if local else None
    se_star = np.full(m, np.nan) if local else None
    trace = np.full((m, method.n_max - method.n_min + 1), np.nan) if local else None
    errors = {}
    for i, r in enumerate(results):
        if isinstance(r, Exception):
            errors[i] = f"{type(r).__name__}: {r}"
            continue
        mean[i] = r.mean[0]
        var[i] = r.var[0]
        if local:
            nhat[i] = r.nhat[0]
            se_star[i] = r.se_star[0]
            trace[i] = r.trace[0]
    return PredictiveResult(
        mean=mean, var=var, nhat=nhat, se_star=se_star, trace=trace,
        errors=errors or None,
    )
