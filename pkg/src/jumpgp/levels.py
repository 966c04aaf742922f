"""Marginal two-level clustering of responses and spatial level classifiers.

`em_fit` fits a two-component 1-d Gaussian mixture to the responses alone.
`labels` turns responsibilities into hard levels ``{1, 2}`` (1 is the
lower-mean component).  `fit_classifier` learns ``P(level == 1 | x)`` from
inputs and hard levels.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .gp import Dataset, fit_gp
from .kernel import FactorizationError, Hyperparams, cross_cov, factorize

CLASSIFIER_KINDS = ("gp", "logistic", "rf")

# above this many training rows the "gp" classifier falls back to logistic
GP_CLASSIFIER_MAX_N = 20_000


@dataclass(frozen=True)
class MixtureFit:
    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    resp: np.ndarray
    loglik_trace: list
    converged: bool

    @property
    def n_iter(self) -> int:
        return len(self.loglik_trace)


def _log_joint(y, w, mu, var):
    with np.errstate(divide="ignore"):
        logw = np.log(w)
    return (
        logw
        - 0.5 * np.log(2 * np.pi * var)
        - 0.5 * (y[:, None] - mu) ** 2 / var
    )


def em_fit(y, tol: float = 1e-8, max_iter: int = 500, seed=None) -> MixtureFit:
    """Two-component Gaussian mixture on a response vector by EM.

    Initialization splits the sorted responses at the median, so the fit is
    deterministic and ``seed`` is accepted only for interface symmetry.
    Iteration stops once the relative log-likelihood change drops below
    ``tol``.  Variances are floored at ``1e-6 * var(y)``.
    """
    y = np.asarray(y, dtype=float).ravel()
    N = y.size
    if N < 4:
        raise ValueError(f"need at least 4 responses, got {N}")
    spread = float(np.var(y))
    floor = 1e-6 * spread if spread > 0 else 1e-12 * max(1.0, float(np.mean(y**2)))

    ys = np.sort(y)
    lo, hi = ys[: N // 2], ys[N // 2:]
    mu = np.array([lo.mean(), hi.mean()])
    var = np.maximum(np.array([lo.var(), hi.var()]), floor)
    w = np.array([0.5, 0.5])

    trace = []
    converged = False
    for _ in range(max_iter):
        lj = _log_joint(y, w, mu, var)
        ll_i = logsumexp(lj, axis=1)
        ll = float(ll_i.sum())
        resp = np.exp(lj - ll_i[:, None])
        if trace and abs(ll - trace[-1]) <= tol * abs(trace[-1]):
            trace.append(ll)
            converged = True
            break
        trace.append(ll)
        nk = resp.sum(axis=0)
        w = nk / N
        safe = np.where(nk > 0, nk, 1.0)
        mu = np.where(nk > 0, resp.T @ y / safe, mu)
        var = np.where(nk > 0, (resp * (y[:, None] - mu) ** 2).sum(axis=0) / safe, var)
        var = np.maximum(var, floor)
    else:
        lj = _log_joint(y, w, mu, var)
        resp = np.exp(lj - logsumexp(lj, axis=1)[:, None])

    resp = resp / resp.sum(axis=1, keepdims=True)
    if mu[0] > mu[1]:
        w, mu, var, resp = w[::-1], mu[::-1], var[::-1], resp[:, ::-1]
    return MixtureFit(
        weights=w.copy(),
        means=mu.copy(),
        variances=var.copy(),
        resp=np.ascontiguousarray(resp),
        loglik_trace=trace,
        converged=converged,
    )


def labels(fit: MixtureFit) -> np.ndarray:
    """Most probable component per observation, ties going to component 1."""
    return np.where(fit.resp[:, 1] > fit.resp[:, 0], 2, 1)


def write_mixture_csv(path, y, fit: MixtureFit) -> None:
    """Rows ``y, resp1, resp2, c`` for plotting the marginal split."""
    c = labels(fit)
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["y", "resp1", "resp2", "c"])
        for yi, (r1, r2), ci in zip(np.ravel(y), fit.resp, c):
            out.writerow([repr(float(yi)), repr(float(r1)), repr(float(r2)), int(ci)])


def _quadratic_basis(X: np.ndarray) -> np.ndarray:
    d = X.shape[1]
    cols = [X]
    cols += [X[:, [i]] * X[:, [j]] for i in range(d) for j in range(i, d)]
    return np.hstack(cols)


class Classifier:
    """Fitted map from inputs to the probability of level 1.

    Build with `fit_classifier`.  ``train_p`` holds the probabilities to
    use as the training-set feature (out-of-bag for random forests, in-sample
    otherwise) and ``accuracy`` the fraction of hard labels they recover
    when thresholded at 0.5.
    """

    def __init__(self, kind: str, d: int, state, accuracy: float = 1.0, train_p=None):
        self.kind = kind
        self.d = d
        self._state = state
        self.accuracy = accuracy
        self.train_p = train_p

    def predict_proba(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.size == 0:
            return np.zeros(0)
        X = np.atleast_2d(X)
        if X.shape[1] != self.d:
            raise ValueError(f"inputs have d={X.shape[1]}, classifier expects {self.d}")
        s = self._state
        if self.kind == "constant":
            return np.full(X.shape[0], s)
        if self.kind == "gp":
            model, lo, scale = s
            k = cross_cov((X - lo) / scale, model.data.X, model.hyp)
            p = 0.5 + k @ model.alpha
        elif self.kind == "logistic":
            model, lo, scale = s
            p = model.predict_proba(_quadratic_basis((X - lo) / scale))[:, 1]
        else:
            p = s.predict_proba(X)[:, 1]
        return np.clip(p, 0.0, 1.0)

    def __repr__(self) -> str:
        return f"Classifier(kind={self.kind!r}, d={self.d}, accuracy={self.accuracy:.4f})"


def fit_classifier(
    X,
    c,
    kind: str = "gp",
    seed: int = 0,
    max_fit: int = 1000,
) -> Classifier:
    """Learn ``P(level == 1 | x)`` from inputs and hard levels in ``{1, 2}``.

    Kinds
    -----
    ``"gp"``
        GP regression on the centred indicator ``1{c == 1} - 1/2`` with a
        small nugget; the prediction plus 1/2, clipped to ``[0, 1]``, is the
        probability.  One shared lengthscale (inputs scaled to the unit
        box) minimizes the leave-one-out error on at most ``max_fit`` rows
        and is rescaled to the full design density;
        above `GP_CLASSIFIER_MAX_N` rows ``"logistic"`` is used instead.
    ``"logistic"``
        Logistic regression on a degree-2 polynomial basis.
    ``"rf"``
        Random forest (scikit-learn).

    With a single level present, the result is the constant classifier.
    A forest's in-sample probabilities are near 0 or 1 even where its
    out-of-sample ones are not, so its ``train_p`` uses out-of-bag votes.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    c = np.asarray(c).ravel()
    if X.shape[0] != c.size:
        raise ValueError(f"{X.shape[0]} inputs but {c.size} labels")
    if not set(np.unique(c)) <= {1, 2}:
        raise ValueError("labels must be 1 or 2")
    d = X.shape[1]
    t = (c == 1).astype(float)
    if np.all(t == t[0]):
        return Classifier("constant", d, float(t[0]), train_p=np.full(t.size, t[0]))
    if kind == "gp" and X.shape[0] > GP_CLASSIFIER_MAX_N:
        kind = "logistic"

    lo = X.min(axis=0)
    scale = np.where(np.ptp(X, axis=0) > 0, np.ptp(X, axis=0), 1.0)
    Z = (X - lo) / scale
    if kind == "gp":
        clf = Classifier("gp", d, _fit_gp_classifier(Z, t, seed, max_fit))
        clf._state = (clf._state, lo, scale)
    elif kind == "logistic":
        from sklearn.linear_model import LogisticRegression

        model = LogisticRegression(C=1e4, max_iter=5000)
        model.fit(_quadratic_basis(Z), t.astype(int))
        clf = Classifier("logistic", d, (model, lo, scale))
    elif kind == "rf":
        from sklearn.ensemble import RandomForestClassifier

        model = RandomForestClassifier(
            n_estimators=200, min_samples_leaf=1, random_state=seed, n_jobs=1,
            oob_score=True,
        )
        model.fit(X, t.astype(int))
        clf = Classifier("rf", d, model)
        oob = model.oob_decision_function_[:, 1]
        # rows never left out of a bootstrap fall back to in-sample votes
        clf.train_p = np.where(np.isfinite(oob), oob, clf.predict_proba(X))
    else:
        raise ValueError(f"unknown classifier kind {kind!r}; choose from {CLASSIFIER_KINDS}")
    if clf.train_p is None:
        clf.train_p = clf.predict_proba(X)
    clf.accuracy = float(np.mean((clf.train_p > 0.5) == (t == 1)))
    return clf


# relative nugget of the indicator GP; hard labels are not an exact function
CLASSIFIER_NUGGET = 1e-4

# candidate isotropic lengthscales on the unit-scaled inputs
CLASSIFIER_THETA_GRID = np.geomspace(1e-4, 10.0, 26)


def loo_indicator_error(Z, t, theta: float, g: float = CLASSIFIER_NUGGET) -> float:
    """Mean squared leave-one-out residual of the indicator GP, in closed form.

    With ``A = R + g I`` the held-out residual of row ``i`` is
    ``(A^-1 t)_i / (A^-1)_ii``; the kernel scale cancels.
    """
    A = cross_cov(Z, Z, Hyperparams(1.0, np.full(Z.shape[1], theta)))
    A[np.diag_indices_from(A)] += g
    try:
        Ainv = factorize(A).inverse()
    except FactorizationError:
        return np.inf
    return float(np.mean((Ainv @ t / np.diag(Ainv)) ** 2))


def _fit_gp_classifier(Z, t, seed, max_fit):
    # Likelihood maximization is ill-posed for hard labels (it runs to either
    # lengthscale bound), so one shared lengthscale is picked by leave-one-out
    # error instead.
    N, d = Z.shape
    data = Dataset(Z, t - 0.5)
    fit_rows = np.arange(N)
    if N > max_fit:
        rng = np.random.default_rng(seed)
        fit_rows = np.sort(rng.choice(N, max_fit, replace=False))
    sub = data.subset(fit_rows)
    scores = [loo_indicator_error(sub.X, sub.Y, th) for th in CLASSIFIER_THETA_GRID]
    theta = CLASSIFIER_THETA_GRID[int(np.argmin(scores))]
    if sub.N < N:
        # a subsample is sparser than the full design; shrink the lengthscale
        # by the squared spacing ratio so the full fit stays as sharp
        theta = max(theta * (sub.N / N) ** (2.0 / d), CLASSIFIER_THETA_GRID[0])
    hyp = Hyperparams(1.0, np.full(d, theta), CLASSIFIER_NUGGET)
    return fit_gp(data, hyp, retries=3)


def predict_proba(clf: Classifier, X) -> np.ndarray:
    return clf.predict_proba(X)
