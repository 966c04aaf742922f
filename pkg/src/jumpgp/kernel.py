"""Separable squared-exponential covariance and growable Cholesky factors.

The kernel is

    k(x, x') = tau2 * exp(-sum_k (x_k - x'_k)**2 / theta_k)

and covariance matrices carry a relative nugget ``g`` on the diagonal, so
that ``cov_matrix(X)[i, i] == tau2 * (1 + g)``.

`CovFactor` stores a lower Cholesky factor together with the log
determinant.  Appending one row/column costs a single triangular solve,
which is the factored form of the partition-inverse update: with
``w = L^{-1} k_n`` the Schur complement is ``v = k(x_n, x_n) - w @ w``, the
new diagonal entry is ``sqrt(v)`` and ``logdet`` grows by ``log(v)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, lapack, solve_triangular

DEFAULT_JITTER = 1e-8

# Schur complements below this fraction of the new point's variance are
# treated as linear dependence.
DEPENDENCE_TOL = 1e-12


class FactorizationError(np.linalg.LinAlgError):
    """A covariance matrix could not be factorized or extended.

    ``pivot`` is the zero-based index of the first non-positive pivot, when
    known.
    """

    def __init__(self, message: str, pivot: int | None = None):
        super().__init__(message)
        self.pivot = pivot


@dataclass(frozen=True)
class Hyperparams:
    """Scale ``tau2``, per-dimension lengthscales ``theta`` and nugget ``g``."""

    tau2: float
    theta: np.ndarray
    g: float = DEFAULT_JITTER

    def __post_init__(self):
        theta = np.atleast_1d(np.asarray(self.theta, dtype=float)).copy()
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "tau2", float(self.tau2))
        object.__setattr__(self, "g", float(self.g))
        if theta.ndim != 1:
            raise ValueError("theta must be a vector")
        if not self.tau2 > 0:
            raise ValueError(f"tau2 must be positive, got {self.tau2}")
        if not np.all(theta > 0):
            raise ValueError(f"theta entries must be positive, got {theta}")
        if not self.g >= 0:
            raise ValueError(f"g must be nonnegative, got {self.g}")

    @property
    def d(self) -> int:
        return self.theta.size


def _check_dims(A: np.ndarray, theta: np.ndarray) -> None:
    if A.shape[1] != theta.size:
        raise ValueError(
            f"input dimension {A.shape[1]} does not match {theta.size} lengthscales"
        )


def scaled_sqdist(A: np.ndarray, B: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Pairwise ``sum_k (a_k - b_k)**2 / theta_k`` between rows of A and B."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    theta = np.asarray(theta, dtype=float)
    _check_dims(A, theta)
    _check_dims(B, theta)
    D = np.zeros((A.shape[0], B.shape[0]))
    # one dimension at a time keeps memory at O(nm) and the result exactly
    # symmetric when A is B
    for k in range(theta.size):
        diff = A[:, k, None] - B[None, :, k]
        D += diff * diff / theta[k]
    return D


def kernel_eval(xi, xj, hyp: Hyperparams) -> float:
    """Covariance between two single inputs."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    xj = np.atleast_1d(np.asarray(xj, dtype=float))
    if xi.shape != (hyp.d,) or xj.shape != (hyp.d,):
        raise ValueError(
            f"inputs of shape {xi.shape} and {xj.shape} do not match d={hyp.d}"
        )
    diff = xi - xj
    return hyp.tau2 * float(np.exp(-np.sum(diff * diff / hyp.theta)))


def cross_cov(A, B, hyp: Hyperparams) -> np.ndarray:
    """Kernel matrix between rows of ``A`` and rows of ``B`` (no nugget)."""
    return hyp.tau2 * np.exp(-scaled_sqdist(A, B, hyp.theta))


def cov_matrix(X, hyp: Hyperparams) -> np.ndarray:
    """Covariance of the rows of ``X`` including the nugget."""
    K = cross_cov(X, X, hyp)
    K[np.diag_indices_from(K)] += hyp.tau2 * hyp.g
    return K


class CovFactor:
    """Lower Cholesky factor ``L`` (``S = L @ L.T``) and ``log|S|``.

    Instances are treated as immutable; `extend` returns a new factor.
    """

    __slots__ = ("chol", "logdet")

    def __init__(self, chol: np.ndarray, logdet: float | None = None):
        self.chol = chol
        if logdet is None:
            logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
        self.logdet = float(logdet)

    @property
    def size(self) -> int:
        return self.chol.shape[0]

    def solve(self, v) -> np.ndarray:
        """Apply the inverse of the factored matrix to a vector or matrix."""
        return cho_solve((self.chol, True), v, check_finite=False)

    def half_solve(self, v) -> np.ndarray:
        """``L^{-1} v``."""
        return solve_triangular(self.chol, v, lower=True, check_finite=False)

    def inverse(self) -> np.ndarray:
        inv, info = lapack.dpotri(self.chol, lower=1)
        if info != 0:
            raise FactorizationError("inverse from Cholesky factor failed")
        inv = np.tril(inv)
        return inv + np.tril(inv, -1).T

    def extend(self, cross, self_cov: float) -> "CovFactor":
        return extend_factor(self, cross, self_cov)

    def __repr__(self) -> str:
        return f"CovFactor(size={self.size}, logdet={self.logdet:.6g})"


def factorize(S) -> CovFactor:
    """Cholesky-factorize a symmetric positive definite matrix.

    Raises
    ------
    FactorizationError
        If ``S`` is not numerically positive definite; ``pivot`` holds the
        index of the failing leading minor.
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {S.shape}")
    L, info = lapack.dpotrf(S, lower=1, clean=1)
    if info > 0:
        raise FactorizationError(
            f"matrix not positive definite (pivot {info - 1})", pivot=info - 1
        )
    if info < 0:
        raise ValueError(f"illegal argument to dpotrf ({info})")
    return CovFactor(L)


def extend_factor(f: CovFactor, cross, self_cov: float) -> CovFactor:
    """Factor of ``[[S, c], [c.T, s]]`` given the factor of ``S``.

    Parameters
    ----------
    f : CovFactor
        Factor of the existing ``(n-1) x (n-1)`` covariance.
    cross : array, shape (n-1,)
        Covariances between the existing points and the new one.
    self_cov : float
        Variance of the new point (nugget included).

    Raises
    ------
    FactorizationError
        If the Schur complement is below ``DEPENDENCE_TOL * self_cov``.
    """
    cross = np.asarray(cross, dtype=float).ravel()
    n = f.size
    if cross.size != n:
        raise ValueError(f"cross has {cross.size} entries, factor has size {n}")
    w = f.half_solve(cross) if n else cross
    v = float(self_cov - w @ w)
    if not v > DEPENDENCE_TOL * self_cov:
        raise FactorizationError(
            f"new point is linearly dependent (Schur complement {v:.3g})", pivot=n
        )
    L = np.zeros((n + 1, n + 1))
    L[:n, :n] = f.chol
    L[n, :n] = w
    L[n, n] = np.sqrt(v)
    return CovFactor(L, f.logdet + np.log(v))


class GrowingCholesky:
    """Mutable, single-owner Cholesky factor with preallocated capacity.

    Used inside neighborhood sweeps, where the factor grows one point at a
    time and is occasionally rebuilt.  ``flops`` counts multiply-adds spent
    on factorizations and triangular solves.
    """

    def __init__(self, capacity: int):
        self._L = np.zeros((capacity, capacity))
        self.size = 0
        self.logdet = 0.0
        self.flops = 0

    @property
    def chol(self) -> np.ndarray:
        return self._L[: self.size, : self.size]

    def reset(self, S: np.ndarray) -> None:
        f = factorize(S)
        n = f.size
        self._L[:n, :n] = f.chol
        self.size = n
        self.logdet = f.logdet
        self.flops += n**3 // 3

    def append(self, cross: np.ndarray, self_cov: float) -> tuple[np.ndarray, float]:
        """Add one point; return ``(w, l)`` with ``w = L^{-1} cross`` and new pivot ``l``."""
        n = self.size
        w = solve_triangular(self._L[:n, :n], cross, lower=True, check_finite=False)
        self.flops += n * n
        v = float(self_cov - w @ w)
        if not v > DEPENDENCE_TOL * self_cov:
            raise FactorizationError(
                f"new point is linearly dependent (Schur complement {v:.3g})", pivot=n
            )
        l = np.sqrt(v)
        self._L[n, :n] = w
        self._L[n, n] = l
        self.size = n + 1
        self.logdet += np.log(v)
        return w, l

    def freeze(self) -> CovFactor:
        return CovFactor(self.chol.copy(), self.logdet)
