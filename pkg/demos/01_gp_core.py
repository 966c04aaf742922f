"""Squared-exponential GP basics: kernel, factorization, likelihood fit, prediction.

Run with ``python3 demos/01_gp_core.py``.
"""

import numpy as np

from jumpgp import (
    Dataset,
    GPModel,
    Hyperparams,
    cov_matrix,
    extend_factor,
    factorize,
    fit_mle,
    predict,
)

rng = np.random.default_rng(0)

# A covariance factor can be grown one point at a time in O(n^2).
X = rng.uniform(size=(40, 2))
S = cov_matrix(X, Hyperparams(1.0, [0.3, 0.3], 1e-6))
f = factorize(S[:10, :10])
for n in range(11, 41):
    f = extend_factor(f, S[: n - 1, n - 1], S[n - 1, n - 1])
print("incremental vs one-shot logdet:", f.logdet, factorize(S).logdet)

# Lengthscales by maximum likelihood (the scale is profiled out).
x = np.linspace(0, 2 * np.pi, 25)[:, None]
data = Dataset(x, np.sin(2 * x[:, 0]))
hyp = fit_mle(data, n_starts=3, seed=1)
print("fitted", hyp)

# Predictions interpolate the data and revert to the prior far away.
model = GPModel(data, hyp)
xt = np.array([[0.3], [np.pi], [20.0]])
res = predict(model, xt)
for xi, m, v in zip(xt[:, 0], res.mean, res.var):
    print(f"x={xi:6.2f}  mean={m: .4f}  sd={np.sqrt(v):.4f}  truth={np.sin(2 * xi): .4f}")
