"""The modular jump GP pipeline: cluster, classify, augment, fit.

The classifier probability is appended to the inputs as an extra
coordinate.  Points on opposite sides of a jump are then far apart in the
augmented space even when they are close in the original one, so any GP
fitted there stops smoothing across the jump.

Run with ``python3 demos/04_modular_jgp.py``.
"""

import warnings

import numpy as np

from jumpgp import (
    LagpConfig,
    MjgpConfig,
    MLEConvergenceWarning,
    batch_predict,
    gen_onedim,
    global_gp_predict,
    mjgp_predict,
)
from jumpgp.modular import build_feature

warnings.simplefilter("ignore", MLEConvergenceWarning)

data, truth = gen_onedim(100, seed=3)
grid = np.linspace(0, 100, 500)[:, None]
y = truth(grid[:, 0])


def rmse(pred):
    return np.sqrt(np.mean((pred - y) ** 2))


print("global GP       ", rmse(global_gp_predict(data, grid).mean))
print("LAGP (n=50)     ", rmse(batch_predict(grid, data, LagpConfig(50)).mean))
print("MJGP global     ", rmse(mjgp_predict(data, grid, MjgpConfig(gp="global")).mean))
print("MJGP LAGP (n=50)", rmse(mjgp_predict(data, grid, MjgpConfig(gp=LagpConfig(50))).mean))

feature = build_feature(data, MjgpConfig(), grid)
side = feature.test_p > 0.5
edge = np.flatnonzero(side[1:] != side[:-1])
print("jump feature crosses 1/2 near x =", np.round(grid[edge, 0], 1))
