"""Local GPs on the 1-d jump example.

A fixed-size local GP (LAGP) uses the 50 nearest points wherever it
predicts, so near a jump its neighborhood straddles both levels.  OLAGP
picks the size per location by checking how well each candidate size
predicts the nearest training point, which tends to stop before crossing
the jump.

Run with ``python3 demos/02_local_gps.py``.
"""

import warnings

import numpy as np

from jumpgp import (
    LagpConfig,
    MLEConvergenceWarning,
    OlagpConfig,
    batch_predict,
    gen_onedim,
    olagp_search,
)

warnings.simplefilter("ignore", MLEConvergenceWarning)

data, truth = gen_onedim(300, seed=0)
grid = np.linspace(0, 100, 400)[:, None]
y = truth(grid[:, 0])

lagp = batch_predict(grid, data, LagpConfig(50))
olagp = batch_predict(grid, data, OlagpConfig(12, 160))
print("LAGP  rmse:", np.sqrt(np.mean((lagp.mean - y) ** 2)))
print("OLAGP rmse:", np.sqrt(np.mean((olagp.mean - y) ** 2)))

for x in (20.0, 49.0, 60.0, 69.0, 85.0):
    s = olagp_search([x], data, OlagpConfig(12, 160))
    print(f"x={x:5.1f}: chosen neighborhood size {s.nhat:3d}, validation SE {s.se_at_nhat:.2e}")
