"""A small Monte Carlo comparison on repeated 90:10 splits.

Every method sees the same split within a replicate, so per-replicate
differences are paired.  Results are also written as CSV for plotting.

Run with ``python3 demos/06_benchmark.py`` (a few minutes).
"""

import tempfile
import warnings

from jumpgp import McConfig, MLEConvergenceWarning, run_mc, summarize
from jumpgp.datagen import default_spec

warnings.simplefilter("ignore", MLEConvergenceWarning)

out_dir = tempfile.mkdtemp()
cfg = McConfig(
    default_spec("star", size=31),
    methods=("lagp", "olagp", "mjgp-olagp"),
    reps=3,
    n_max=80,
    out_dir=out_dir,
)
res = run_mc(cfg, progress=lambda rep, m, v: print(f"rep {rep} {m:<11} rmse {v:.4f}"))
print(summarize(res).format())
print("CSV output in", out_dir)
