"""Synthetic jump surfaces and the CSV format.

Run with ``python3 demos/05_datagen.py``; writes CSV files to a temporary
directory.
"""

import os
import tempfile

import numpy as np

from jumpgp import gen_michalewicz, load_csv, mask_phantom, mask_star, save_csv
from jumpgp.datagen import gen_phantom, gen_star, grid, lhs

X = lhs(8, 2, seed=0)
print("LHS bins per column:", [sorted(np.floor(8 * X[:, k]).astype(int).tolist()) for k in range(2)])

for name, gen, mask, lo, hi in (
    ("phantom", gen_phantom, mask_phantom(), -0.5, 0.5),
    ("star", gen_star, mask_star(), 0.0, 1.0),
):
    data = gen(41, seed=1)
    lev = mask(grid(41, lo, hi))
    counts, _ = np.histogram(data.Y, bins=10, range=(0, 1))
    print(f"{name}: level-2 share {np.mean(lev == 2):.2f}, response histogram {counts.tolist()}")

mich = gen_michalewicz(2000, seed=0)
print("Michalewicz: share of lifted (flat) points", np.mean(mich.Y > 0.4))

out = os.path.join(tempfile.mkdtemp(), "star.csv")
save_csv(out, gen_star(21, seed=2))
back = load_csv(out)
print(f"round trip through {out}: N={back.N}, d={back.d}")
