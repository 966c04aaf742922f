"""Splitting responses into two levels, then learning where each level lives.

EM on the responses alone separates the two Phantom levels; a classifier
on the inputs turns those hard labels into a probability surface that is
near 0 or 1 away from the boundary and near 1/2 on it.

Run with ``python3 demos/03_levels.py``.
"""

import numpy as np

from jumpgp import em_fit, fit_classifier, labels
from jumpgp.datagen import gen_phantom

data = gen_phantom(41, seed=0)
mix = em_fit(data.Y)
c = labels(mix)
print("component means:", mix.means, "weights:", mix.weights)
print("EM iterations:", mix.n_iter, "converged:", mix.converged)
print("level sizes:", np.bincount(c)[1:])

for kind in ("gp", "logistic", "rf"):
    clf = fit_classifier(data.X, c, kind=kind, seed=0)
    p = clf.predict_proba([[-0.45, -0.45], [0.0, 0.4], [0.32, 0.0]])
    print(f"{kind:>8}: training accuracy {clf.accuracy:.3f}, P(level 1) at probes {np.round(p, 3)}")
