"""Modular jump GP: cluster the responses, classify in input space, then fit
any GP on inputs augmented with the predicted level probability.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gp import Dataset, PredictiveResult, default_bounds, global_gp_predict
from .levels import Classifier, MixtureFit, em_fit, fit_classifier, labels
from .local import LagpConfig, OlagpConfig, batch_predict

# starting lengthscale of the jump-feature column (feature lives in [0, 1])
FEATURE_THETA0 = 1.0


@dataclass(frozen=True)
class JumpFeature:
    train_p: np.ndarray
    test_p: np.ndarray
    classifier: Classifier = field(repr=False)
    mixture: MixtureFit = field(repr=False)


@dataclass(frozen=True)
class MjgpConfig:
    """``gp`` is ``"global"``, a `LagpConfig` or an `OlagpConfig`."""

    gp: object = field(default_factory=OlagpConfig)
    classifier: str = "gp"
    em_tol: float = 1e-8
    em_max_iter: int = 500
    seed: int = 0
    feature_theta0: float = FEATURE_THETA0
    global_starts: int = 3

    def __post_init__(self):
        if not (self.gp == "global" or isinstance(self.gp, (LagpConfig, OlagpConfig))):
            raise ValueError(f"gp must be 'global', LagpConfig or OlagpConfig, got {self.gp!r}")


def build_feature(data: Dataset, cfg: MjgpConfig, Xtest) -> JumpFeature:
    """Fit the level classifier on ``data`` and evaluate it on both input sets."""
    Xtest = np.asarray(Xtest, dtype=float).reshape(-1, data.d)
    mix = em_fit(data.Y, tol=cfg.em_tol, max_iter=cfg.em_max_iter, seed=cfg.seed)
    clf = fit_classifier(data.X, labels(mix), kind=cfg.classifier, seed=cfg.seed)
    return JumpFeature(
        train_p=clf.train_p,
        test_p=clf.predict_proba(Xtest),
        classifier=clf,
        mixture=mix,
    )


def augment(X, p) -> np.ndarray:
    """Append ``p`` as a last input column."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    p = np.asarray(p, dtype=float).ravel()
    if X.shape[0] != p.size:
        raise ValueError(f"{X.shape[0]} rows but {p.size} feature values")
    return np.column_stack([X, p])


def predict_augmented(
    data: Dataset, Xtest, feature: JumpFeature, cfg: MjgpConfig, workers: int = 1
) -> PredictiveResult:
    """Run the configured GP on the augmented training and test inputs."""
    aug = Dataset(augment(data.X, feature.train_p), data.Y)
    Xa = augment(np.asarray(Xtest, dtype=float).reshape(-1, data.d), feature.test_p)
    theta0 = np.full(aug.d, np.nan)
    theta0[-1] = cfg.feature_theta0
    if cfg.gp == "global":
        return global_gp_predict(
            aug, Xa, n_starts=cfg.global_starts, seed=cfg.seed, theta0=theta0
        )
    return batch_predict(
        Xa, aug, cfg.gp, workers=workers, bounds=default_bounds(aug.X), theta0=theta0
    )


def mjgp_predict(
    data: Dataset,
    Xtest,
    cfg: MjgpConfig = MjgpConfig(),
    workers: int = 1,
) -> PredictiveResult:
    """Cluster, classify, augment and predict at ``Xtest``."""
    feature = build_feature(data, cfg, Xtest)
    return predict_augmented(data, Xtest, feature, cfg, workers=workers)
