"""Local and modular jump Gaussian process surrogates."""

from .bench import McConfig, McResult, rmse, run_mc, summarize
from .datagen import (
    GenSpec,
    MembershipMask,
    gen_masked_surface,
    gen_michalewicz,
    gen_onedim,
    lhs,
    load_csv,
    mask_phantom,
    mask_star,
    michalewicz,
    save_csv,
)
from .gp import (
    Dataset,
    GPModel,
    MLEConvergenceWarning,
    PredictiveResult,
    fit_gp,
    fit_mle,
    global_gp_predict,
    neg_log_likelihood,
    predict,
)
from .kernel import (
    CovFactor,
    FactorizationError,
    Hyperparams,
    cov_matrix,
    cross_cov,
    extend_factor,
    factorize,
    kernel_eval,
)
from .levels import MixtureFit, em_fit, fit_classifier, labels
from .local import (
    LagpConfig,
    Neighborhood,
    OlagpConfig,
    batch_predict,
    lagp_predict,
    nn_neighborhood,
    olagp_predict,
    olagp_search,
)
from .modular import MjgpConfig, augment, build_feature, mjgp_predict

__version__ = "0.1.0"
