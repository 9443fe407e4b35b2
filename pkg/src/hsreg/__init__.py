"""Hierarchical sparsity priors for Bayesian sparse regression."""

__version__ = "0.1.0"

from .distributions import (
    GammaParams,
    GammaGammaParams,
    PointMass,
    MixingLaw,
    gg_logdensity,
    gg_sample,
    product_two_gammas_logdensity,
    estimate_sparsity_shape,
)
from .prior_graph import (
    Combinator,
    EtaNode,
    PriorGraph,
    compute_psi,
    prior_logdensity,
    build_strong_heredity,
    build_weak_heredity,
    build_gam,
    build_gam_interactions,
)
from .design import (
    DesignSpec,
    DesignMatrix,
    MinMaxScale,
    normalize_minmax,
    spline_basis,
    build_linear_interactions,
    build_gam_design,
    build_gam_interaction_design,
)
from .sampler import (
    ChainConfig,
    RegressionModel,
    Sampler,
    TemperedChains,
    SampleStore,
    run_chain,
    adapt_proposal,
    effective_sample_size,
)
from .shrinkage import (
    FixedVariancePrior,
    NormalGammaPrior,
    NormalGammaGammaPrior,
    ProductGammaPrior,
    ProductGGPrior,
    shis_prior,
    scis_prior,
    shrinkage_at,
    profile,
    shis_vs_scis,
)
from .errors import (
    HsregError,
    ConfigError,
    DataError,
    InsufficientDataError,
    NumericalError,
)
