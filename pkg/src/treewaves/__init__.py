"""Invariant Gaussian waves on regular trees.

Simulation and analysis of the unique invariant Gaussian process attached to
each adjacency eigenvalue of the d-regular tree: exact covariance evaluation,
exact sampling on balls and geodesics, Gibbs sampling conditioned on staying
above a level, and estimation of the level-set percolation threshold.
"""

__version__ = "0.1.0"

from .conditioned import (
    ConditionedPathState,
    GibbsPlan,
    RepulsionTail,
    TailPoint,
    batch_means_ess,
    build_gibbs_plan,
    gibbs_run,
    repulsion_tail,
)
from .errors import NumericalError, ValidationError
from .gaussian import (
    ConditionalGaussian,
    PsdFactor,
    TruncatedGaussian,
    assemble_covariance,
    conditional,
    factor_psd,
    orthant_edge_probability,
    sample_truncated,
)
from .levelset import (
    Component,
    ComponentSummary,
    RatioBoundsReport,
    RatioEntry,
    SurvivalCurve,
    SurvivalEstimate,
    conditioned_survival,
    critical_threshold,
    expdec_alpha,
    extract_components,
    haggstrom_alpha,
    survival_curve_smc,
    survival_direct,
    survival_ratio_bounds,
    survival_smc,
    transfer_rate,
)
from .sampler import (
    BallSample,
    PathSample,
    StepKernel,
    path_step_kernel,
    sample_ball_dense,
    sample_ball_dense_many,
    sample_ball_recursive,
    sample_ball_recursive_many,
    sample_path,
    sample_path_many,
    sample_scale,
    verify_eigen_residual,
    verify_sphere_sums,
)
from .spectral import (
    CovarianceProfile,
    RepulsionCoefficients,
    SpectralPoint,
    TreeParams,
    build_profile,
    chebyshev_u,
    repulsion_coefficients,
    sample_lambda,
    sample_lambda_many,
    spectral_density,
    spectral_edge,
)
from .tree import (
    Ball,
    VertexId,
    ball_vertex_count,
    canonical_path,
    distance,
    enumerate_ball,
    pairwise_distances,
    sphere_size,
)

__all__ = [name for name in dir() if not name.startswith("_")]
