"""Distribution and density estimation by preintegration and shifted lattice rules."""

from .gaussian import cdf as norm_cdf, pdf as norm_pdf, quantile as norm_quantile
from .lattice import (
    GeneratingVector, Shift, UnitPointSet, builtin_vector, draw_shifts, korobov_vector,
    lattice_points, load_generating_vector, transform_points,
)
from .model import (
    CovarianceSpec, LinearGaussianModel, LognormalSumModel, Model, check_monotone,
    linear_gaussian_model, lognormal_from_covariance, lognormal_sum_model, pca_factorize,
)
from .preintegration import (
    RootConfig, RootFindingError, RootResult, batch_curve, find_xi, pointwise_cdf, pointwise_pdf,
)

__version__ = "0.1.0"

__all__ = [
    "norm_cdf", "norm_pdf", "norm_quantile",
    "GeneratingVector", "Shift", "UnitPointSet", "builtin_vector", "draw_shifts", "korobov_vector",
    "lattice_points", "load_generating_vector", "transform_points",
    "CovarianceSpec", "LinearGaussianModel", "LognormalSumModel", "Model", "check_monotone",
    "linear_gaussian_model", "lognormal_from_covariance", "lognormal_sum_model", "pca_factorize",
    "RootConfig", "RootFindingError", "RootResult", "batch_curve", "find_xi", "pointwise_cdf", "pointwise_pdf",
]
