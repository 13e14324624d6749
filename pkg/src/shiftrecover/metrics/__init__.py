"""Distances between image batches: projections, Wasserstein estimators, SSIM, divergences."""
from .projection import FAMILIES, Projection, make_projection, orthonormal_rows
from .similarity import (
    DegenerateCorrelationError,
    histogram_divergence,
    pearson,
    sliced_divergence,
    ssim,
    ssim_per_image,
)
from .transport import (
    Estimator,
    linear_assignment,
    random_directions,
    wasserstein_1d,
    wasserstein_exact,
    wasserstein_sliced,
)

__all__ = [
    "FAMILIES",
    "DegenerateCorrelationError",
    "Estimator",
    "Projection",
    "histogram_divergence",
    "linear_assignment",
    "make_projection",
    "orthonormal_rows",
    "pearson",
    "random_directions",
    "sliced_divergence",
    "ssim",
    "ssim_per_image",
    "wasserstein_1d",
    "wasserstein_exact",
    "wasserstein_sliced",
]
