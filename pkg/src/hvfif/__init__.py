"""Hidden-variable fractal interpolation with function-valued scaling factors."""

from .analysis import (
    box_count,
    dimension_bounds,
    empirical_holder,
    estimate_dimension,
    smoothness_constants,
    stability_bound,
    stability_experiment,
)
from .bivariate import GridDataSet, build_bivariate, dimension_bounds_surface, subdivide_surface
from .core import ExtendedDataSet, FactorQuad, build_univariate
from .evaluate import evaluate_at, evaluate_points, rb_iterate, subdivide
from .factors import inf_abs_bound, lipschitz_bound, parse, serialize, sup_abs_bound

__all__ = [
    "ExtendedDataSet", "FactorQuad", "GridDataSet",
    "box_count", "build_bivariate", "build_univariate", "dimension_bounds", "dimension_bounds_surface",
    "empirical_holder", "estimate_dimension", "evaluate_at", "evaluate_points", "inf_abs_bound",
    "lipschitz_bound", "parse", "rb_iterate", "serialize", "smoothness_constants", "stability_bound",
    "stability_experiment", "subdivide", "subdivide_surface", "sup_abs_bound",
]
