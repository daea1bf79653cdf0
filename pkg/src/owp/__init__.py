"""Single-facility ordered Weber location under spatial demand uncertainty."""

from . import bench, bounds, distributions, instances, ordered, saa, solver
from .distributions import DistributionSpec, expected_center_distance, sample
from .estimator import AdaptiveSAALocator, OrderedWeberLocator
from .exceptions import OWPError
from .instances import Instance, generate, load_instance, save_instance
from .ordered import empirical_objective, lambda_preset, ordered_weighted_sum
from .samples import GroupedSample
from .solver import SolveOptions, solve

__version__ = "0.1.0"

__all__ = [
    "AdaptiveSAALocator", "DistributionSpec", "GroupedSample", "Instance", "OWPError",
    "OrderedWeberLocator", "SolveOptions", "bench", "bounds", "distributions",
    "empirical_objective", "expected_center_distance", "generate", "instances",
    "lambda_preset", "load_instance", "ordered", "ordered_weighted_sum", "saa", "sample",
    "save_instance", "solve", "solver",
]
