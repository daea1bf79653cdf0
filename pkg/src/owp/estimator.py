"""Estimator-style front ends over the solver and the SAA loop."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import saa
from ._validation import check_points, check_vector
from .exceptions import DimensionError
from .ordered import empirical_objective, group_costs, pairwise_norms, resolve_lambda
from .samples import GroupedSample
from .solver import SolveOptions, solve


def _grouped(X, y):
    X = check_points(X)
    if y is None:
        return GroupedSample(X, np.ones(X.shape[0], dtype=np.int64)), np.arange(X.shape[0])
    y = np.asarray(y)
    if y.shape != (X.shape[0],):
        raise DimensionError(f"group labels must have shape ({X.shape[0]},), got {y.shape}")
    labels = np.unique(y)
    return GroupedSample.from_labels(X, y), labels


class OrderedWeberLocator(TransformerMixin, BaseEstimator):
    """Single facility minimising an ordered weighted sum of group mean distances.

    Rows of ``X`` are demand points; ``y`` assigns each row to a demand group
    (every row is its own group when omitted). Group ``i`` costs
    ``w_i * mean_j ||loc - x_ij||`` and the costs are combined by ``lam``.

    Parameters
    ----------
    lam : str or array-like, default="median"
        Preset name (median, center, halfsum, halfcentdian) or a convex
        weight vector with one entry per group.
    norm : float, default=2.0
    tol : float, default=1e-7
        Relative optimality gap at which the solver stops.
    max_iter : int, default=5000
    step_rule : {"level", "polyak", "diminishing"}, default="level"

    Attributes
    ----------
    location_ : ndarray of shape (n_features,)
    objective_ : float
    lower_bound_ : float
        Certified lower bound on the optimum (nan for subgradient rules).
    costs_ : ndarray of shape (n_groups,)
    classes_ : ndarray
        Sorted group labels, in the order used for ``group_weight``.
    n_iter_ : int
    converged_ : bool
    """

    def __init__(self, lam="median", norm=2.0, tol=1e-7, max_iter=5000, step_rule="level"):
        self.lam = lam
        self.norm = norm
        self.tol = tol
        self.max_iter = max_iter
        self.step_rule = step_rule

    def _options(self):
        return SolveOptions(tol=self.tol, max_iters=self.max_iter, step_rule=self.step_rule,
                            norm=self.norm)

    def fit(self, X, y=None, group_weight=None):
        samples, labels = _grouped(X, y)
        n = samples.n_groups
        w = np.ones(n) if group_weight is None else check_vector(
            group_weight, n=n, name="group_weight", nonnegative=True)
        out = solve(samples, w, self.lam, self._options())
        self.location_ = out.y
        self.objective_ = out.value
        self.lower_bound_ = out.lower_bound
        self.n_iter_ = out.iterations
        self.converged_ = out.converged
        self.costs_ = group_costs(out.y, samples, w, self.norm)
        self.classes_ = labels
        self.group_weight_ = w
        self.n_features_in_ = samples.dim
        return self

    def transform(self, X):
        """Distance of every row of ``X`` to the fitted location, shape (N, 1)."""
        check_is_fitted(self, "location_")
        X = check_points(X, dim=self.n_features_in_)
        return pairwise_norms(self.location_, X, self.norm)[:, None]

    def score(self, X, y=None, group_weight=None):
        """Negative ordered objective of the fitted location on ``(X, y)``."""
        check_is_fitted(self, "location_")
        samples, _ = _grouped(X, y)
        n = samples.n_groups
        w = np.ones(n) if group_weight is None else group_weight
        return -empirical_objective(self.location_, samples, w, resolve_lambda(self.lam, n),
                                    self.norm)[0]


class AdaptiveSAALocator(BaseEstimator):
    """Adaptive SAA for an :class:`~owp.instances.Instance`.

    Parameters
    ----------
    lam : str, array-like or None
        Overrides the instance's preset.
    seed : int, default=0
    params : SaaParams or dict, optional

    Attributes
    ----------
    location_, rho_, rho_val_, halfwidth_, interval_, stop_reason_, result_
    """

    def __init__(self, lam=None, seed=0, params=None):
        self.lam = lam
        self.seed = seed
        self.params = params

    def fit(self, X, y=None):
        """Run the adaptive loop on instance ``X``; ``y`` is ignored."""
        params = self.params
        if isinstance(params, dict):
            params = saa.SaaParams.from_dict(params)
        res = saa.run(X, params, self.seed, lam=self.lam)
        self.result_ = res
        self.location_ = res.y
        self.rho_ = res.rho
        self.rho_val_ = res.rho_val
        self.halfwidth_ = res.halfwidth
        self.interval_ = res.interval
        self.stop_reason_ = res.stop_reason
        self.n_iter_ = len(res.trace)
        return self

    def predict(self, X=None):
        check_is_fitted(self, "location_")
        return self.location_
