"""Ordered weighted aggregation and the empirical ordered Weber objective.

The ordered weighted sum of a cost vector ``c`` with weights ``lam`` is
``sum_i lam[i] * c_sorted[i]`` where ``c_sorted`` is ``c`` in non-increasing
order. With ``lam`` nonnegative and non-increasing ("convex mode") the
aggregate is a convex, monotone, positively homogeneous function of ``c``.
"""

from __future__ import annotations

import math

import numpy as np

from ._validation import check_norm, check_point, check_vector
from .exceptions import ConfigurationError, DimensionError, DomainError, UnsupportedModeError
from .samples import GroupedSample

LAMBDA_PRESETS = ("median", "center", "halfsum", "halfcentdian")


def lambda_preset(name, n):
    """Weight vector of a named ordered objective for ``n`` demands.

    ``median`` is the plain sum, ``center`` the maximum, ``halfsum`` the sum
    of the ``ceil(n/2)`` largest costs and ``halfcentdian`` the maximum plus
    half of the remaining costs.
    """
    n = int(n)
    if n < 1:
        raise DomainError("n must be at least 1")
    if name == "median":
        return np.ones(n)
    if name == "center":
        lam = np.zeros(n)
        lam[0] = 1.0
        return lam
    if name == "halfsum":
        lam = np.zeros(n)
        lam[: math.ceil(n / 2)] = 1.0
        return lam
    if name == "halfcentdian":
        lam = np.full(n, 0.5)
        lam[0] = 1.0
        return lam
    raise ConfigurationError(f"unknown lambda preset {name!r}; expected one of {LAMBDA_PRESETS}")


def resolve_lambda(lam, n):
    """Accept a preset name or an explicit weight vector of length ``n``."""
    if isinstance(lam, str):
        return lambda_preset(lam, n)
    return check_vector(lam, n=n, name="lambda")


def is_convex_mode(lam):
    """True when ``lam`` is nonnegative and non-increasing."""
    lam = np.asarray(lam, dtype=np.float64)
    return bool(np.all(lam >= 0) and np.all(np.diff(lam) <= 0))


def require_convex(lam):
    if not is_convex_mode(lam):
        raise UnsupportedModeError(
            "lambda must be nonnegative and non-increasing (convex ordered objective)")


def sort_order(costs):
    """Indices sorting ``costs`` non-increasingly; ties keep index order."""
    return np.argsort(-np.asarray(costs), kind="stable")


def ordered_weighted_sum(lam, costs):
    """Return ``sum_i lam[i] * costs_(i)`` with costs sorted non-increasingly.

    Parameters
    ----------
    lam : array-like of shape (n,)
    costs : array-like of shape (n,)

    Raises
    ------
    DimensionError
        If the lengths differ.
    DomainError
        If any entry is not finite.
    """
    lam = np.asarray(lam, dtype=np.float64).reshape(-1)
    costs = np.asarray(costs, dtype=np.float64).reshape(-1)
    if lam.shape != costs.shape:
        raise DimensionError(f"lambda has length {lam.size} but costs has length {costs.size}")
    if not (np.all(np.isfinite(lam)) and np.all(np.isfinite(costs))):
        raise DomainError("ordered_weighted_sum requires finite inputs")
    return float(lam @ costs[sort_order(costs)])


def pairwise_norms(y, points, p=2.0):
    """``||y - x||_p`` for every row ``x`` of ``points``."""
    diff = y[None, :] - points
    if p == 2.0:
        return np.sqrt(np.einsum("ij,ij->i", diff, diff))
    if p == 1.0:
        return np.abs(diff).sum(axis=1)
    if math.isinf(p):
        return np.abs(diff).max(axis=1)
    return np.linalg.norm(diff, ord=p, axis=1)


def _check_problem(y, samples, weights, lam):
    if not isinstance(samples, GroupedSample):
        samples = GroupedSample.from_groups(samples)
    y = check_point(y, dim=samples.dim)
    n = samples.n_groups
    weights = check_vector(weights, n=n, name="weights", nonnegative=True)
    lam = resolve_lambda(lam, n)
    return y, samples, weights, lam


def group_costs(y, samples, weights, p=2.0):
    """Weighted mean distance ``w_i / m_i * sum_j ||y - x_ij||_p`` for each group."""
    dist = pairwise_norms(y, samples.points, p)
    return np.asarray(weights) * np.add.reduceat(dist, samples.offsets) / samples.sizes


def empirical_objective(y, samples, weights, lam, norm=2.0):
    """Ordered weighted sum of per-group weighted mean distances.

    Parameters
    ----------
    y : array-like of shape (d,)
        Facility location.
    samples : GroupedSample or sequence of (m_i, d) arrays
    weights : array-like of shape (n,)
        Nonnegative demand weights; zeros are allowed.
    lam : str or array-like of shape (n,)
        Preset name or ordered weights.
    norm : float, default=2
        Exponent ``p >= 1`` of the distance.

    Returns
    -------
    value : float
    costs : ndarray of shape (n,)
        Unsorted per-group weighted mean distances.
    """
    y, samples, weights, lam = _check_problem(y, samples, weights, lam)
    p = check_norm(norm)
    costs = group_costs(y, samples, weights, p)
    return float(lam @ costs[sort_order(costs)]), costs


def norm_subgradient(diff, dist, p):
    """Row-wise subgradients of ``v -> ||v||_p`` at the rows of ``diff``.

    Rows with ``dist == 0`` get the zero vector.
    """
    out = np.zeros_like(diff)
    nz = dist > 0
    if not np.any(nz):
        return out
    v = diff[nz]
    r = dist[nz][:, None]
    if p == 2.0:
        out[nz] = v / r
    elif p == 1.0:
        out[nz] = np.sign(v)
    elif math.isinf(p):
        a = np.abs(v)
        k = np.argmax(a, axis=1)
        rows = np.arange(v.shape[0])
        g = np.zeros_like(v)
        g[rows, k] = np.sign(v[rows, k])
        out[nz] = g
    else:
        out[nz] = np.sign(v) * (np.abs(v) / r) ** (p - 1.0)
    return out


def value_and_subgradient(y, samples, weights, lam, p=2.0):
    """Objective value and one subgradient; no input validation (hot path)."""
    diff = y[None, :] - samples.points
    if p == 2.0:
        dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    else:
        dist = pairwise_norms(y, samples.points, p)
    costs = weights * np.add.reduceat(dist, samples.offsets) / samples.sizes
    order = sort_order(costs)
    value = float(lam @ costs[order])
    rank_weight = np.empty_like(lam)
    rank_weight[order] = lam
    coef = rank_weight * weights / samples.sizes
    point_coef = np.repeat(coef, samples.sizes)
    if p == 2.0:
        safe = np.where(dist > 0, dist, 1.0)
        scale = np.where(dist > 0, point_coef / safe, 0.0)
        grad = scale @ diff
    else:
        grad = point_coef @ norm_subgradient(diff, dist, p)
    return value, grad, costs


def objective_subgradient(y, samples, weights, lam, norm=2.0):
    """A subgradient of :func:`empirical_objective` at ``y``.

    Each group contributes its rank weight times ``w_i / m_i`` times the sum
    of unit vectors ``(y - x) / ||y - x||``; a sample point coinciding with
    ``y`` contributes zero. Ranks come from a stable non-increasing sort of
    the group costs.

    Raises
    ------
    UnsupportedModeError
        If ``lam`` is not in convex mode.
    """
    y, samples, weights, lam = _check_problem(y, samples, weights, lam)
    require_convex(lam)
    p = check_norm(norm)
    return value_and_subgradient(y, samples, weights, lam, p)[1]
