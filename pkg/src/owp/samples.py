"""Grouped finite point collections."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._validation import check_points
from .exceptions import DimensionError, DomainError


@dataclass(frozen=True, eq=False)
class GroupedSample:
    """Per-demand point sets stored as one contiguous array.

    Parameters
    ----------
    points : ndarray of shape (n_points, d)
        All sample points, group after group.
    sizes : ndarray of shape (n_groups,)
        Number of points in each group; every entry is at least 1.
    """

    points: np.ndarray
    sizes: np.ndarray
    offsets: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        points = check_points(self.points, name="points")
        sizes = np.asarray(self.sizes, dtype=np.int64).reshape(-1)
        if sizes.size == 0:
            raise DomainError("a grouped sample needs at least one group")
        if np.any(sizes < 1):
            raise DomainError("every group must contain at least one point")
        if int(sizes.sum()) != points.shape[0]:
            raise DimensionError(
                f"group sizes sum to {int(sizes.sum())} but {points.shape[0]} points were given")
        points.setflags(write=False)
        sizes.setflags(write=False)
        offsets = np.concatenate(([0], np.cumsum(sizes)[:-1]))
        offsets.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "offsets", offsets)

    @classmethod
    def from_groups(cls, groups):
        """Build from a sequence of ``(m_i, d)`` arrays."""
        groups = [np.atleast_2d(np.asarray(g, dtype=np.float64)) for g in groups]
        if not groups:
            raise DomainError("a grouped sample needs at least one group")
        dims = {g.shape[1] for g in groups}
        if len(dims) != 1:
            raise DimensionError(f"groups have inconsistent dimensions {sorted(dims)}")
        for i, g in enumerate(groups):
            if g.shape[0] == 0:
                raise DomainError(f"group {i} is empty")
        return cls(np.vstack(groups), np.array([g.shape[0] for g in groups]))

    @classmethod
    def from_labels(cls, X, labels):
        """Build from stacked points and integer group labels ``0..n-1``."""
        X = check_points(X)
        labels = np.asarray(labels).reshape(-1)
        if labels.shape[0] != X.shape[0]:
            raise DimensionError("labels and X have different lengths")
        uniq, inverse = np.unique(labels, return_inverse=True)
        order = np.argsort(inverse, kind="stable")
        sizes = np.bincount(inverse, minlength=uniq.size)
        return cls(X[order], sizes)

    @property
    def n_groups(self):
        return int(self.sizes.shape[0])

    @property
    def dim(self):
        return int(self.points.shape[1])

    @property
    def n_points(self):
        return int(self.points.shape[0])

    def group(self, i):
        start = int(self.offsets[i])
        return self.points[start:start + int(self.sizes[i])]

    def groups(self):
        return [self.group(i) for i in range(self.n_groups)]

    def group_index(self):
        """Group label of every stored point."""
        return np.repeat(np.arange(self.n_groups), self.sizes)

    def bounding_box(self):
        return self.points.min(axis=0), self.points.max(axis=0)

    def flat_mean(self, weights=None):
        """Mean of all points, each group's points weighted by ``weights[i] / m_i``."""
        if weights is None:
            return self.points.mean(axis=0)
        w = np.repeat(np.asarray(weights, dtype=np.float64) / self.sizes, self.sizes)
        total = w.sum()
        if total <= 0:
            return self.points.mean(axis=0)
        return w @ self.points / total
