"""Solvers for the finite-sample ordered Weber problem.

``solve`` minimizes ``y -> O_lam(w_i / m_i * sum_j ||y - x_ij||_p)`` over a
box that contains the convex hull of the data inflated by its diameter. The
default ``level`` rule is a level bundle method: a cutting-plane model gives
a certified lower bound (LP), and each step projects the best point onto the
level set ``{model <= f_low + kappa * (f_up - f_low)}``. The projections are
least-distance programs solved through NNLS. The ``polyak`` and
``diminishing`` rules are classical projected subgradient iterations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog, lsq_linear, nnls

from ._validation import check_norm, check_point, check_vector
from .exceptions import DomainError, ResourceError
from .ordered import (
    group_costs,
    pairwise_norms,
    require_convex,
    resolve_lambda,
    sort_order,
    value_and_subgradient,
)
from .samples import GroupedSample

STEP_RULES = ("level", "polyak", "diminishing")


@dataclass
class SolveOptions:
    """Stopping and step configuration for :func:`solve`.

    ``tol`` is relative: the level rule stops once the certified gap is below
    ``tol * max(1, f_best)``; the subgradient rules stop when the running best
    improves by less than ``tol`` (relative) over ``patience`` iterations.
    """

    tol: float = 1e-7
    max_iters: int = 5000
    step_rule: str = "level"
    norm: float = 2.0
    level_fraction: float = 0.3
    max_cuts: int = 150
    patience: int = 50
    step_scale: float = 1.0

    def __post_init__(self):
        if not self.tol > 0:
            raise DomainError("tol must be positive")
        if int(self.max_iters) < 1:
            raise DomainError("max_iters must be at least 1")
        if self.step_rule not in STEP_RULES:
            raise DomainError(f"step_rule must be one of {STEP_RULES}")
        if not 0 < self.level_fraction < 1:
            raise DomainError("level_fraction must lie in (0, 1)")
        self.norm = check_norm(self.norm)
        self.max_iters = int(self.max_iters)


@dataclass
class SolveOutcome:
    y: np.ndarray
    value: float
    iterations: int
    converged: bool
    lower_bound: float = float("nan")
    best_history: list = field(default_factory=list, repr=False)


def _prepare(samples, weights, lam):
    if not isinstance(samples, GroupedSample):
        samples = GroupedSample.from_groups(samples)
    n = samples.n_groups
    weights = check_vector(weights, n=n, name="weights", nonnegative=True)
    lam = resolve_lambda(lam, n)
    require_convex(lam)
    return samples, weights, lam


def search_box(samples):
    """Bounding box of the data inflated by its diagonal (>= hull diameter)."""
    lo, hi = samples.bounding_box()
    diam = float(np.linalg.norm(hi - lo))
    return lo - diam, hi + diam


def solve(samples, weights, lam, opts=None, y0=None, box=None):
    """Minimize the empirical ordered Weber objective.

    Parameters
    ----------
    samples : GroupedSample or sequence of (m_i, d) arrays
    weights : array-like of shape (n,)
    lam : str or array-like of shape (n,)
        Convex-mode ordered weights or a preset name.
    opts : SolveOptions, optional
    y0 : array-like of shape (d,), optional
        Starting point (warm start). Defaults to the weighted mean of the
        sample points.
    box : tuple of arrays, optional
        ``(lo, hi)`` feasible box; defaults to :func:`search_box`.

    Returns
    -------
    SolveOutcome
    """
    opts = opts or SolveOptions()
    samples, weights, lam = _prepare(samples, weights, lam)
    lo, hi = box if box is not None else search_box(samples)
    lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    if y0 is None:
        y0 = samples.flat_mean(weights)
    y0 = np.clip(check_point(y0, dim=samples.dim), lo, hi)
    p = opts.norm
    if np.all(hi - lo == 0):
        value = float(value_and_subgradient(lo, samples, weights, lam, p)[0])
        return SolveOutcome(lo.copy(), value, 0, True, value, [value])
    if opts.step_rule == "level":
        return _level_bundle(samples, weights, lam, p, y0, lo, hi, opts)
    return _subgradient(samples, weights, lam, p, y0, lo, hi, opts)


def _least_distance(A, b):
    """Minimum-norm ``z`` with ``A z <= b`` (Lawson-Hanson LDP via NNLS).

    Returns None when the system is infeasible. The NNLS answer is checked
    against the constraints; on ill-conditioned systems it is recomputed
    with bounded-variable least squares.
    """
    # rows normalized for conditioning; the feasible set is unchanged
    nrm = np.linalg.norm(A, axis=1)
    keep = nrm > 0
    if np.any(~keep & (b < 0)):
        return None
    A, b, nrm = A[keep], b[keep], nrm[keep]
    if np.all(b >= 0):
        return np.zeros(A.shape[1])
    G = -A / nrm[:, None]
    h = -b / nrm
    E = np.vstack([G.T, h[None, :]])
    f = np.zeros(E.shape[0])
    f[-1] = 1.0
    atol = 1e-10 * (1.0 + float(np.max(np.abs(h))))

    def recover(mu):
        r = E @ mu - f
        if abs(r[-1]) < 1e-14:
            return None
        z = -r[:-1] / r[-1]
        return z if np.max(h - G @ z) <= atol else None

    z = recover(nnls(E, f, maxiter=50 * E.shape[1])[0])
    if z is None:
        z = recover(lsq_linear(E, f, bounds=(0, np.inf), method="bvls", tol=1e-14).x)
    return z


def _level_bundle(samples, weights, lam, p, y0, lo, hi, opts):
    d = samples.dim
    L = float(np.max(hi - lo))
    y = y0.copy()
    cut_pts, cut_vals, cut_grads = [], [], []
    f_best, y_best = math.inf, y.copy()
    f_low = 0.0
    history = []
    converged = False
    it = 0
    lp_tol = min(1e-7, max(1e-10, 0.1 * opts.tol))
    lp_opts = {"primal_feasibility_tolerance": lp_tol, "dual_feasibility_tolerance": lp_tol}
    for it in range(1, opts.max_iters + 1):
        f, g, _ = value_and_subgradient(y, samples, weights, lam, p)
        if f < f_best:
            f_best, y_best = f, y.copy()
        history.append(f_best)
        if not np.any(g):
            # zero subgradient: y is a global minimizer
            f_low = f_best = f
            y_best = y.copy()
            converged = True
            break
        cut_pts.append(y.copy())
        cut_vals.append(f)
        cut_grads.append(g)
        if len(cut_pts) > opts.max_cuts:
            drop = next(k for k in range(len(cut_pts)) if not np.array_equal(cut_pts[k], y_best))
            for lst in (cut_pts, cut_vals, cut_grads):
                del lst[drop]
        fs = max(f_best, 1e-300)
        P = np.asarray(cut_pts)
        Gm = np.asarray(cut_grads)
        # cut j at y_best + L*w:  (f_j + g_j.(y_best - x_j)) / fs + (L/fs) g_j . w
        c = (np.asarray(cut_vals) + np.einsum("ij,ij->i", Gm, y_best - P)) / fs
        A = Gm * (L / fs)
        wlo, whi = (lo - y_best) / L, (hi - y_best) / L
        lp = linprog(
            np.r_[np.zeros(d), 1.0],
            A_ub=np.hstack([A, -np.ones((A.shape[0], 1))]),
            b_ub=-c,
            bounds=[(a, b) for a, b in zip(wlo, whi)] + [(None, None)],
            method="highs",
            options=lp_opts,
        )
        if lp.status == 0:
            f_low = max(f_low, float(lp.fun) * fs)
        A_box = np.vstack([np.eye(d), -np.eye(d)])
        b_box = np.r_[whi, -wlo]
        w = None
        while True:
            gap = f_best - f_low
            if gap <= opts.tol * max(1.0, f_best):
                converged = True
                break
            level = (f_low + opts.level_fraction * gap) / fs
            w = _least_distance(np.vstack([A, A_box]), np.r_[level - c, b_box])
            if w is not None:
                break
            # empty level set: the cutting-plane model stays above the level
            f_low = level * fs
        if converged:
            break
        y_next = np.clip(y_best + L * w, lo, hi)
        if np.array_equal(y_next, y) or np.allclose(y_next, y, rtol=0, atol=1e-15 * L):
            converged = gap <= 10 * opts.tol * max(1.0, f_best)
            break
        y = y_next
    return SolveOutcome(y_best, float(f_best), it, converged, float(f_low), history)


def _subgradient(samples, weights, lam, p, y0, lo, hi, opts):
    y = y0.copy()
    f_best, y_best = math.inf, y.copy()
    y_avg = np.zeros_like(y)
    weight_sum = 0.0
    gap_est = None
    last_improve_value = math.inf
    stall = 0
    history = []
    converged = False
    it = 0
    for it in range(1, opts.max_iters + 1):
        f, g, _ = value_and_subgradient(y, samples, weights, lam, p)
        if f < f_best:
            f_best, y_best = f, y.copy()
        history.append(f_best)
        gn2 = float(g @ g)
        if gn2 == 0:
            converged = True
            break
        if gap_est is None:
            gap_est = f_best  # lower bound estimate starts at 0
        if opts.step_rule == "polyak":
            step = (f - (f_best - gap_est)) / gn2
        else:
            step = opts.step_scale * float(np.max(hi - lo)) / math.sqrt(it) / math.sqrt(gn2)
        y = np.clip(y - step * g, lo, hi)
        y_avg += step * y
        weight_sum += step
        if f_best < last_improve_value * (1 - opts.tol) or last_improve_value == math.inf:
            if last_improve_value - f_best > opts.tol * max(1.0, abs(f_best)) or last_improve_value == math.inf:
                last_improve_value = f_best
                stall = 0
        stall += 1
        if opts.step_rule == "polyak" and stall % 10 == 0:
            gap_est *= 0.5
        if stall >= opts.patience:
            converged = True
            break
    if weight_sum > 0:
        ya = y_avg / weight_sum
        fa = value_and_subgradient(ya, samples, weights, lam, p)[0]
        if fa < f_best:
            f_best, y_best = fa, ya
    return SolveOutcome(y_best, float(f_best), it, converged, float("nan"), history)


def brute_force_oracle(samples, weights, lam, box, resolution, norm=2.0):
    """Grid-search minimizer, refined once around the best node.

    Evaluates the objective on a ``resolution``-per-axis grid over ``box``;
    then on a grid with ten times finer spacing spanning the cells adjacent
    to the best node.

    Raises
    ------
    ResourceError
        If ``d > 3`` or ``resolution ** d > 1e7``.
    """
    if not isinstance(samples, GroupedSample):
        samples = GroupedSample.from_groups(samples)
    n = samples.n_groups
    weights = check_vector(weights, n=n, name="weights", nonnegative=True)
    lam = resolve_lambda(lam, n)
    d = samples.dim
    resolution = int(resolution)
    if d > 3 or resolution ** d > 10**7:
        raise ResourceError("grid oracle limited to d <= 3 and resolution**d <= 1e7")
    lo, hi = (np.asarray(b, dtype=float) for b in box)
    p = check_norm(norm)

    def grid_min(glo, ghi, res):
        axes = [np.linspace(a, b, res) for a, b in zip(glo, ghi)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
        vals = _grid_values(pts, samples, weights, lam, p)
        k = int(np.argmin(vals))
        return pts[k], float(vals[k])

    best, val = grid_min(lo, hi, resolution)
    h = (hi - lo) / max(resolution - 1, 1)
    best2, val2 = grid_min(best - h, best + h, 21)
    if val2 <= val:
        return best2, val2
    return best, val


def _grid_values(pts, samples, weights, lam, p, chunk=2_000_000):
    rows = max(1, chunk // samples.n_points)
    out = np.empty(pts.shape[0])
    for s in range(0, pts.shape[0], rows):
        block = pts[s:s + rows]
        diff = block[:, None, :] - samples.points[None, :, :]
        if p == 2.0:
            dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        else:
            dist = np.linalg.norm(diff, ord=p, axis=2)
        costs = weights * np.add.reduceat(dist, samples.offsets, axis=1) / samples.sizes
        out[s:s + rows] = np.sort(costs, axis=1)[:, ::-1] @ lam
    return out


@dataclass
class ConicForm:
    """Linear and cone rows of the ordered Weber conic program.

    Variables are ``y`` (free, dimension ``d``), ``u, v`` (nonnegative,
    length ``n``) and ``z`` (nonnegative, one per sample point). The program
    minimizes ``sum(u) + sum(v)`` subject to
    ``u_i + v_j >= lam_j * rate_i * sum_l z_il`` with ``rate_i = w_i / m_i``,
    and ``z_il >= ||y - x_il||_p``.
    """

    d: int
    n: int
    p: float
    lam: np.ndarray
    rate: np.ndarray
    points: GroupedSample

    @property
    def lin_coeff(self):
        return self.rate[:, None] * self.lam[None, :]

    @property
    def n_linear_rows(self):
        return self.n * self.n

    @property
    def n_cone_rows(self):
        return self.points.n_points

    @property
    def n_variables(self):
        return self.d + 2 * self.n + self.points.n_points

    def to_text(self):
        p = "inf" if math.isinf(self.p) else repr(self.p)
        coeff = self.lin_coeff
        lines = [f"conic v1 {self.d} {self.n} {p}"]
        for i in range(self.n):
            for j in range(self.n):
                lines.append(f"lin {i} {j} {float(coeff[i, j])!r}")
        for i in range(self.n):
            for l, x in enumerate(self.points.group(i)):
                lines.append(f"cone {i} {l} " + " ".join(repr(float(v)) for v in x))
        return "\n".join(lines) + "\n"

    def assignment(self, y):
        """Optimal ``(u, v, z)`` for a fixed location ``y``.

        With group costs ``a`` sorted non-increasingly and ``lam``
        non-increasing, ``u_(i) = sum_{k>=i} lam_k (a_k - a_{k+1})`` and
        ``v_j = sum_{k>=j} a_{k+1} (lam_k - lam_{k+1})`` are feasible and
        attain ``sum_i lam_i a_i``.
        """
        y = check_point(y, dim=self.d)
        z = pairwise_norms(y, self.points.points, self.p)
        costs = self.rate * np.add.reduceat(z, self.points.offsets)
        order = sort_order(costs)
        a = np.r_[costs[order], 0.0]
        b = np.r_[self.lam, 0.0]
        u_sorted = np.cumsum((b[:-1] * (a[:-1] - a[1:]))[::-1])[::-1]
        v = np.cumsum((a[1:] * (b[:-1] - b[1:]))[::-1])[::-1]
        u = np.empty(self.n)
        u[order] = u_sorted
        return u, v, z

    def objective_at(self, y):
        u, v, _ = self.assignment(y)
        return float(u.sum() + v.sum())

    def is_feasible(self, y, u, v, z, atol=1e-9):
        y = check_point(y, dim=self.d)
        if np.any(u < -atol) or np.any(v < -atol):
            return False
        if np.any(z < pairwise_norms(y, self.points.points, self.p) - atol):
            return False
        sums = np.add.reduceat(z, self.points.offsets)
        lhs = u[:, None] + v[None, :]
        return bool(np.all(lhs >= self.lin_coeff * sums[:, None] - atol))


def export_conic(samples, weights, lam, p=2.0):
    """Build the conic reformulation of the finite-sample problem.

    Raises
    ------
    DomainError
        If ``p < 1``.
    UnsupportedModeError
        If ``lam`` is not in convex mode.
    """
    p = check_norm(p)
    samples, weights, lam = _prepare(samples, weights, lam)
    return ConicForm(samples.dim, samples.n_groups, p, lam, weights / samples.sizes, samples)


def objective_value(y, samples, weights, lam, p=2.0):
    """Ordered objective at ``y``; ``lam`` may be a preset name."""
    samples, weights, lam = _prepare(samples, weights, lam)
    costs = group_costs(check_point(y, dim=samples.dim), samples, weights, p)
    return float(lam @ costs[sort_order(costs)])
