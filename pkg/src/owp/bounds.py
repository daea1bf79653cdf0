"""Analytical guarantees: hull proximity, hull distances and the centers gap bound."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import distributions as dist
from ._validation import check_point, check_points
from .exceptions import DomainError, UnsupportedModeError
from .ordered import ordered_weighted_sum, require_convex, resolve_lambda


@dataclass
class HullWitness:
    """Nearest point of ``conv(points)`` to ``y``.

    ``coefficients`` are convex weights on ``points[indices]`` whose
    combination is ``nearest``; ``lower_bound`` is a certified lower bound on
    the distance.
    """

    y: np.ndarray
    distance: float
    nearest: np.ndarray
    indices: np.ndarray
    coefficients: np.ndarray
    vertices: np.ndarray
    lower_bound: float = 0.0
    iterations: int = 0


def eps_hull_radius(diameter, eps_bar):
    """Distance bound ``eps_bar / (1 - 2 eps_bar) * diameter`` for minimizers.

    Raises
    ------
    DomainError
        If ``eps_bar`` is outside ``[0, 1/2)`` or ``diameter < 0``.
    """
    diameter, eps_bar = float(diameter), float(eps_bar)
    if not 0 <= eps_bar < 0.5:
        raise DomainError("eps_bar must satisfy 0 <= eps_bar < 1/2")
    if diameter < 0 or not math.isfinite(diameter):
        raise DomainError("diameter must be finite and nonnegative")
    return eps_bar * diameter / (1.0 - 2.0 * eps_bar)


def _affine_minimizer(Q):
    """Coefficients ``a`` (sum 1) minimizing ``||Q a||`` over the affine hull of Q's columns."""
    k = Q.shape[1]
    M = np.zeros((k + 1, k + 1))
    M[:k, :k] = Q.T @ Q
    M[:k, k] = 1.0
    M[k, :k] = 1.0
    rhs = np.zeros(k + 1)
    rhs[k] = 1.0
    sol = np.linalg.lstsq(M, rhs, rcond=None)[0]
    return sol[:k]


def hull_distance(y, points, tol=1e-12, max_iter=10_000):
    """Euclidean distance from ``y`` to the convex hull of ``points``.

    Wolfe's minimum-norm-point algorithm applied to ``points - y``. Stops when
    the certified gap ``||x|| - min_p <x, p> / ||x||`` falls below
    ``tol * scale``.
    """
    P = check_points(points, name="points")
    y = check_point(y, dim=P.shape[1])
    V = P - y
    scale = float(np.max(np.abs(V)))
    if scale == 0:
        return HullWitness(y, 0.0, y.copy(), np.array([0]), np.array([1.0]), P[:1], 0.0, 0)
    V = V / scale
    sq = np.einsum("ij,ij->i", V, V)
    start = int(np.argmin(sq))
    S = [start]
    lam = np.array([1.0])
    x = V[start].copy()
    lower = 0.0
    it = 0
    eps = 1e-14
    for it in range(1, max_iter + 1):
        xx = float(x @ x)
        if xx <= (1e-3 * tol) ** 2:
            break
        dots = V @ x
        j = int(np.argmin(dots))
        nx = math.sqrt(xx)
        lower = max(lower, float(dots[j]) / nx)
        if nx - max(lower, 0.0) <= tol or xx - dots[j] <= tol * tol:
            break
        if j in S:
            break
        S.append(j)
        lam = np.append(lam, 0.0)
        while True:
            Q = V[S].T
            alpha = _affine_minimizer(Q)
            if np.all(alpha > eps):
                lam = alpha
                break
            mask = alpha <= eps
            denom = lam[mask] - alpha[mask]
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = np.where(denom > 0, lam[mask] / denom, np.inf)
            theta = min(1.0, float(np.min(ratios))) if ratios.size else 1.0
            lam = theta * alpha + (1 - theta) * lam
            keep = lam > eps
            if not np.any(keep):
                keep[int(np.argmax(lam))] = True
            S = [s for s, k in zip(S, keep) if k]
            lam = lam[keep]
            lam = lam / lam.sum()
            if len(S) == 1:
                break
        x = V[S].T @ lam
    idx = np.array(S)
    nearest = y + scale * x
    distance = float(np.linalg.norm(nearest - y))
    return HullWitness(y, distance, nearest, idx, lam.copy(), P[idx], max(0.0, lower) * scale, it)


def pairwise_diameter(points, chunk=4096):
    """Largest pairwise Euclidean distance (exact via the convex hull when possible)."""
    P = check_points(points, name="points")
    if P.shape[0] > 50 and P.shape[1] <= 3:
        try:
            from scipy.spatial import ConvexHull

            P = P[ConvexHull(P).vertices]
        except Exception:  # degenerate (flat) point sets
            pass
    best = 0.0
    for s in range(0, P.shape[0], chunk):
        blk = P[s:s + chunk]
        d2 = np.einsum("ijk,ijk->ij", blk[:, None] - P[None], blk[:, None] - P[None])
        best = max(best, float(np.sqrt(d2.max())))
    return best


@dataclass
class BoundReport:
    eps_bar: float
    diameter: float
    r_eps: float
    nu_lambda: float
    expected_center_distances: np.ndarray
    quantile_radii: np.ndarray = field(default=None)
    lambda_preset: str = ""

    def to_text(self):
        rows = [
            ("lambda", self.lambda_preset),
            ("eps_bar", f"{self.eps_bar:.6g}"),
            ("hull diameter", f"{self.diameter:.6f}"),
            ("r_eps", f"{self.r_eps:.6f}"),
            ("nu_lambda", "n/a (skewed demands)" if math.isnan(self.nu_lambda) else f"{self.nu_lambda:.6f}"),
        ]
        width = max(len(k) for k, _ in rows)
        lines = [f"{k:<{width}}  {v}" for k, v in rows]
        lines.append("")
        lines.append(f"{'demand':>6}  {'E||y*-X||':>12}  {'K_i radius':>12}")
        for i, (e, q) in enumerate(zip(self.expected_center_distances, self.quantile_radii)):
            es = "n/a" if math.isnan(e) else f"{e:.6f}"
            lines.append(f"{i:>6}  {es:>12}  {q:>12.6f}")
        return "\n".join(lines)

    def to_csv_rows(self):
        header = ["demand", "expected_center_distance", "quantile_radius"]
        rows = [[i, e, q] for i, (e, q) in
                enumerate(zip(self.expected_center_distances, self.quantile_radii))]
        return header, rows


def nu_lambda(instance, lam=None):
    """Gap bound ``2 * O_lam(w_i * E||center_i - X_i||)`` between the stochastic
    optimum and the value of the centers solution.

    Raises
    ------
    UnsupportedModeError
        If any demand is skewed.
    """
    lam = resolve_lambda(instance.lambda_preset if lam is None else lam, instance.n)
    require_convex(lam)
    if not instance.symmetric:
        raise UnsupportedModeError("the centers gap bound needs spherically symmetric demands")
    e = np.array([dist.expected_center_distance(s) for s in instance.distributions])
    return 2.0 * ordered_weighted_sum(lam, instance.weights * e)


def quantile_balls(instance, eps=0.05):
    """Centers and radii of balls carrying at least ``1 - eps`` of each demand's mass."""
    eps = np.broadcast_to(np.asarray(eps, dtype=float), (instance.n,))
    radii = np.array([dist.radial_quantile(s, 1.0 - e) for s, e in zip(instance.distributions, eps)])
    return instance.centers, radii


def ball_union_diameter(centers, radii):
    c = np.asarray(centers, dtype=float)
    r = np.asarray(radii, dtype=float)
    dc = np.linalg.norm(c[:, None] - c[None], axis=2)
    return float(np.max(dc + r[:, None] + r[None, :]))


def ball_union_hull_distance(y, centers, radii, n_directions=720):
    """Distance from ``y`` to ``conv(union of balls)``.

    Uses the support function ``h(v) = max_i (<c_i, v> + r_i)`` over unit
    ``v``: the distance is ``max(0, max_v <v, y> - h(v))``. Exact search on a
    circle in 2-D (grid plus golden refinement); in higher dimensions each
    ball is replaced by an inscribed point cloud, which can only overestimate
    the distance.
    """
    c = np.asarray(centers, dtype=float)
    r = np.asarray(radii, dtype=float)
    y = check_point(y, dim=c.shape[1])
    if c.shape[1] == 2:
        def gap(theta):
            v = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
            return v @ y - np.max(v @ c.T + r, axis=-1)

        th = np.linspace(0, 2 * np.pi, n_directions, endpoint=False)
        vals = gap(th)
        k = int(np.argmax(vals))
        a, b = th[k] - 2 * np.pi / n_directions, th[k] + 2 * np.pi / n_directions
        phi = (math.sqrt(5) - 1) / 2
        for _ in range(80):
            x1, x2 = b - phi * (b - a), a + phi * (b - a)
            if gap(np.array([x1]))[0] < gap(np.array([x2]))[0]:
                a = x1
            else:
                b = x2
        return max(0.0, float(max(vals[k], gap(np.array([(a + b) / 2]))[0])))
    rng = np.random.default_rng(0)
    u = rng.standard_normal((n_directions * 4, c.shape[1]))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    cloud = (c[:, None, :] + r[:, None, None] * u[None]).reshape(-1, c.shape[1])
    return hull_distance(y, np.vstack([cloud, c])).distance


def bound_report(instance, eps=0.05, lam=None):
    """Hull-proximity radius and centers gap bound for ``instance``."""
    preset = instance.lambda_preset if lam is None else lam
    centers, qr = quantile_balls(instance, eps)
    finite = np.isfinite(qr)
    diameter = ball_union_diameter(centers, np.where(finite, qr, 0.0)) if np.all(finite) else math.inf
    eps_bar = float(np.max(np.broadcast_to(eps, (instance.n,))))
    r_eps = eps_hull_radius(diameter, eps_bar) if math.isfinite(diameter) else math.inf
    if instance.symmetric:
        e = np.array([dist.expected_center_distance(s) for s in instance.distributions])
        nu = nu_lambda(instance, preset)
    else:
        e = np.array([dist.expected_center_distance(s) if s.symmetric else math.nan
                      for s in instance.distributions])
        nu = math.nan
    return BoundReport(eps_bar, diameter, r_eps, nu, e, qr, preset if isinstance(preset, str) else "custom")


@dataclass
class GapCheck:
    value_saa: float
    value_centers: float
    gap: float
    nu_lambda: float
    slack: float
    passed: bool


def verify_gap_bound(instance, y_saa, y_centers, validation, halfwidth=None, lam=None,
                     n_bootstrap=200, alpha=0.05, rng=None):
    """Check ``|rho_val(y_saa) - rho_val(y_centers)| <= nu_lambda + 2 * halfwidth``.

    ``halfwidth`` defaults to the bootstrap halfwidth of ``y_saa`` on the
    validation sample.
    """
    from .saa import bootstrap_validate
    from .ordered import empirical_objective

    lam_vec = resolve_lambda(instance.lambda_preset if lam is None else lam, instance.n)
    nu = nu_lambda(instance, lam_vec)
    w = instance.weights
    v_saa = empirical_objective(y_saa, validation, w, lam_vec)[0]
    v_cen = empirical_objective(y_centers, validation, w, lam_vec)[0]
    if halfwidth is None:
        halfwidth = bootstrap_validate(y_saa, validation, w, lam_vec, n_bootstrap, alpha, rng).halfwidth
    slack = 2.0 * float(halfwidth)
    gap = abs(v_saa - v_cen)
    return GapCheck(v_saa, v_cen, gap, nu, slack, bool(gap <= nu + slack))
