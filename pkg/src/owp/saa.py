"""Adaptive sample average approximation with bootstrap validation."""

from __future__ import annotations

import csv
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import distributions as dist
from ._validation import check_point, check_vector
from .exceptions import DomainError
from .ordered import group_costs, pairwise_norms, require_convex, resolve_lambda, sort_order
from .rng import BOOTSTRAP, TRAIN, VALIDATION, as_generator, make_rng
from .samples import GroupedSample
from .solver import SolveOptions, solve

STOP_REASONS = ("stability", "k_max", "budget")


@dataclass
class SaaParams:
    """Configuration of the adaptive SAA loop.

    Initial sizes are ``max(min_initial, ceil(initial_factor * (R_i + w_i) / n))``
    with ``R_i`` the demand's length scale, unless ``initial_sizes`` is given.
    """

    growth: float = 2.0
    eps1: float = 1e-4
    eps2: float = 1e-4
    k_max: int = 50
    n_validation: int = 10_000
    n_bootstrap: int = 200
    alpha: float = 0.05
    n_max: int = 1_000_000
    initial_factor: float = 100.0
    min_initial: int = 5
    initial_sizes: tuple | None = None
    append: bool = False
    solver: SolveOptions = field(default_factory=SolveOptions)

    def __post_init__(self):
        if not self.growth > 1:
            raise DomainError("growth factor must exceed 1")
        if not (self.eps1 > 0 and self.eps2 > 0):
            raise DomainError("stability tolerances must be positive")
        if int(self.n_bootstrap) < 2:
            raise DomainError("need at least 2 bootstrap replicates")
        if not 0 < self.alpha < 1:
            raise DomainError("alpha must lie in (0, 1)")
        if int(self.k_max) < 0 or int(self.n_max) < 1 or int(self.n_validation) < 1:
            raise DomainError("k_max >= 0, n_max >= 1 and n_validation >= 1 are required")
        if isinstance(self.solver, dict):
            self.solver = SolveOptions(**self.solver)

    def to_dict(self):
        out = asdict(self)
        out["initial_sizes"] = None if self.initial_sizes is None else list(self.initial_sizes)
        return out

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise DomainError(f"unknown SAA parameters: {sorted(unknown)}")
        if data.get("initial_sizes") is not None:
            data["initial_sizes"] = tuple(int(v) for v in data["initial_sizes"])
        return cls(**data)


@dataclass
class BootstrapResult:
    estimate: float
    lower: float
    upper: float
    halfwidth: float
    replicates: np.ndarray = field(default=None, repr=False)

    @property
    def interval(self):
        return self.lower, self.upper


@dataclass
class IterationRecord:
    k: int
    sizes: np.ndarray
    y: np.ndarray
    rho_train: float
    rho_val: float
    halfwidth: float
    contributions: np.ndarray
    group_halfwidths: np.ndarray
    wall_time: float
    solver_iterations: int = 0


@dataclass
class SaaResult:
    y: np.ndarray
    rho: float
    rho_val: float
    interval: tuple
    halfwidth: float
    trace: list
    stop_reason: str
    n_bootstrap: int
    alpha: float

    @property
    def total_samples(self):
        return int(self.trace[-1].sizes.sum())


def _mean(values):
    # a constant sample must give an exactly constant mean
    if values.size and values.min() == values.max():
        return float(values[0])
    return float(values.mean())


def _bootstrap_means(values, B, rng, budget=4_000_000):
    """Means of ``B`` resamples (with replacement) of ``values``."""
    m = values.size
    if values.min() == values.max():
        return np.full(B, float(values[0]))
    out = np.empty(B)
    rows = max(1, budget // m)
    for s in range(0, B, rows):
        b = min(rows, B - s)
        if m * b <= budget:
            out[s:s + b] = values[rng.integers(0, m, size=(b, m))].mean(axis=1)
        else:
            for t in range(b):
                acc = 0.0
                for c in range(0, m, budget):
                    k = min(budget, m - c)
                    acc += values[rng.integers(0, m, size=k)].sum()
                out[s + t] = acc / m
    return out


def _interval(estimate, reps, alpha):
    lo, hi = np.quantile(reps, [alpha / 2, 1 - alpha / 2], method="linear")
    lo, hi = float(lo), float(hi)
    return BootstrapResult(estimate, lo, hi, max(estimate - lo, hi - estimate, 0.0), reps)


def bootstrap_validate(y, validation, weights, lam, B=200, alpha=0.05, rng=None, norm=2.0):
    """Bootstrap quantile interval of the ordered objective at ``y``.

    Each replicate resamples every validation group with replacement at its
    own size and evaluates the ordered objective of ``y``. Quantiles use
    linear interpolation between order statistics.

    Returns
    -------
    BootstrapResult
        Point estimate on the full validation sample, the interval
        ``[q_{alpha/2}, q_{1-alpha/2}]`` and the halfwidth
        ``max(estimate - q_lo, q_hi - estimate)``.
    """
    if not isinstance(validation, GroupedSample):
        validation = GroupedSample.from_groups(validation)
    B = int(B)
    if B < 2:
        raise DomainError("need at least 2 bootstrap replicates")
    if not 0 < alpha < 1:
        raise DomainError("alpha must lie in (0, 1)")
    n = validation.n_groups
    y = check_point(y, dim=validation.dim)
    weights = check_vector(weights, n=n, name="weights", nonnegative=True)
    lam = resolve_lambda(lam, n)
    rng = as_generator(rng)
    dist_all = pairwise_norms(y, validation.points, norm)
    full = np.empty(n)
    reps = np.empty((B, n))
    for i in range(n):
        s = int(validation.offsets[i])
        vals = dist_all[s:s + int(validation.sizes[i])]
        full[i] = weights[i] * _mean(vals)
        reps[:, i] = weights[i] * _bootstrap_means(vals, B, rng)
    estimate = float(lam @ full[sort_order(full)])
    rep_values = np.sort(reps, axis=1)[:, ::-1] @ lam
    return _interval(estimate, rep_values, alpha)


def per_group_halfwidth(y, group, B=200, alpha=0.05, rng=None, weight=1.0, norm=2.0):
    """Bootstrap halfwidth of ``weight * mean ||y - x||`` over one group."""
    group = np.atleast_2d(np.asarray(group, dtype=float))
    if group.shape[0] < 1:
        raise DomainError("group must be nonempty")
    y = check_point(y, dim=group.shape[1])
    vals = pairwise_norms(y, group, norm)
    est = weight * _mean(vals)
    reps = weight * _bootstrap_means(vals, int(B), as_generator(rng))
    return _interval(est, reps, alpha).halfwidth


def initial_sizes(instance, params):
    if params.initial_sizes is not None:
        sizes = np.asarray(params.initial_sizes, dtype=np.int64)
        if sizes.shape != (instance.n,) or np.any(sizes < 1):
            raise DomainError("initial_sizes must give one positive size per demand")
        return sizes
    R = np.array([dist.scale(s) for s in instance.distributions])
    raw = np.ceil(params.initial_factor * (R + instance.weights) / instance.n)
    return np.maximum(params.min_initial, raw).astype(np.int64)


def draw_validation(instance, size, seed):
    """Validation sample shared by every approach evaluated on ``instance``."""
    groups = [dist.sample(spec, size, make_rng(seed, VALIDATION, instance.id, i))
              for i, spec in enumerate(instance.distributions)]
    return GroupedSample.from_groups(groups)


def _draw_training(instance, sizes, seed, k, previous=None):
    groups = []
    for i, spec in enumerate(instance.distributions):
        if previous is None:
            groups.append(dist.sample(spec, int(sizes[i]), make_rng(seed, TRAIN, instance.id, i, k)))
        else:
            old = previous.group(i)
            extra = int(sizes[i]) - old.shape[0]
            if extra > 0:
                new = dist.sample(spec, extra, make_rng(seed, TRAIN, instance.id, i, k))
                old = np.vstack([old, new])
            groups.append(old)
    return GroupedSample.from_groups(groups)


def run(instance, params=None, seed=0, lam=None, validation=None):
    """Adaptive SAA for ``instance``.

    Every iteration draws fresh training samples (or extends the previous ones
    when ``params.append``), solves the finite problem warm-started at the
    previous location, bootstraps the validation objective and the per-group
    training contributions, and stops once every group is stable: the change
    of its contribution is at most ``eps1`` and its halfwidth at most
    ``eps2``. Unstable groups grow by the factor ``growth``. The loop also
    stops at ``k_max`` or when the next total size would exceed ``n_max``.

    Parameters
    ----------
    instance : Instance
    params : SaaParams, optional
    seed : int
    lam : str or array-like, optional
        Overrides ``instance.lambda_preset``.
    validation : GroupedSample, optional
        Pre-drawn validation sample; drawn from ``seed`` when omitted.

    Returns
    -------
    SaaResult
    """
    params = params or SaaParams()
    lam = resolve_lambda(instance.lambda_preset if lam is None else lam, instance.n)
    require_convex(lam)
    for i, spec in enumerate(instance.distributions):
        if not dist.moment_check(spec):
            raise DomainError(f"demand {i} has no finite first moment")
    w = instance.weights
    B, alpha = int(params.n_bootstrap), float(params.alpha)
    if validation is None:
        validation = draw_validation(instance, params.n_validation, seed)
    sizes = initial_sizes(instance, params)
    y_prev = GroupedSample(instance.centers, np.ones(instance.n, dtype=int)).flat_mean(
        w * 1.0) if w.sum() > 0 else instance.centers.mean(axis=0)
    prev_contrib = None
    training = None
    trace = []
    stop = "k_max"
    k = 0
    for k in range(int(params.k_max) + 1):
        t0 = time.perf_counter()
        training = _draw_training(instance, sizes, seed, k, training if params.append else None)
        out = solve(training, w, lam, params.solver, y0=y_prev)
        y = out.y
        boot = bootstrap_validate(y, validation, w, lam, B, alpha,
                                  make_rng(seed, BOOTSTRAP, instance.id, k, 0), params.solver.norm)
        contrib = group_costs(y, training, w, params.solver.norm)
        r = np.array([
            per_group_halfwidth(y, training.group(i), B, alpha,
                                make_rng(seed, BOOTSTRAP, instance.id, k, i + 1), w[i],
                                params.solver.norm)
            for i in range(instance.n)])
        trace.append(IterationRecord(k, sizes.copy(), y.copy(), out.value, boot.estimate,
                                     boot.halfwidth, contrib, r, time.perf_counter() - t0,
                                     out.iterations))
        change = np.zeros(instance.n) if prev_contrib is None else np.abs(contrib - prev_contrib)
        unstable = (change > params.eps1) | (r > params.eps2)
        if k > 0 and not np.any(unstable):
            stop = "stability"
            break
        if k == int(params.k_max):
            stop = "k_max"
            break
        grown = np.where(unstable, np.ceil(params.growth * sizes), sizes).astype(np.int64)
        if int(grown.sum()) > int(params.n_max):
            stop = "budget"
            break
        sizes, y_prev, prev_contrib = grown, y, contrib
    last = trace[-1]
    return SaaResult(
        y=last.y, rho=last.rho_train, rho_val=last.rho_val,
        interval=(last.rho_val - last.halfwidth, last.rho_val + last.halfwidth),
        halfwidth=last.halfwidth, trace=trace, stop_reason=stop, n_bootstrap=B, alpha=alpha)


def write_trace_csv(result, path):
    """One row per iteration with sizes, location, values and halfwidths."""
    d = result.y.shape[0]
    n = result.trace[0].sizes.shape[0]
    header = (["k", "wall_time_s", "solver_iterations", "rho_train", "rho_val", "halfwidth"]
              + [f"y{j + 1}" for j in range(d)] + [f"m{i + 1}" for i in range(n)]
              + [f"contrib{i + 1}" for i in range(n)] + [f"r{i + 1}" for i in range(n)])
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for rec in result.trace:
            wr.writerow([rec.k, f"{rec.wall_time:.6f}", rec.solver_iterations, repr(rec.rho_train),
                         repr(rec.rho_val), repr(rec.halfwidth)]
                        + [repr(float(v)) for v in rec.y] + [int(v) for v in rec.sizes]
                        + [repr(float(v)) for v in rec.contributions]
                        + [repr(float(v)) for v in rec.group_halfwidths])
