"""Benchmark harness: run the three approaches and summarise their runtimes."""

from __future__ import annotations

import csv
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import distributions as dist
from . import saa
from .exceptions import ConfigurationError, DomainError, ReportError
from .ordered import empirical_objective, resolve_lambda
from .rng import DISCRETE, STUDY, as_generator, make_rng
from .samples import GroupedSample
from .solver import solve

APPROACHES = ("saa", "discrete", "centers")
GROUP_KEYS = ("n", "lambda", "d", "mode")
SGM_SHIFT = 1e-3


@dataclass
class ApproachResult:
    """Outcome of one approach on one (instance, lambda, seed) cell."""

    approach: str
    instance_id: str
    n: int
    d: int
    mode: str
    lambda_preset: str
    seed: int
    y: np.ndarray
    rho: float
    halfwidth: float = math.nan
    cpu_time_s: float = 0.0
    deviation_pct: float = math.nan
    stop_reason: str = ""
    info: dict = field(default_factory=dict)

    @property
    def cell(self):
        return self.instance_id, self.lambda_preset, self.seed


def _base(approach, instance, lam_name, seed):
    return dict(approach=approach, instance_id=instance.id, n=instance.n, d=instance.d,
                mode=instance.mode, lambda_preset=lam_name, seed=int(seed))


def _lam_name(instance, lam):
    if lam is None:
        return instance.lambda_preset
    return lam if isinstance(lam, str) else "custom"


def _evaluate(y, validation, instance, lam):
    return float(empirical_objective(y, validation, instance.weights, lam)[0])


def run_centers(instance, validation, lam=None, opts=None, seed=0):
    """Deterministic surrogate: every demand collapsed to its center."""
    name = _lam_name(instance, lam)
    lam = resolve_lambda(name if lam is None else lam, instance.n)
    t0 = time.perf_counter()
    centers = GroupedSample(instance.centers, np.ones(instance.n, dtype=np.int64))
    out = solve(centers, instance.weights, lam, opts)
    elapsed = time.perf_counter() - t0
    return ApproachResult(**_base("centers", instance, name, seed), y=out.y,
                          rho=_evaluate(out.y, validation, instance, lam), cpu_time_s=elapsed,
                          stop_reason="converged" if out.converged else "max_iters")


def discrete_sizes(instance, per_unit=1e5, cap=1_000_000):
    """``ceil(per_unit * R_i)`` points per demand, scaled down to fit ``cap``.

    Returns
    -------
    sizes : ndarray of int
    downscaled : bool
    """
    cap = int(cap)
    if cap < instance.n:
        raise ConfigurationError(f"discrete budget {cap} is below one point per demand (n={instance.n})")
    R = np.array([dist.scale(s) for s in instance.distributions])
    sizes = np.maximum(1, np.ceil(per_unit * R)).astype(np.int64)
    if sizes.sum() <= cap:
        return sizes, False
    factor = cap / float(sizes.sum())
    return np.maximum(1, np.floor(sizes * factor)).astype(np.int64), True


def run_discrete(instance, validation, seed=0, lam=None, opts=None, per_unit=1e5, cap=1_000_000):
    """Single large fixed sample per demand, solved once."""
    name = _lam_name(instance, lam)
    lam = resolve_lambda(name if lam is None else lam, instance.n)
    sizes, downscaled = discrete_sizes(instance, per_unit, cap)
    t0 = time.perf_counter()
    groups = [dist.sample(spec, int(sizes[i]), make_rng(seed, DISCRETE, instance.id, i))
              for i, spec in enumerate(instance.distributions)]
    out = solve(GroupedSample.from_groups(groups), instance.weights, lam, opts)
    elapsed = time.perf_counter() - t0
    return ApproachResult(**_base("discrete", instance, name, seed), y=out.y,
                          rho=_evaluate(out.y, validation, instance, lam), cpu_time_s=elapsed,
                          stop_reason="converged" if out.converged else "max_iters",
                          info={"total_points": int(sizes.sum()), "cap": int(cap),
                                "downscaled": downscaled})


def run_saa(instance, validation, params=None, seed=0, lam=None, return_full=False):
    """Adaptive SAA evaluated on the shared validation sample.

    With ``return_full`` the underlying :class:`~owp.saa.SaaResult` is
    returned as a second value.
    """
    name = _lam_name(instance, lam)
    lam = resolve_lambda(name if lam is None else lam, instance.n)
    t0 = time.perf_counter()
    res = saa.run(instance, params, seed, lam=lam, validation=validation)
    elapsed = time.perf_counter() - t0
    out = ApproachResult(**_base("saa", instance, name, seed), y=res.y, rho=res.rho_val,
                         halfwidth=res.halfwidth, cpu_time_s=elapsed, deviation_pct=0.0,
                         stop_reason=res.stop_reason,
                         info={"total_samples": res.total_samples, "iterations": len(res.trace),
                               "n_bootstrap": res.n_bootstrap, "alpha": res.alpha})
    return (out, res) if return_full else out


def set_deviations(results):
    """Fill ``deviation_pct = 100 (rho - rho_saa) / rho_saa`` within each cell."""
    baseline = {r.cell: r.rho for r in results if r.approach == "saa"}
    for r in results:
        if r.cell not in baseline:
            raise ReportError(f"no saa baseline for instance {r.instance_id!r}, "
                              f"lambda {r.lambda_preset!r}, seed {r.seed}")
        base = baseline[r.cell]
        if r.approach == "saa":
            r.deviation_pct = 0.0
        elif base == 0:
            r.deviation_pct = 0.0 if r.rho == 0 else math.inf
        else:
            r.deviation_pct = 100.0 * (r.rho - base) / base
    return results


def evaluate_instance(instance, lam=None, seed=0, params=None, approaches=APPROACHES,
                      opts=None, discrete_cap=1_000_000):
    """Run ``approaches`` on one instance against one common validation sample."""
    params = params or saa.SaaParams()
    unknown = set(approaches) - set(APPROACHES)
    if unknown:
        raise ConfigurationError(f"unknown approaches: {sorted(unknown)}")
    if "saa" not in approaches:
        raise ConfigurationError("the saa approach is required as the deviation baseline")
    opts = opts or params.solver
    validation = saa.draw_validation(instance, params.n_validation, seed)
    out = []
    for a in APPROACHES:
        if a not in approaches:
            continue
        if a == "saa":
            out.append(run_saa(instance, validation, params, seed, lam))
        elif a == "discrete":
            out.append(run_discrete(instance, validation, seed, lam, opts, cap=discrete_cap))
        else:
            out.append(run_centers(instance, validation, lam, opts, seed))
    return set_deviations(out)


def thread_count(default=None):
    """Worker count, capped by the ``OWP_THREADS`` environment variable."""
    n = default or os.cpu_count() or 1
    env = os.environ.get("OWP_THREADS")
    if env:
        try:
            cap = int(env)
        except ValueError:
            raise ConfigurationError(f"OWP_THREADS must be an integer, got {env!r}") from None
        if cap < 1:
            raise ConfigurationError("OWP_THREADS must be >= 1")
        n = min(n, cap)
    return max(1, int(n))


def run_bench(instances, lambdas=None, seeds=(0,), params=None, approaches=APPROACHES,
              opts=None, discrete_cap=1_000_000, threads=None):
    """All approaches over the grid instances x lambdas x seeds.

    Cells are evaluated in parallel across instances; the result order is
    the grid order regardless of scheduling.
    """
    tasks = [(inst, lam, seed) for inst in instances
             for lam in (lambdas or [inst.lambda_preset]) for seed in seeds]
    workers = min(thread_count(threads), max(1, len(tasks)))

    def one(task):
        inst, lam, seed = task
        return evaluate_instance(inst, lam, seed, params, approaches, opts, discrete_cap)

    if workers == 1:
        chunks = [one(t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            chunks = list(ex.map(one, tasks))
    return [r for chunk in chunks for r in chunk]


def shifted_geometric_mean(times, s=SGM_SHIFT):
    """``exp(mean(log(t + s))) - s``."""
    t = np.asarray(times, dtype=float).ravel()
    if t.size == 0:
        raise DomainError("need at least one time")
    if not s > 0:
        raise DomainError("shift must be positive")
    if np.any(t < 0) or not np.all(np.isfinite(t)):
        raise DomainError("times must be finite and nonnegative")
    if t.min() == t.max():
        return float(t[0])
    return float(np.exp(np.mean(np.log(t + s))) - s)


def gm_ratio_ci(pairs, s=SGM_SHIFT, B=2000, alpha=0.05, rng=None):
    """Geometric mean of shifted ratios ``(t_a + s) / (t_b + s)`` with a bootstrap CI.

    Pairs are resampled with replacement; the interval is given by the
    ``alpha/2`` and ``1 - alpha/2`` quantiles of the replicate ratios.

    Returns
    -------
    ratio : float
    ci : tuple of float
    """
    pairs = np.asarray(pairs, dtype=float)
    if pairs.ndim != 2 or pairs.shape[1] != 2 or pairs.shape[0] < 2:
        raise DomainError("need at least two (t_a, t_b) pairs")
    if np.any(pairs < 0) or not np.all(np.isfinite(pairs)):
        raise DomainError("times must be finite and nonnegative")
    logs = np.log(pairs[:, 0] + s) - np.log(pairs[:, 1] + s)
    ratio = float(np.exp(logs.mean()))
    if logs.min() == logs.max():
        return ratio, (ratio, ratio)
    rng = as_generator(rng)
    idx = rng.integers(0, logs.size, size=(int(B), logs.size))
    reps = logs[idx].mean(axis=1)
    lo, hi = np.quantile(reps, [alpha / 2, 1 - alpha / 2], method="linear")
    lo, hi = float(np.exp(lo)), float(np.exp(hi))
    return ratio, (min(lo, ratio), max(hi, ratio))


@dataclass
class SgmSummary:
    key: str
    value: object
    sgm: dict
    count: int
    ratio: float
    ci: tuple
    speedup_pct: float

    def row(self, approaches):
        return ([self.key, self.value, self.count] + [self.sgm.get(a, math.nan) for a in approaches]
                + [self.ratio, self.ci[0], self.ci[1], self.speedup_pct])


def _key(r, key):
    return {"n": r.n, "lambda": r.lambda_preset, "d": r.d, "mode": r.mode}[key]


def summarize(results, key, s=SGM_SHIFT, B=2000, alpha=0.05, seed=0, target="discrete"):
    """Per-group SGM of runtimes and the ``saa/target`` GM ratio."""
    if key not in GROUP_KEYS:
        raise ReportError(f"unknown group key {key!r}; choose from {GROUP_KEYS}")
    if not results:
        raise ReportError("no results to summarise")
    set_deviations(results)
    groups = {}
    for r in results:
        groups.setdefault(_key(r, key), []).append(r)
    out = []
    for gi, value in enumerate(sorted(groups, key=lambda v: (str(type(v)), v))):
        rows = groups[value]
        sgm = {}
        for a in APPROACHES:
            ts = [r.cpu_time_s for r in rows if r.approach == a]
            if ts:
                sgm[a] = shifted_geometric_mean(ts, s)
        times = {}
        for r in rows:
            times.setdefault(r.cell, {})[r.approach] = r.cpu_time_s
        pairs = [(c["saa"], c[target]) for c in times.values() if "saa" in c and target in c]
        if len(pairs) >= 2:
            ratio, ci = gm_ratio_ci(pairs, s, B, alpha, make_rng(seed, STUDY, key, gi))
        elif len(pairs) == 1:
            ratio = float((pairs[0][0] + s) / (pairs[0][1] + s))
            ci = (math.nan, math.nan)
        else:
            ratio, ci = math.nan, (math.nan, math.nan)
        out.append(SgmSummary(key, value, sgm, len(times), ratio, ci, 100.0 * (1.0 - ratio)))
    return out


def _fmt(v):
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


RESULT_COLUMNS = ("instance_id", "n", "d", "mode", "lambda", "approach", "seed")


def write_results_csv(results, path):
    """Results table; ``y`` is spread over ``y1..yD`` with ``D`` the largest dimension.

    ``path`` may also be an open text file.
    """
    if hasattr(path, "write"):
        _write_results(results, path)
    else:
        with open(path, "w", newline="") as fh:
            _write_results(results, fh)


def _write_results(results, fh):
    dmax = max(r.d for r in results)
    header = list(RESULT_COLUMNS) + [f"y{j + 1}" for j in range(dmax)] + [
        "rho", "halfwidth", "cpu_time_s", "deviation_pct", "stop_reason"]
    wr = csv.writer(fh, lineterminator="\n")
    wr.writerow(header)
    for r in results:
        ys = [repr(float(v)) for v in r.y] + [""] * (dmax - r.d)
        wr.writerow([r.instance_id, r.n, r.d, r.mode, r.lambda_preset, r.approach, r.seed]
                    + ys + [_fmt(float(r.rho)), _fmt(float(r.halfwidth)),
                            f"{r.cpu_time_s:.6f}", _fmt(float(r.deviation_pct)), r.stop_reason])


def read_results_csv(path):
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            ys = [float(row[k]) for k in sorted((k for k in row if k.startswith("y") and k[1:].isdigit()),
                                               key=lambda k: int(k[1:])) if row[k] != ""]

            def num(k):
                return math.nan if row[k] == "" else float(row[k])

            out.append(ApproachResult(
                approach=row["approach"], instance_id=row["instance_id"], n=int(row["n"]),
                d=int(row["d"]), mode=row["mode"], lambda_preset=row["lambda"], seed=int(row["seed"]),
                y=np.array(ys), rho=num("rho"), halfwidth=num("halfwidth"),
                cpu_time_s=num("cpu_time_s"), deviation_pct=num("deviation_pct"),
                stop_reason=row["stop_reason"]))
    return out


def format_table(header, rows):
    cells = [[str(h) for h in header]] + [
        [f"{v:.4g}" if isinstance(v, float) else str(v) for v in row] for row in rows]
    widths = [max(len(r[j]) for r in cells) for j in range(len(header))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


SUMMARY_HEADER = (["group", "value", "cells"] + [f"sgm_{a}" for a in APPROACHES]
                  + ["gm_ratio", "ci_low", "ci_high", "speedup_pct"])


def report(results, keys=GROUP_KEYS, out_dir=None, **kw):
    """Summary tables per group key, optionally written as ``summary_<key>.csv``.

    Returns
    -------
    dict
        Group key -> list of SgmSummary, plus ``"text"`` with aligned tables.
    """
    if not results:
        raise ReportError("no results to report")
    set_deviations(results)
    tables = {k: summarize(results, k, **kw) for k in keys}
    dev_rows = [[r.instance_id, r.lambda_preset, r.seed, r.approach, r.rho, r.deviation_pct]
                for r in results]
    parts = [format_table(["instance", "lambda", "seed", "approach", "rho", "dev_pct"], dev_rows)]
    for k, rows in tables.items():
        parts.append(f"by {k}\n" + format_table(SUMMARY_HEADER, [s.row(APPROACHES) for s in rows]))
    text = "\n\n".join(parts) + "\n"
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        for k, rows in tables.items():
            with open(os.path.join(out_dir, f"summary_{k}.csv"), "w", newline="") as fh:
                wr = csv.writer(fh, lineterminator="\n")
                wr.writerow(SUMMARY_HEADER)
                for s in rows:
                    wr.writerow([_fmt(v) if isinstance(v, float) else v for v in s.row(APPROACHES)])
        with open(os.path.join(out_dir, "summary.txt"), "w") as fh:
            fh.write(text)
    return {**tables, "text": text}
