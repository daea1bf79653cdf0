"""Command line interface: ``owp generate|solve|bench|bounds|report``."""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import bench, bounds, instances, saa
from .exceptions import ConfigurationError, OWPError
from .ordered import LAMBDA_PRESETS, resolve_lambda
from .samples import GroupedSample
from .solver import export_conic


def _csv_list(text, cast=str):
    return [cast(v.strip()) for v in text.split(",") if v.strip()]


def load_params(path):
    """SAA parameters from a JSON file.

    Besides the :class:`~owp.saa.SaaParams` fields the file may carry
    ``discrete_cap`` (total point budget for the discrete approach).
    """
    if path is None:
        return saa.SaaParams(), {}
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: expected a JSON object")
    extras = {k: data.pop(k) for k in ("discrete_cap",) if k in data}
    return saa.SaaParams.from_dict(data), extras


def _instance_files(directory):
    files = sorted(f for f in os.listdir(directory) if f.endswith(".json"))
    if not files:
        raise ConfigurationError(f"no instance files (*.json) in {directory}")
    return [os.path.join(directory, f) for f in files]


def cmd_generate(args):
    kinds = tuple(_csv_list(args.kinds)) if args.kinds else instances.RECIPE_KINDS
    inst = instances.generate(args.n, args.d, args.seed, args.mode, kinds=kinds,
                              lambda_preset=args.lam)
    if args.out in (None, "-"):
        sys.stdout.write(instances.dumps(inst))
    else:
        instances.save_instance(inst, args.out)
        print(args.out)


def cmd_solve(args):
    inst = instances.load_instance(args.instance)
    params, extras = load_params(args.params)
    lam = args.lam or inst.lambda_preset
    validation = saa.draw_validation(inst, params.n_validation, args.seed)
    if args.approach == "saa":
        res, full = bench.run_saa(inst, validation, params, args.seed, lam, return_full=True)
        if args.trace:
            saa.write_trace_csv(full, args.trace)
    elif args.approach == "discrete":
        res = bench.run_discrete(inst, validation, args.seed, lam, params.solver,
                                 cap=extras.get("discrete_cap", 1_000_000))
    else:
        res = bench.run_centers(inst, validation, lam, params.solver, args.seed)
    if args.conic:
        centers = GroupedSample(inst.centers, np.ones(inst.n, dtype=np.int64))
        with open(args.conic, "w") as fh:
            fh.write(export_conic(centers, inst.weights, resolve_lambda(lam, inst.n)).to_text())
    bench.write_results_csv([res], sys.stdout)


def cmd_bench(args):
    params, extras = load_params(args.params)
    insts = [instances.load_instance(p) for p in _instance_files(args.instances)]
    lambdas = _csv_list(args.lambdas) if args.lambdas else None
    seeds = _csv_list(args.seeds, int)
    approaches = tuple(_csv_list(args.approaches))
    results = bench.run_bench(insts, lambdas, seeds, params, approaches,
                              discrete_cap=extras.get("discrete_cap", 1_000_000))
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "results.csv")
    bench.write_results_csv(results, path)
    rep = bench.report(results, keys=bench.GROUP_KEYS)
    with open(os.path.join(args.out, "summary.txt"), "w") as fh:
        fh.write(rep["text"])
    print(path)


def cmd_bounds(args):
    inst = instances.load_instance(args.instance)
    rep = bounds.bound_report(inst, eps=args.eps, lam=args.lam)
    print(rep.to_text())
    if args.csv:
        header, rows = rep.to_csv_rows()
        with open(args.csv, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(header)
            wr.writerows(rows)


def cmd_report(args):
    results = bench.read_results_csv(args.results)
    keys = tuple(_csv_list(args.by))
    rep = bench.report(results, keys=keys, out_dir=args.out)
    print(rep["text"], end="")


def build_parser():
    p = argparse.ArgumentParser(prog="owp", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a synthetic instance")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--d", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--mode", choices=("sym", "asym", "mixed"), default="sym")
    g.add_argument("--kinds", help="comma separated demand kinds (default ball,shell,gaussian)")
    g.add_argument("--lambda", dest="lam", default="median", choices=sorted(LAMBDA_PRESETS))
    g.add_argument("--out", help="output file (stdout when omitted)")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="solve one instance with one approach")
    s.add_argument("--instance", required=True)
    s.add_argument("--approach", choices=bench.APPROACHES, default="saa")
    s.add_argument("--lambda", dest="lam", choices=sorted(LAMBDA_PRESETS))
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--params", help="JSON file with SAA parameters")
    s.add_argument("--trace", help="write the SAA iteration trace to this CSV")
    s.add_argument("--conic", help="write the conic form of the centers problem")
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="run all approaches over a directory of instances")
    b.add_argument("--instances", required=True)
    b.add_argument("--lambdas", help="comma separated presets (instance preset when omitted)")
    b.add_argument("--seeds", default="0")
    b.add_argument("--approaches", default=",".join(bench.APPROACHES))
    b.add_argument("--params", help="JSON file with SAA parameters")
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_bench)

    d = sub.add_parser("bounds", help="print hull radius and centers gap bound")
    d.add_argument("--instance", required=True)
    d.add_argument("--eps", type=float, default=0.05)
    d.add_argument("--lambda", dest="lam", choices=sorted(LAMBDA_PRESETS))
    d.add_argument("--csv", help="also write per-demand rows to this CSV")
    d.set_defaults(func=cmd_bounds)

    r = sub.add_parser("report", help="summary tables from a results CSV")
    r.add_argument("--results", required=True)
    r.add_argument("--by", default=",".join(bench.GROUP_KEYS))
    r.add_argument("--out", help="directory for summary_<key>.csv files")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (OWPError, OSError) as exc:
        print(f"owp: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
