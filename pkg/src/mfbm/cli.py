"""Command-line interface.

Subcommands: validate, simulate, estimate, filters, mc-table, convergence,
highdim, sigma.  Report-style commands write delimited data files and render
companion PNG figures next to them (suppress with --no-figures).

Exit codes: 0 ok, 2 invalid parameters or configuration, 3 insufficient
data, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import struct
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotics import confidence_intervals, sigma_matrix
from .errors import (AdmissibilityError, DegenerateFilterError,
                     DimensionError, EstimationError, InsufficientDataError,
                     MfbmError, SynthesisError, UnsupportedCaseError)
from .estimation import EstimationConfig, estimate_all
from .filtering import BUILTIN_FILTERS, load_filter, make_filter
from .mc import (CONVERGENCE_HEADER, MC_TABLE_HEADER, SLOPES_HEADER,
                 McExperiment, default_convergence_params, run_convergence,
                 run_highdim, run_mc_table, write_csv)
from .model import MfbmParams, validate
from .networks import GraphSpec
from .synthesis import (CirculantSampler, read_path, sample_exact,
                        write_path_binary, write_path_csv)

EXIT_OK = 0
EXIT_INVALID_PARAMS = 2
EXIT_INSUFFICIENT_DATA = 3
EXIT_NUMERICAL = 4

SIGMA_MAGIC_FORMAT = "<Q"


def _seed(args) -> int:
    return 0 if args.seed is None else args.seed


def _parse_int_list(text: str) -> tuple:
    text = text.strip()
    if ":" in text:
        lo, hi = (int(x) for x in text.split(":"))
        return tuple(range(lo, hi + 1))
    return tuple(int(x) for x in text.split(","))


def _parse_weights(text: str) -> tuple:
    parts = tuple(float(x) for x in text.split(","))
    if len(parts) != 3:
        raise MfbmError(f"weights must be three comma-separated reals, got {text!r}")
    return parts


def _parse_range(text: str) -> tuple:
    lo, hi = (float(x) for x in text.split(":"))
    return lo, hi


def _estimation_config(args) -> EstimationConfig:
    return EstimationConfig(
        filter=load_filter(args.filter),
        dilations=_parse_int_list(args.dilations),
        weights=_parse_weights(args.weights),
        sign_dilation=args.sign_dilation)


def _write_matrix_csv(matrix: np.ndarray, path) -> None:
    with open(path, "w") as fh:
        for row in np.atleast_2d(matrix):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def write_sigma_binary(matrix: np.ndarray, path) -> None:
    with open(path, "wb") as fh:
        fh.write(struct.pack(SIGMA_MAGIC_FORMAT, matrix.shape[0]))
        fh.write(np.ascontiguousarray(matrix, dtype="<f8").tobytes())


def read_sigma_binary(path) -> np.ndarray:
    with open(path, "rb") as fh:
        (dim,) = struct.unpack(SIGMA_MAGIC_FORMAT,
                               fh.read(struct.calcsize(SIGMA_MAGIC_FORMAT)))
        data = np.frombuffer(fh.read(8 * dim * dim), dtype="<f8")
    if data.shape[0] != dim * dim:
        raise DimensionError("truncated sigma binary file")
    return data.reshape(dim, dim).astype(float)


def cmd_validate(args) -> int:
    params = MfbmParams.load(args.params)
    report = validate(params, tol_psd=args.tol_psd)
    if args.format == "json":
        print(json.dumps({
            "admissible": report.admissible,
            "min_eigenvalue": report.min_eigenvalue,
            "tol_psd": report.tol_psd,
            "violations": report.violations,
        }, indent=2))
    else:
        print(report)
    return EXIT_OK if report.admissible else EXIT_INVALID_PARAMS


def cmd_simulate(args) -> int:
    params = MfbmParams.load(args.params)
    report = validate(params)
    if not report.admissible:
        print(report, file=sys.stderr)
        return EXIT_INVALID_PARAMS
    if args.method == "exact":
        path = sample_exact(params, args.n, _seed(args))
    else:
        path = CirculantSampler(params, args.n).sample(_seed(args))
    if args.out_format == "binary":
        write_path_binary(path, args.out)
    else:
        write_path_csv(path, args.out)
    if not args.no_figures:
        from .reporting import save_path_figure
        save_path_figure(path.values, Path(args.out).with_suffix(".png"),
                         title=f"mfBm path ({path.method})")
    print(f"wrote {args.out} (n={path.n}, p={path.p}, method={path.method})")
    return EXIT_OK


def cmd_estimate(args) -> int:
    values = read_path(args.input)
    config = _estimation_config(args)
    result = estimate_all(values, config)
    doc = result.to_json_dict()
    if args.ci:
        ci = confidence_intervals(result, n=values.shape[0], level=args.level)
        doc["confidence_intervals"] = ci.to_json_dict()
    with open(args.out, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    print(f"wrote {args.out} (H_hat = {np.round(result.H_hat, 4).tolist()})")
    return EXIT_OK


def cmd_filters(args) -> int:
    rows = []
    for name in BUILTIN_FILTERS:
        filt = make_filter(name)
        rows.append({"name": name, "ell": filt.ell, "q": filt.q,
                     "taps": filt.taps.tolist()})
    if args.format == "json":
        print(json.dumps(rows, indent=2))
    else:
        print("name,ell,q,taps")
        for row in rows:
            taps = " ".join(f"{t:.12g}" for t in row["taps"])
            print(f"{row['name']},{row['ell']},{row['q']},{taps}")
    return EXIT_OK


def cmd_mc_table(args) -> int:
    exp = McExperiment.load(args.experiment)
    if args.seed is not None:
        exp = McExperiment.from_json_dict(
            {**exp.__dict__, "seed": args.seed,
             "dilations": list(exp.dilations)})
    rows = run_mc_table(exp, jobs=args.jobs, rep_start=args.rep_start)
    write_csv(args.out, MC_TABLE_HEADER, rows)
    if not args.no_figures:
        from .reporting import save_mc_table_figure
        save_mc_table_figure(rows, Path(args.out).with_suffix(".png"))
    print(f"wrote {args.out} ({len(rows)} rows)")
    return EXIT_OK


def cmd_convergence(args) -> int:
    if args.params:
        params = MfbmParams.load(args.params)
    else:
        params = default_convergence_params()
    config = _estimation_config(args)
    n_list = _parse_int_list(args.n_list)
    std_rows, slope_rows = run_convergence(params, n_list, args.reps, config,
                                           seed=_seed(args), jobs=args.jobs)
    prefix = args.out
    write_csv(f"{prefix}_std.csv", CONVERGENCE_HEADER, std_rows)
    write_csv(f"{prefix}_slopes.csv", SLOPES_HEADER, slope_rows)
    if not args.no_figures:
        from .reporting import save_convergence_figure
        save_convergence_figure(std_rows, slope_rows, f"{prefix}.png")
    print(f"wrote {prefix}_std.csv, {prefix}_slopes.csv")
    for label, slope, _, _ in slope_rows:
        print(f"  slope[{label}] = {float(slope):+.3f}")
    return EXIT_OK


def cmd_highdim(args) -> int:
    gspec = GraphSpec(nodes=args.nodes,
                      neighbors_each_side=args.neighbors,
                      rewire_prob=args.rewire, seed=_seed(args))
    config = _estimation_config(args)
    lo, hi = _parse_range(args.hurst_range)
    result = run_highdim(gspec, lo, hi, args.n, _seed(args), config,
                         edge_threshold=args.edge_threshold)
    prefix = args.out
    est_rows = []
    p = result.params.p
    for i in range(p):
        rho_true = result.params.rho[i, i + 1] if i + 1 < p else ""
        rho_est = result.rho_hat[i, i + 1] if i + 1 < p else ""
        est_rows.append([str(i + 1), repr(float(result.params.H[i])),
                         repr(float(result.H_hat[i])),
                         repr(float(rho_true)) if rho_true != "" else "",
                         repr(float(rho_est)) if rho_est != "" else ""])
    write_csv(f"{prefix}_estimates.csv",
              ("node", "H_true", "H_hat", "rho_next_true", "rho_next_hat"),
              est_rows)
    _write_matrix_csv(result.partial_true, f"{prefix}_partial_true.csv")
    _write_matrix_csv(result.partial_est, f"{prefix}_partial_est.csv")
    with open(f"{prefix}_summary.json", "w") as fh:
        json.dump(result.summary, fh, indent=2)
        fh.write("\n")
    if not args.no_figures:
        from .reporting import save_highdim_figures
        save_highdim_figures(result, prefix)
    print(f"wrote {prefix}_estimates.csv and partial-correlation matrices")
    print(f"edge recovery at |partial| > {result.edge_threshold}: "
          f"precision {result.precision:.3f}, recall {result.recall:.3f}")
    return EXIT_OK


def cmd_sigma(args) -> int:
    params = MfbmParams.load(args.params)
    report = validate(params)
    if not report.admissible:
        print(report, file=sys.stderr)
        return EXIT_INVALID_PARAMS
    filt = load_filter(args.filter)
    sig = sigma_matrix(params, filt, _parse_int_list(args.dilations),
                       K=args.truncation)
    if args.out_format == "csv":
        _write_matrix_csv(sig.matrix, args.out)
    else:
        write_sigma_binary(sig.matrix, args.out)
    print(f"wrote {args.out} (dim={sig.dim}, K={sig.truncation}, "
          f"tail_bound={sig.tail_bound:.3e})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help="base seed, default 0; replication r uses seed XOR r "
                             "(mc-table defaults to the experiment file's seed)")
    common.add_argument("--jobs", type=int, default=1,
                        help="worker processes for Monte-Carlo replications")
    common.add_argument("--format", choices=("csv", "json"), default="csv",
                        help="stdout format where applicable")
    common.add_argument("--no-figures", action="store_true",
                        help="do not render companion PNG figures")

    est_opts = argparse.ArgumentParser(add_help=False)
    est_opts.add_argument("--filter", default="db4",
                          help="builtin filter name or JSON tap file")
    est_opts.add_argument("--dilations", default="1:5",
                          help="dilation set, e.g. 1:5 or 1,2,4")
    est_opts.add_argument("--weights", default="1,0,0",
                          help="regression weights w_v,w_c,w_d")
    est_opts.add_argument("--sign-dilation", type=int, default=None)

    parser = argparse.ArgumentParser(
        prog="mfbm",
        description="Multivariate fractional Brownian motion: synthesis and "
                    "identification")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("validate", parents=[common],
                        help="check a parameter file for admissibility")
    sp.add_argument("--params", required=True)
    sp.add_argument("--tol-psd", type=float, default=None)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("simulate", parents=[common],
                        help="synthesize a sample path")
    sp.add_argument("--params", required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--method", choices=("circulant", "exact"),
                    default="circulant")
    sp.add_argument("--out", required=True)
    sp.add_argument("--out-format", choices=("csv", "binary"), default="csv")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("estimate", parents=[common, est_opts],
                        help="identify parameters from a path file")
    sp.add_argument("--input", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--ci", action="store_true",
                    help="add delta-method confidence intervals")
    sp.add_argument("--level", type=float, default=0.95)
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("filters", parents=[common],
                        help="list the built-in filter bank")
    sp.add_argument("action", nargs="?", choices=("list",), default="list")
    sp.set_defaults(func=cmd_filters)

    sp = sub.add_parser("mc-table", parents=[common],
                        help="Monte-Carlo MSE table over a parameter grid")
    sp.add_argument("--experiment", required=True,
                    help="JSON experiment description")
    sp.add_argument("--out", required=True)
    sp.add_argument("--rep-start", type=int, default=0,
                    help="absolute index of the first replication")
    sp.set_defaults(func=cmd_mc_table)

    sp = sub.add_parser("convergence", parents=[common, est_opts],
                        help="estimator spread versus sample size")
    sp.add_argument("--params", default=None)
    sp.add_argument("--n-list", default="256,1024,4096,16384")
    sp.add_argument("--reps", type=int, default=200)
    sp.add_argument("--out", required=True, help="output prefix")
    sp.set_defaults(func=cmd_convergence)

    sp = sub.add_parser("highdim", parents=[common, est_opts],
                        help="graph-correlated high-dimensional demo")
    sp.add_argument("--nodes", type=int, default=100)
    sp.add_argument("--neighbors", type=int, default=2)
    sp.add_argument("--rewire", type=float, default=0.2)
    sp.add_argument("--n", type=int, default=8192)
    sp.add_argument("--hurst-range", default="0.3:0.8")
    sp.add_argument("--edge-threshold", type=float, default=0.05)
    sp.add_argument("--out", required=True, help="output prefix")
    sp.set_defaults(func=cmd_highdim)

    sp = sub.add_parser("sigma", parents=[common, est_opts],
                        help="asymptotic covariance matrix of the moments")
    sp.add_argument("--params", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--out-format", choices=("bin", "csv"), default="bin")
    sp.add_argument("--truncation", type=int, default=None)
    sp.set_defaults(func=cmd_sigma)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InsufficientDataError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INSUFFICIENT_DATA
    except (SynthesisError, DegenerateFilterError, EstimationError,
            np.linalg.LinAlgError, FloatingPointError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (AdmissibilityError, DimensionError, UnsupportedCaseError,
            MfbmError, FileNotFoundError, KeyError, json.JSONDecodeError,
            ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INVALID_PARAMS


if __name__ == "__main__":
    sys.exit(main())
