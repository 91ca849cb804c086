"""Command-line front end.

    crs-toolkit divergence --family {laplace|gaussian|discrete|synthetic}
                 [--b B] [--mu M --sigma S --d D] [--q CSV --p CSV]
                 [--width-table PATH] --kind {kl|cs|acs} [--tol T]
    crs-toolkit grs {entropy|mean|sample|empirical} <pair flags>
                 [--eps-stop E] [--seed N] [--runs N]
    crs-toolkit experiment {laplace|gaussian|epsilon} [--grid CSV] [--out PATH]
    crs-toolkit verify --suite {default|PATH}

Exit status: 0 on success, 1 when a verified bound fails or a computation
cannot be completed, 2 on usage or parameter errors. Scalar output carries
nine digits after the decimal point; all values are bits unless a column
name says nats. Identical argv and seed give byte-identical output.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .divergences import (
    GAUSSIAN_TOL_BITS,
    alternative_divergence,
    channel_simulation_divergence,
    default_tolerance,
    kl_divergence,
)
from .errors import CrsToolkitError, InvalidParameterError
from .experiments import (
    EPSILON_HEADER,
    GAUSSIAN_HEADER,
    LAPLACE_HEADER,
    SUITE_EPS_STOP,
    SWEEP_EPS_STOP,
    bound_suite,
    epsilon_family_study,
    gaussian_sweep,
    laplace_sweep,
    load_suite_file,
    rows_to_csv,
    sweep_metadata,
    write_sweep,
)
from .grs import grs_empirical, grs_index_distribution, grs_sample
from .measures import (
    GaussianSpec,
    LaplaceSpec,
    SyntheticSpec,
    discrete_spec,
    make_pair,
)
from .streams import RngStream
from .width import width_eval, width_from_table
from .experiments import read_width_table


def _num(x: float) -> str:
    return f"{x:.9f}"


def _add_pair_flags(p: argparse.ArgumentParser):
    p.add_argument("--family", required=True,
                   choices=["laplace", "gaussian", "discrete", "synthetic"])
    p.add_argument("--b", type=float, help="laplace scale in (0, 1]")
    p.add_argument("--mu", type=float, help="gaussian mean")
    p.add_argument("--sigma", type=float, help="gaussian scale in (0, 1)")
    p.add_argument("--d", type=int, help="gaussian dimension")
    p.add_argument("--q", type=str, help="target probabilities, comma separated")
    p.add_argument("--p", type=str, help="proposal probabilities, comma separated")
    p.add_argument("--width-table", type=str, help="CSV width table (h,w) for synthetic")


def _csv_floats(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok != ""]
    except ValueError as exc:
        raise InvalidParameterError(f"bad numeric list {text!r}") from exc


def _spec_from_args(args) -> object:
    fam = args.family
    if fam == "laplace":
        if args.b is None:
            raise InvalidParameterError("laplace needs --b")
        return LaplaceSpec(args.b)
    if fam == "gaussian":
        if args.mu is None or args.sigma is None or args.d is None:
            raise InvalidParameterError("gaussian needs --mu, --sigma and --d")
        return GaussianSpec(args.mu, args.sigma, args.d)
    if fam == "discrete":
        if args.q is None or args.p is None:
            raise InvalidParameterError("discrete needs --q and --p")
        return discrete_spec(_csv_floats(args.q), _csv_floats(args.p))
    if args.width_table is None:
        raise InvalidParameterError("synthetic needs --width-table")
    return SyntheticSpec(width_from_table(read_width_table(args.width_table)))


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="crs-toolkit", description=__doc__.splitlines()[0])
    top.add_argument("--version", action="version", version=f"crs-toolkit {__version__}")
    sub = top.add_subparsers(dest="command", required=True)

    div = sub.add_parser("divergence", help="compute KL, CS or ACS divergence of a pair")
    _add_pair_flags(div)
    div.add_argument("--kind", required=True, choices=["kl", "cs", "acs"])
    div.add_argument("--tol", type=float, default=None, help="quadrature tolerance in bits")
    div.add_argument("--format", choices=["plain", "json"], default="plain")

    grs = sub.add_parser("grs", help="greedy rejection sampling runs and index law")
    grs_sub = grs.add_subparsers(dest="action", required=True)
    for action in ("entropy", "mean", "sample", "empirical"):
        ap = grs_sub.add_parser(action)
        _add_pair_flags(ap)
        ap.add_argument("--eps-stop", type=float, default=None,
                        help="survival cutoff of the exact recursion")
        ap.add_argument("--seed", type=int, default=0)
        ap.add_argument("--runs", type=int, default=1000, help="replicas for empirical")
        ap.add_argument("--format", choices=["plain", "json"], default="plain")

    exp = sub.add_parser("experiment", help="parameter sweeps emitting CSV")
    exp_sub = exp.add_subparsers(dest="study", required=True)
    for study in ("laplace", "gaussian", "epsilon"):
        ep = exp_sub.add_parser(study)
        ep.add_argument("--grid", type=str, default=None, help="comma-separated grid values")
        ep.add_argument("--out", type=str, default=None, help="CSV output path (stdout if absent)")
        ep.add_argument("--seed", type=int, default=0)
        if study == "gaussian":
            ep.add_argument("--mu", type=float, default=1.0)
            ep.add_argument("--sigma", type=float, default=0.5)

    ver = sub.add_parser("verify", help="run the bound-verification suite")
    ver.add_argument("--suite", type=str, default="default",
                     help="'default' or a path to a JSON list of pair specs")
    return top


def _run_divergence(args) -> int:
    spec = _spec_from_args(args)
    if args.kind == "kl":
        route = "width_identity" if spec.family == "synthetic" else "closed_form"
        report = kl_divergence(spec, route=route, tol=args.tol)
    else:
        w = width_eval(spec)
        tol = args.tol if args.tol is not None else default_tolerance(w)
        fn = channel_simulation_divergence if args.kind == "cs" else alternative_divergence
        report = fn(w, tol)
    if not report.converged:
        print(f"warning: error estimate {report.abs_error_estimate:.3e} bits "
              "exceeds the requested tolerance", file=sys.stderr)
    if args.format == "json":
        print(json.dumps(report.to_json()))
    else:
        print(_num(report.value_bits))
    return 0


def _run_grs(args) -> int:
    spec = _spec_from_args(args)
    w = width_eval(spec)
    if args.action in ("entropy", "mean"):
        dist = grs_index_distribution(w, eps_stop=args.eps_stop)
        if args.format == "json":
            print(json.dumps(dist.to_json()))
        else:
            value = dist.entropy_bits if args.action == "entropy" else dist.mean_index
            print(_num(value))
        return 0
    pair = make_pair(spec)
    stream = RngStream(args.seed, 0)
    if args.action == "sample":
        x, k = grs_sample(pair, w, stream)
        if args.format == "json":
            xval = x.tolist() if isinstance(x, np.ndarray) else x
            print(json.dumps({"x": xval, "k": k}))
        else:
            if isinstance(x, np.ndarray):
                xtxt = ",".join(_num(v) for v in x)
            elif isinstance(x, int):
                xtxt = str(x)
            else:
                xtxt = _num(x)
            print(f"{xtxt} {k}")
        return 0
    result = grs_empirical(pair, w, stream, args.runs)
    hist = result.histogram
    if args.format == "json":
        print(json.dumps({"n": args.runs, "histogram": {str(k): v for k, v in sorted(hist.items())}}))
    else:
        for k in sorted(hist):
            print(f"{k} {hist[k]}")
    return 0


def _run_experiment(args) -> int:
    grid = _csv_floats(args.grid) if args.grid is not None else None
    if args.study == "laplace":
        rows = laplace_sweep(grid)
        header = LAPLACE_HEADER
        meta = sweep_metadata("laplace", args.seed, [r.b for r in rows],
                              {"eps_stop": SWEEP_EPS_STOP})
    elif args.study == "gaussian":
        d_grid = [int(v) for v in grid] if grid is not None else None
        rows = gaussian_sweep(d_grid, mu=args.mu, sigma=args.sigma)
        header = GAUSSIAN_HEADER
        meta = sweep_metadata("gaussian", args.seed, [r.d for r in rows],
                              {"dcs_tol_bits": GAUSSIAN_TOL_BITS, "mu": args.mu,
                               "sigma": args.sigma})
    else:
        rows = epsilon_family_study(grid)
        header = EPSILON_HEADER
        meta = sweep_metadata("epsilon", args.seed, [r.eps for r in rows],
                              {"eps_stop": SUITE_EPS_STOP})
    if args.out is None:
        sys.stdout.write(rows_to_csv(header, rows))
    else:
        write_sweep(args.out, header, rows, sidecar=meta)
    return 0


def _run_verify(args) -> int:
    entries = None if args.suite == "default" else load_suite_file(args.suite)
    report = bound_suite(entries)
    print(json.dumps(report.to_json(), indent=2))
    return 0 if report.passed else 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "divergence":
            return _run_divergence(args)
        if args.command == "grs":
            return _run_grs(args)
        if args.command == "experiment":
            return _run_experiment(args)
        return _run_verify(args)
    except InvalidParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CrsToolkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
