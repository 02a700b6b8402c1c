"""Command-line interface: ``rcdens {simulate,estimate,refine,report,plot}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .grid import make_grid
from .io import (DensityDump, emit_plot_data, read_csv, read_dump, write_csv,
                 write_dump)
from .likelihood import PenaltyKind
from .operator import build_operator, dump_operator
from .results import expected_value, maxval, modes
from .select import AlphaLadder, cv_select, default_candidates, lepskii
from .shift import shift_estimate
from .simulate import sim_sample
from .solver import SolverError, SolverOptions, solve
from .spline import refine

EXIT_USAGE = 2
EXIT_IO = 3
EXIT_INPUT = 4
EXIT_SOLVER = 5


class UsageError(Exception):
    pass


def _alpha(text: str):
    low = text.strip().lower()
    if low in ("lepskii", "cv"):
        return low
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected a number, 'lepskii' or 'cv', got {text!r}") from None
    if not value >= 0:
        raise argparse.ArgumentTypeError("alpha must be >= 0")
    return value


def _transform(text: str):
    try:
        col, scale, offset = text.split(":")
        return int(col), (float(scale), float(offset))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected COL:SCALE:OFFSET, got {text!r}") from None


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="rcdens",
        description="Random-coefficient density estimation by regularised "
                    "maximum likelihood.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="write a simulated sample as CSV")
    s.add_argument("n", type=int)
    s.add_argument("--dim", type=int, default=2, choices=(2, 3))
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--x-low", type=float, default=-2.0)
    s.add_argument("--x-high", type=float, default=2.0)
    s.add_argument("--noise-sd", type=float, default=0.0)
    s.add_argument("--header", action="store_true",
                   help="write a header row x0,..,y")
    s.add_argument("--out", required=True)

    e = sub.add_parser("estimate", help="estimate a density and write a dump")
    src = e.add_mutually_exclusive_group(required=True)
    src.add_argument("--csv", metavar="PATH")
    src.add_argument("--simulate", type=int, metavar="N",
                     help="simulate N observations from the default mixture")
    e.add_argument("--dim", type=int, choices=(2, 3),
                   help="coefficient count (simulation) or a check on the CSV")
    e.add_argument("--columns", nargs="+",
                   help="CSV columns to use, response last")
    e.add_argument("--header", action="store_true", help="CSV has a header row")
    e.add_argument("--add-intercept", action="store_true",
                   help="prepend a column of ones to the CSV data")
    e.add_argument("--transform", type=_transform, action="append", default=[],
                   metavar="COL:SCALE:OFFSET",
                   help="replace selected column COL by SCALE*x+OFFSET")
    e.add_argument("--subsample", type=int)
    e.add_argument("--grid-points", type=int, default=20)
    for a in range(3):
        e.add_argument(f"--range-b{a}", type=float, nargs=2, metavar=("LO", "HI"),
                       help="coefficient range (default -5 5)")
    e.add_argument("--penalty", default="none",
                   choices=[k.value for k in PenaltyKind])
    e.add_argument("--alpha", type=_alpha, default=_alpha("lepskii"),
                   help="penalty weight: a number, 'lepskii' or 'cv'. Penalties "
                        "carry the cell-volume weight, so alpha scales "
                        "approximations of the continuous integrals")
    e.add_argument("--cv-folds", type=int, default=10)
    e.add_argument("--lepskii-c", type=float, default=1.0)
    e.add_argument("--lepskii-r", type=float, default=1.3)
    e.add_argument("--lepskii-count", type=int, default=10)
    e.add_argument("--shift", action="store_true",
                   help="re-estimate under random intercept shifts")
    e.add_argument("--n-shifts", type=int, default=10)
    e.add_argument("--shift-range", type=float, nargs=2, metavar=("A", "B"))
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--tol", type=float, default=1e-6)
    e.add_argument("--max-iter", type=int, default=100)
    e.add_argument("--weighted", action="store_true",
                   help="scale operator rows by 1/|x|")
    e.add_argument("--dump-operator", metavar="PATH")
    e.add_argument("--out", required=True)

    r = sub.add_parser("refine", help="spline-refine a dump onto a finer grid")
    r.add_argument("dump")
    r.add_argument("--grid-points", type=int, required=True)
    r.add_argument("--out", required=True)

    rp = sub.add_parser("report", help="print ev, maxval and modes as JSON lines")
    rp.add_argument("dump")
    rp.add_argument("--top", type=int, default=5)

    pl = sub.add_parser("plot", help="write plot data and an optional SVG")
    pl.add_argument("dump")
    pl.add_argument("--kind", default="contour", choices=("contour", "surface"))
    pl.add_argument("--out", required=True)
    pl.add_argument("--svg")
    return p


def _cmd_simulate(args) -> None:
    sample = sim_sample(args.n, args.dim, x_low=args.x_low, x_high=args.x_high,
                        seed=args.seed, noise_sd=args.noise_sd)
    header = None
    if args.header:
        header = [f"x{i}" for i in range(args.dim)] + ["y"]
    write_csv(args.out, sample, header)


def _cmd_estimate(args) -> None:
    if args.simulate is not None:
        if args.dim is None:
            raise UsageError("--simulate needs --dim")
        sample = sim_sample(args.simulate, args.dim, seed=args.seed)
    else:
        sample = read_csv(args.csv, args.columns, args.subsample, args.seed,
                          args.add_intercept, dict(args.transform), args.header)
    dim = sample.shape[1] - 1
    if args.dim is not None and args.dim != dim:
        raise UsageError(f"--dim {args.dim} but the data give {dim} coefficients")
    if dim not in (2, 3):
        raise UsageError(f"data give {dim} coefficients; only 2 or 3 supported")
    if args.shift and not np.all(sample[:, 0] == 1.0):
        raise UsageError("--shift needs an intercept column of ones "
                         "(use --add-intercept)")
    ranges = [getattr(args, f"range_b{a}") for a in range(dim)]
    if any(getattr(args, f"range_b{a}") is not None for a in range(dim, 3)):
        raise UsageError(f"range given for an axis beyond dim {dim}")
    grid = make_grid(args.grid_points, dim, ranges)
    opts = SolverOptions(args.tol, args.max_iter)
    kind = PenaltyKind.parse(args.penalty)
    T = build_operator(sample, grid, weighted=args.weighted)
    if args.dump_operator:
        dump_operator(T, args.dump_operator)

    alpha, method = args.alpha, "User"
    if alpha == "lepskii":
        ladder = AlphaLadder.for_sample_size(T.n, args.lepskii_c, args.lepskii_r,
                                             args.lepskii_count)
        alpha, _ = lepskii(T, ladder, kind, opts)
        method = "Lepskii"
    elif alpha == "cv":
        alpha, _ = cv_select(T, grid, args.cv_folds, default_candidates(T.n),
                             kind, opts, seed=args.seed)
        method = "CV"
    if args.shift:
        report = shift_estimate(sample, grid, alpha, kind, opts, args.n_shifts,
                                args.seed, args.shift_range, alpha_method=method)
    else:
        report = solve(T, alpha, kind, opts, method)
    d = report.details
    logging.info("alpha %g (%s), %d iterations, terminated by %s", alpha, method,
                 d["iterations"], d["terminated_by"])
    write_dump(report, args.out)


def _cmd_refine(args) -> None:
    dump = read_dump(args.dump)
    fine = refine(dump.f, args.grid_points)
    write_dump(DensityDump(fine, dump.alpha, dump.alpha_method, dump.penalty,
                           dump.n, dump.timestamp), args.out)


def _cmd_report(args, out) -> None:
    dump = read_dump(args.dump)
    value, loc = maxval(dump)
    lines = [
        {"ev": expected_value(dump).tolist()},
        {"maxval": {"value": value, "location": loc.tolist()}},
        {"modes": [{"value": v, "location": l.tolist()}
                   for v, l in modes(dump, args.top)]},
        {"alpha": dump.alpha, "alpha_method": dump.alpha_method,
         "penalty": dump.penalty.value, "n": dump.n},
    ]
    for obj in lines:
        out.write(json.dumps(obj) + "\n")


def _cmd_plot(args) -> None:
    emit_plot_data(read_dump(args.dump), args.kind, args.out, args.svg)


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="rcdens: %(message)s")
    try:
        if args.command == "simulate":
            _cmd_simulate(args)
        elif args.command == "estimate":
            _cmd_estimate(args)
        elif args.command == "refine":
            _cmd_refine(args)
        elif args.command == "report":
            _cmd_report(args, sys.stdout)
        elif args.command == "plot":
            _cmd_plot(args)
    except UsageError as exc:
        print(f"rcdens: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"rcdens: i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SolverError as exc:
        print(f"rcdens: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"rcdens: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return 0


if __name__ == "__main__":
    sys.exit(main())
