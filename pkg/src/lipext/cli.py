"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 verification failure.
Numbers are written with ``repr`` (shortest round-trip decimal), so reruns
with the same inputs and flags produce identical bytes.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .covering import CellComplex, RangeError, data_scale_range
from .extension import Jet, ScalarField, extend_lip, value_and_differential
from .harness import (SuiteConfig, calibration_from_report, load_calibration, run_suite,
                      standard_suite, sweep_table, write_calibration)
from .metric import (AmbientSpace, DataError, PointSet, default_doubling, estimate_capacity,
                     estimate_doubling)
from .partitions import C1Partition, LipPartition
from .projection import CellProjection, KernelProfile, KernelProjection, RegularProjection
from .spaces import parse_label

log = logging.getLogger("lipext")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_VERIFY = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class CliConfig:
    subcommand: str
    points: str | None = None
    values: str | None = None
    jets: str | None = None
    queries: str | None = None
    method: str = "kernel"
    p: float = 2.0
    seed: int = 0
    out: str | None = None
    report: str | None = None
    jobs: int = 1
    calibration: str | None = None
    thresholds: dict = field(default_factory=dict)


# ---------------------------------------------------------------- csv

def read_matrix(path: str, what: str) -> np.ndarray:
    """Numeric CSV with an optional non-numeric header row."""
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise DataError(f"cannot read {what} file {path!r}: {exc.strerror}") from None
    if rows:
        try:
            [float(c) for c in rows[0]]
        except ValueError:
            rows = rows[1:]
    if not rows:
        raise DataError(f"{what} file {path!r} has no data rows")
    width = len(rows[0])
    out = np.empty((len(rows), width))
    for i, r in enumerate(rows):
        if len(r) != width:
            raise DataError(f"{what} file {path!r}: row {i} has {len(r)} columns, expected {width}")
        try:
            out[i] = [float(c) for c in r]
        except ValueError:
            raise DataError(f"{what} file {path!r}: row {i} is not numeric") from None
    if not np.all(np.isfinite(out)):
        raise DataError(f"{what} file {path!r} contains non-finite numbers")
    return out


def format_csv(header: list[str], rows: np.ndarray) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for r in np.atleast_2d(rows):
        buf.write(",".join(repr(float(v)) for v in r) + "\n")
    return buf.getvalue()


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


def _load_points(cfg: CliConfig) -> PointSet:
    if cfg.points is None:
        raise UsageError("--points is required")
    P = read_matrix(cfg.points, "points")
    return PointSet(P, AmbientSpace(P.shape[1], cfg.p))


def _load_queries(cfg: CliConfig, X: PointSet) -> np.ndarray:
    if cfg.queries is None:
        raise UsageError("--queries is required")
    Q = read_matrix(cfg.queries, "queries")
    if Q.shape[1] != X.d:
        raise DataError(f"queries have {Q.shape[1]} columns, points have {X.d}")
    return Q


def _load_values(cfg: CliConfig, X: PointSet) -> ScalarField:
    if cfg.values is None:
        raise UsageError("--values is required")
    V = read_matrix(cfg.values, "values")
    if V.shape[0] != len(X):
        raise DataError(f"{V.shape[0]} value rows for {len(X)} points")
    return ScalarField(V)


def _load_jets(cfg: CliConfig, X: PointSet) -> Jet:
    """Columns f1..fk then L1_1..L1_d, ..., Lk_1..Lk_d."""
    if cfg.jets is None:
        raise UsageError("--jets is required")
    J = read_matrix(cfg.jets, "jets")
    if J.shape[0] != len(X):
        raise DataError(f"{J.shape[0]} jet rows for {len(X)} points")
    if J.shape[1] % (1 + X.d):
        raise DataError(f"jet rows need k * (1 + {X.d}) columns, got {J.shape[1]}")
    k = J.shape[1] // (1 + X.d)
    return Jet(J[:, :k], J[:, k:].reshape(len(X), k, X.d))


# ---------------------------------------------------------------- operators

def _complex(X: PointSet, Q: np.ndarray) -> CellComplex:
    rng_ = data_scale_range(X, Q)
    if rng_.empty:
        raise DataError("the cell construction needs at least two points")
    return CellComplex(X, rng_.n_min, rng_.n_max)


def _build_projection(X: PointSet, Q: np.ndarray, method: str):
    if method == "kernel" or len(X) < 2:
        return KernelProjection(X, KernelProfile.for_points(X))
    if method == "cells":
        return CellProjection(LipPartition(_complex(X, Q)))
    if method == "regular":
        return RegularProjection(C1Partition(_complex(X, Q)))
    raise UsageError(f"unknown method {method!r}")


def _lip_chunk(args):
    f, proj, Q = args
    return extend_lip(f, proj, Q)


def _c1_chunk(args):
    j, proj, Q = args
    v, dv = value_and_differential(j, proj, Q)
    return np.hstack([v, dv.reshape(len(Q), -1)])


def _fan_out(func, payload, proj, Q: np.ndarray, jobs: int) -> np.ndarray:
    """Evaluate query chunks in workers and reassemble them in order."""
    if jobs <= 1 or len(Q) < 2 * jobs:
        return func((payload, proj, Q))
    chunks = np.array_split(Q, jobs)
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        parts = list(pool.map(func, [(payload, proj, c) for c in chunks]))
    return np.vstack(parts)


def _with_row_offset(exc: RangeError, Q: np.ndarray) -> DataError:
    rows = getattr(exc, "rows", ())
    if len(rows):
        return DataError(f"query row {int(rows[0])} is out of range for the cell "
                         f"construction ({len(rows)} such rows): {exc}")
    return DataError(str(exc))


def _c1_projection(X: PointSet, Q: np.ndarray):
    if len(X) < 2:
        raise DataError("C^1 extension needs at least two points")
    return RegularProjection(C1Partition(_complex(X, Q)))


def cmd_estimate(cfg: CliConfig) -> int:
    X = _load_points(cfg)
    _emit(json.dumps(estimate_payload(X, cfg.seed), indent=1, sort_keys=True) + "\n", cfg.out)
    return EXIT_OK


def estimate_payload(X: PointSet, seed: int = 0) -> dict:
    """Doubling and capacity estimates as written by the ``estimate`` subcommand."""
    small = len(X) <= 8
    dbl = estimate_doubling(X, exact=True) if small else default_doubling(X)
    caps = {repr(e): estimate_capacity(X, e, exhaustive=small, seed=seed).to_dict()
            for e in (0.2, 0.5)}
    return {"points": len(X), "dimension": X.d, "p": X.space.p,
            "doubling": dbl.to_dict(), "capacity": caps}


def cmd_extend(cfg: CliConfig) -> int:
    X = _load_points(cfg)
    f = _load_values(cfg, X)
    Q = _load_queries(cfg, X)
    try:
        proj = _build_projection(X, Q, cfg.method)
        out = _fan_out(_lip_chunk, f, proj, Q, cfg.jobs)
    except RangeError as exc:
        raise _with_row_offset(exc, Q) from None
    _emit(format_csv([f"f{i + 1}" for i in range(f.k)], out), cfg.out)
    return EXIT_OK


def cmd_extend_c1(cfg: CliConfig) -> int:
    X = _load_points(cfg)
    j = _load_jets(cfg, X)
    Q = _load_queries(cfg, X)
    try:
        out = _fan_out(_c1_chunk, j, _c1_projection(X, Q), Q, cfg.jobs)
    except RangeError as exc:
        raise _with_row_offset(exc, Q) from None
    k = j.values.shape[1]
    header = [f"f{i + 1}" for i in range(k)]
    header += [f"df{i + 1}_{a + 1}" for i in range(k) for a in range(X.d)]
    _emit(format_csv(header, out), cfg.out)
    return EXIT_OK


def cmd_grid(cfg: CliConfig, resolution: int, bounds) -> int:
    X = _load_points(cfg)
    if X.d > 2:
        raise UsageError("grid output is limited to d <= 2")
    if (cfg.values is None) == (cfg.jets is None):
        raise UsageError("grid needs exactly one of --values or --jets")
    if resolution < 2:
        raise UsageError("--resolution must be at least 2")
    lo, hi = X.points.min(axis=0), X.points.max(axis=0)
    if bounds is not None:
        lo, hi = np.full(X.d, bounds[0]), np.full(X.d, bounds[1])
    hi = np.where(hi > lo, hi, lo + 1.0)
    axes = [np.linspace(lo[a], hi[a], resolution) for a in range(X.d)]
    mesh = np.meshgrid(*axes, indexing="ij")
    Q = np.stack([m.ravel() for m in mesh], axis=1)
    try:
        if cfg.values is not None:
            f = _load_values(cfg, X)
            vals = _fan_out(_lip_chunk, f, _build_projection(X, Q, cfg.method), Q, cfg.jobs)
        else:
            j = _load_jets(cfg, X)
            vals = _fan_out(_c1_chunk, j, _c1_projection(X, Q), Q, cfg.jobs)
            vals = vals[:, :j.values.shape[1]]
    except RangeError as exc:
        raise _with_row_offset(exc, Q) from None
    header = [f"x{a + 1}" for a in range(X.d)] + [f"f{i + 1}" for i in range(vals.shape[1])]
    _emit(format_csv(header, np.hstack([Q, vals])), cfg.out)
    return EXIT_OK


def _suite_from(args, cfg: CliConfig):
    if args.instances:
        return [parse_label(s.strip(), seed=cfg.seed, p=cfg.p)
                for s in args.instances.split(",") if s.strip()]
    if args.suite == "quick":
        return [parse_label(s) for s in ("grid-d1-n4", "grid-d1-n8", "grid-d2-n4", "cantor-L3")]
    return standard_suite()


def cmd_verify(cfg: CliConfig, args) -> int:
    specs = _suite_from(args, cfg)
    conf = SuiteConfig(seed=cfg.seed, jobs=cfg.jobs, jet=args.jet).with_overrides(cfg.thresholds)
    calibration = {} if args.write_calibration else load_calibration(cfg.calibration)
    rep = run_suite(specs, conf, calibration)
    if args.write_calibration:
        path = write_calibration(calibration_from_report(rep), cfg.calibration)
        print(f"calibration written to {path}")
        rep = run_suite(specs, conf, load_calibration(path))
    for c in rep.criteria:
        print(c.line())
    for w in rep.warnings:
        print(f"warning: {w}", file=sys.stderr)
    if cfg.report:
        with open(cfg.report, "w") as fh:
            fh.write(rep.to_json(timing=not args.no_timing) + "\n")
    return rep.exit_code


def cmd_sweep(cfg: CliConfig, args) -> int:
    dims = _int_list(args.dims, "--dims")
    sizes = _int_list(args.sizes, "--sizes")
    conf = SuiteConfig(seed=cfg.seed).with_overrides(cfg.thresholds)
    rows = sweep_table(dims, sizes, conf)
    header = ["dimension", "size", "lambda_hat", "lip_ratio_cells", "lip_ratio_kernel"]
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for r in rows:
        buf.write(f"{r['dimension']},{r['size']},{r['lambda_hat']},"
                  f"{r['lip_ratio_cells']!r},{r['lip_ratio_kernel']!r}\n")
    _emit(buf.getvalue(), cfg.out)
    return EXIT_OK


def _int_list(text: str, flag: str) -> list[int]:
    try:
        out = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"{flag} takes comma-separated integers") from None
    if not out or min(out) < 1:
        raise UsageError(f"{flag} takes positive integers")
    return out


def _thresholds(items) -> dict:
    out = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--threshold expects KEY=VALUE, got {item!r}")
        try:
            out[key.strip()] = float(value)
        except ValueError:
            raise UsageError(f"--threshold value for {key!r} is not a number") from None
    return out


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--p", type=float, default=2.0, help="norm exponent, 1 < p < inf")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="output file (default stdout)")
    common.add_argument("--jobs", type=int, default=1, help="worker processes; output is unchanged")
    common.add_argument("--threshold", action="append", metavar="KEY=VALUE",
                        help="override a suite threshold (repeatable)")

    parser = _Parser(prog="lipext", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", parser_class=_Parser)

    p = sub.add_parser("estimate", parents=[common], help="doubling and capacity estimates")
    p.add_argument("--points", required=True)

    p = sub.add_parser("extend", parents=[common], help="Lipschitz extension at query points")
    p.add_argument("--points", required=True)
    p.add_argument("--values", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--method", choices=("kernel", "cells"), default="kernel")

    p = sub.add_parser("extend-c1", parents=[common], help="C^1 extension of a jet")
    p.add_argument("--points", required=True)
    p.add_argument("--jets", required=True)
    p.add_argument("--queries", required=True)

    p = sub.add_parser("grid", parents=[common], help="dense plot-ready CSV (d <= 2)")
    p.add_argument("--points", required=True)
    p.add_argument("--values")
    p.add_argument("--jets")
    p.add_argument("--method", choices=("kernel", "cells"), default="kernel")
    p.add_argument("--resolution", type=int, default=101)
    p.add_argument("--bounds", type=float, nargs=2, metavar=("LO", "HI"))

    p = sub.add_parser("verify", parents=[common], help="run the acceptance suite")
    p.add_argument("--suite", choices=("standard", "quick"), default="standard")
    p.add_argument("--instances", help="comma-separated labels, e.g. grid-d1-n4,cantor-L3")
    p.add_argument("--jet", choices=("square", "random"), default="square")
    p.add_argument("--report", help="write the JSON report here")
    p.add_argument("--calibration", help="calibration JSON (default: the packaged file)")
    p.add_argument("--write-calibration", action="store_true",
                   help="freeze measured values into the calibration file first")
    p.add_argument("--no-timing", action="store_true", help="omit timing from the report")

    p = sub.add_parser("sweep", parents=[common], help="lambda_hat against Lip(Tf)/Lip(f)")
    p.add_argument("--dims", default="1,2,3")
    p.add_argument("--sizes", default="4,8")
    return parser


def _config(args) -> CliConfig:
    return CliConfig(
        subcommand=args.subcommand, points=getattr(args, "points", None),
        values=getattr(args, "values", None), jets=getattr(args, "jets", None),
        queries=getattr(args, "queries", None), method=getattr(args, "method", "kernel"),
        p=args.p, seed=args.seed, out=args.out, report=getattr(args, "report", None),
        jobs=max(1, args.jobs), calibration=getattr(args, "calibration", None),
        thresholds=_thresholds(args.threshold))


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("EXT_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.subcommand is None:
            raise UsageError("a subcommand is required")
        cfg = _config(args)
        if not (1.0 < cfg.p < math.inf):
            raise UsageError("--p must satisfy 1 < p < inf")
        if args.subcommand == "estimate":
            return cmd_estimate(cfg)
        if args.subcommand == "extend":
            return cmd_extend(cfg)
        if args.subcommand == "extend-c1":
            return cmd_extend_c1(cfg)
        if args.subcommand == "grid":
            return cmd_grid(cfg, args.resolution, args.bounds)
        if args.subcommand == "verify":
            return cmd_verify(cfg, args)
        return cmd_sweep(cfg, args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"lipext: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"lipext: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
