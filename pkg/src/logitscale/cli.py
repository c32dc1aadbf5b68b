"""Command-line entry point: ``logitscale fit | gen | experiment | bench``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import re
import sys
from typing import Sequence

import numpy as np

from .datagen import DataGenConfig, draw_beta, gen_dataset, iter_chunks
from .exceptions import (
    DegenerateResponse,
    EmptyDataset,
    InvalidConfig,
    LeverageAtOne,
    LogitScaleError,
    MissingColumn,
    NotPositiveDefinite,
    OutOfRange,
    ParseError,
    TooManyFailures,
    ZeroSigma,
    ZeroStandardError,
)
from .experiments import (
    bootstrap_escalation,
    correlation_sweep,
    pvalue_uniformity_experiment,
    throughput_benchmark,
)
from .inference import build_summary
from .io import DatasetSource, load_csv, render_summary, summary_records, write_csv
from .model import DEFAULT_CHUNK_SIZE, Dataset
from .solvers import SolverConfig, fit

__all__ = ["main", "EXIT_OK", "EXIT_USAGE", "EXIT_DATA", "EXIT_NUMERIC"]

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

_DATA_ERRORS = (FileNotFoundError, IsADirectoryError, ParseError, MissingColumn, EmptyDataset,
                DegenerateResponse, UnicodeDecodeError)
_NUMERIC_ERRORS = (NotPositiveDefinite, LeverageAtOne, ZeroStandardError, ZeroSigma, TooManyFailures)
_USAGE_ERRORS = (InvalidConfig, OutOfRange)


class UsageError(Exception):
    pass


class NumericalFailure(Exception):
    def __init__(self, kind: str, detail: str = ""):
        super().__init__(f"{kind}: {detail}" if detail else kind)
        self.kind = kind


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _u64(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError(f"{text} is outside the unsigned 64-bit range")
    return v


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _int_list(text: str) -> list[int]:
    try:
        return [int(float(t)) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of sizes: {text!r}") from None


def _corr(text: str) -> float | None:
    if text.lower() == "none":
        return None
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--corr expects a float or 'none', got {text!r}") from None


def _level(text: str) -> float:
    v = float(text)
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError("--level must lie in (0, 1)")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="logitscale", description="Chunked logistic regression with robust inference.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    f = sub.add_parser("fit", help="fit a model to a CSV file and print the summary")
    f.add_argument("--data", required=True, help="CSV file with a header row")
    f.add_argument("--response", default="y", help="name of the 0/1 response column")
    f.add_argument("--features", default="all", help="comma-separated feature names, or 'all'")
    f.add_argument("--solver", choices=("irls", "lbfgs"), default="lbfgs")
    f.add_argument("--cov", choices=("mle", "sandwich"), default="sandwich")
    f.add_argument("--level", type=_level, default=0.95, help="confidence level of the intervals")
    f.add_argument("--no-intercept", action="store_true")
    f.add_argument("--chunk-size", type=_positive_int, default=DEFAULT_CHUNK_SIZE)
    f.add_argument("--tol", type=float, default=1e-8)
    f.add_argument("--max-iter", type=_positive_int, default=None)
    f.add_argument("--stream", action="store_true", help="re-read the file on every pass instead of caching it")
    f.add_argument("--parallel", action="store_true",
                   help="process chunks on a thread pool (results agree with the serial run to ~1e-9)")
    f.add_argument("--out", help="write key,value results to this file")

    g = sub.add_parser("gen", help="generate a synthetic logistic dataset as CSV")
    g.add_argument("--n", type=_positive_int, required=True)
    g.add_argument("--k", type=_positive_int, required=True)
    g.add_argument("--corr", type=_corr, default=None, help="pairwise feature correlation, or 'none'")
    g.add_argument("--seed", type=_u64, default=0)
    g.add_argument("--stream", type=_u64, default=0)
    g.add_argument("--beta", default="random", help="file of k coefficients, or 'random'")
    g.add_argument("--beta-out", help="also write the true coefficients to this file")
    g.add_argument("--out", required=True)

    e = sub.add_parser("experiment", help="run a validation experiment")
    esub = e.add_subparsers(dest="experiment", required=True, parser_class=_Parser)
    pv = esub.add_parser("pvalues", help="KS uniformity of null-coefficient p-values")
    pv.add_argument("--replicates", type=_positive_int, default=200)
    pv.add_argument("--n", type=_positive_int, default=100_000)
    pv.add_argument("--k", type=_positive_int, default=10)
    pv.add_argument("--solver", default="irls,lbfgs", help="comma-separated solvers")
    pv.add_argument("--bias", type=float, default=0.0, help="shift added to the estimate (negative control)")
    cs = esub.add_parser("corr-sweep", help="estimation error versus feature correlation")
    cs.add_argument("--replicates", type=_positive_int, default=50)
    cs.add_argument("--n", type=_positive_int, default=1000)
    cs.add_argument("--levels", type=_int_list, default=list(range(1, 15)))
    bs = esub.add_parser("bootstrap", help="sandwich and MLE covariance against the bootstrap")
    bs.add_argument("--data", help="CSV file; default is a generated dataset")
    bs.add_argument("--response", default="y")
    bs.add_argument("--n", type=_positive_int, default=500)
    bs.add_argument("--k", type=_positive_int, default=3)
    bs.add_argument("--counts", type=_int_list, default=[100, 1000, 10000])
    bs.add_argument("--solver", choices=("irls", "lbfgs"), default="lbfgs")
    for sp in (pv, cs, bs):
        sp.add_argument("--seed", type=_u64, default=0)
        sp.add_argument("--out-dir", required=True)

    b = sub.add_parser("bench", help="fit + summary throughput at increasing sizes")
    b.add_argument("--sizes", type=_int_list, default=[100_000, 200_000, 400_000, 800_000, 1_600_000])
    b.add_argument("--k", type=_positive_int, default=10)
    b.add_argument("--seed", type=_u64, default=0)
    b.add_argument("--solver", choices=("irls", "lbfgs"), default="lbfgs")
    b.add_argument("--repeats", type=_positive_int, default=3)
    b.add_argument("--out-dir", help="write the report here as well")
    return p


# -- subcommands --------------------------------------------------------------


def _cmd_fit(args, out) -> int:
    features = None
    if args.features.strip().lower() != "all":
        features = [s.strip() for s in args.features.split(",") if s.strip()]
        if not features:
            raise UsageError("--features: no feature names given")
    src = DatasetSource(args.data, args.response, features, args.chunk_size)
    data = load_csv(src, in_memory=not args.stream)
    cfg = SolverConfig(method=args.solver, tol=args.tol, max_iter=args.max_iter,
                       n_jobs=-1 if args.parallel else None)
    res = fit(data, cfg, has_intercept=not args.no_intercept)
    if res.failure is not None:
        raise NumericalFailure(res.failure.value, res.failure_detail)
    table = build_summary(res, data, args.cov, args.level)
    out.write(render_summary(table))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            for key, value in summary_records(table):
                fh.write(f"{key},{value}\n")
    return EXIT_OK


def _read_beta(path: str, k: int) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        tokens = [t for t in re.split(r"[\s,]+", fh.read()) if t]
    try:
        beta = np.array([float(t) for t in tokens])
    except ValueError as exc:
        raise ParseError(1, str(exc).split(":")[-1].strip(), "coefficient is not a number") from None
    if beta.size != k:
        raise InvalidConfig(f"{path}: {beta.size} coefficients for k={k}")
    return beta


def _cmd_gen(args, out) -> int:
    beta = None if args.beta == "random" else tuple(_read_beta(args.beta, args.k))
    cfg = DataGenConfig(args.n, args.k, correlation=args.corr, beta=beta, seed=args.seed, stream=args.stream)
    data, true_beta = gen_dataset(cfg) if args.n <= 1_000_000 else (
        Dataset(lambda: iter_chunks(cfg), tuple(f"x{j + 1}" for j in range(args.k))),
        np.array(beta) if beta is not None else draw_beta(args.k, args.seed, args.stream),
    )
    rows = write_csv(args.out, data)
    if args.beta_out:
        with open(args.beta_out, "w", encoding="utf-8") as fh:
            fh.write("\n".join(repr(float(b)) for b in true_beta) + "\n")
    out.write(f"wrote {rows} rows x {args.k} features to {args.out}\n")
    return EXIT_OK


def _print_files(paths: Sequence[str], out) -> None:
    for p in paths:
        out.write(f"  {p}\n")


def _cmd_experiment(args, out) -> int:
    if args.experiment == "pvalues":
        solvers = [s.strip() for s in args.solver.split(",") if s.strip()]
        bad = [s for s in solvers if s not in ("irls", "lbfgs")]
        if bad or not solvers:
            raise UsageError(f"--solver: unknown solver(s) {bad}")
        rep = pvalue_uniformity_experiment(args.replicates, args.n, args.k, solvers, args.seed, args.bias)
        for method, agg in rep.aggregates.items():
            out.write(f"{method}: KS D = {agg['ks_statistic']:.6f}, p = {agg['ks_p_value']:.6f} "
                      f"({agg['n_pvalues']} p-values, {agg['n_failed']} failed fits)\n")
    elif args.experiment == "corr-sweep":
        rep = correlation_sweep(args.levels, args.n, args.replicates, args.seed)
        out.write(f"{'level':>5}  {'solver':<6}  {'mean_distance':>14}  failure_rate\n")
        for row in rep.table:
            out.write(f"{row['level']:>5}  {row['solver']:<6}  {row['mean_distance']:>14.6g}  "
                      f"{row['failure_rate']:.2f}\n")
    else:
        if args.data:
            data = load_csv(DatasetSource(args.data, args.response))
        else:
            data, _ = gen_dataset(DataGenConfig(args.n, args.k, seed=args.seed, stream=0))
        if any(c < 50 for c in args.counts):
            raise UsageError("--counts: every replicate count must be >= 50")
        rep = bootstrap_escalation(data, args.counts, args.seed, args.solver)
        for row in rep.records:
            out.write(f"B={row['replicates']}: max rel. diag diff vs sandwich "
                      f"{row['max_rel_diag_to_sandwich']:.4f}, vs MLE {row['max_rel_diag_to_mle']:.4f}\n")
    paths = rep.write(args.out_dir)
    out.write(f"report written to {args.out_dir}:\n")
    _print_files(paths, out)
    return EXIT_OK


def _cmd_bench(args, out) -> int:
    if not args.sizes:
        raise UsageError("--sizes: empty list")
    rep = throughput_benchmark(sorted(args.sizes), args.k, args.seed, args.solver, repeats=args.repeats)
    out.write(f"{'rows':>10}  {'fit_s':>8}  {'summary_s':>9}  {'total_s':>8}  {'rows/s':>12}\n")
    for r in rep.records:
        if r["error"]:
            out.write(f"{r['n']:>10}  failed: {r['error']}\n")
            continue
        out.write(f"{r['n']:>10}  {r['fit_seconds']:>8.3f}  {r['summary_seconds']:>9.3f}  "
                  f"{r['total_seconds']:>8.3f}  {r['throughput']:>12.0f}\n")
    if args.out_dir:
        rep.write(args.out_dir)
    return EXIT_OK


_COMMANDS = {"fit": _cmd_fit, "gen": _cmd_gen, "experiment": _cmd_experiment, "bench": _cmd_bench}


def main(argv: Sequence[str] | None = None, stdout=None, stderr=None) -> int:
    """Run the CLI and return its exit code; never raises for library errors."""
    out = stdout or sys.stdout
    err = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        return _COMMANDS[args.command](args, out)
    except UsageError as exc:
        err.write(f"usage error: {exc}\n")
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    except NumericalFailure as exc:
        err.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERIC
    except _NUMERIC_ERRORS as exc:
        err.write(f"numerical failure: {type(exc).__name__}: {exc}\n")
        return EXIT_NUMERIC
    except _DATA_ERRORS as exc:
        err.write(f"data error: {type(exc).__name__}: {exc}\n")
        return EXIT_DATA
    except _USAGE_ERRORS as exc:
        err.write(f"usage error: {exc}\n")
        return EXIT_USAGE
    except (LogitScaleError, OSError, ValueError) as exc:
        err.write(f"data error: {type(exc).__name__}: {exc}\n")
        return EXIT_DATA


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
