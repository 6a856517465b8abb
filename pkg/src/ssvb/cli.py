"""Command-line front end.

Subcommands ``fit``, ``oracle``, ``simulate`` and ``experiment``.  Reports
are single JSON documents with a fixed envelope; ``simulate`` writes a
header-row CSV that ``fit`` and ``oracle`` read back.

Exit status: 0 success, 1 runtime or numerical failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .collapsed_vb import fit_collapsed
from .core_math import SpikeSlabHyper, validate_dataset
from .experiments import ExperimentConfig, TruthSpec, consistency_experiment, simulate
from .linear_vb import FitOptions, fit_linear
from .logistic_vb import fit_logistic
from .oracle import enumerate_posterior
from .quantile_vb import fit_quantile

SCHEMA_VERSION = 1

MODELS = ("linear", "collapsed", "quantile", "logistic")


class UsageError(Exception):
    """Bad flag combination detected after parsing."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


# ---------------------------------------------------------------------------
# argument types
# ---------------------------------------------------------------------------

def _seed(text: str) -> int:
    try:
        v = int(text, 10)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive_int(text: str) -> int:
    try:
        v = int(text, 10)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _float_list(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not all(math.isfinite(v) for v in vals):
        raise argparse.ArgumentTypeError("values must be finite")
    return vals


def _int_list(text: str) -> tuple[int, ...]:
    try:
        vals = tuple(int(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if any(v < 1 for v in vals):
        raise argparse.ArgumentTypeError("grid sizes must be >= 1")
    return vals


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_hyper(p: argparse.ArgumentParser):
    g = p.add_argument_group("prior hyperparameters")
    g.add_argument("--v0", type=float, default=0.01, help="spike variance (default 0.01)")
    g.add_argument("--v1", type=float, default=100.0, help="slab variance (default 100)")
    g.add_argument("--A", type=float, default=0.5, help="inverse-gamma shape (default 0.5)")
    g.add_argument("--B", type=float, default=0.5, help="inverse-gamma scale (default 0.5)")
    g.add_argument("--rho", type=float, default=0.5, help="prior inclusion probability (default 0.5)")


def _add_input(p: argparse.ArgumentParser):
    g = p.add_argument_group("input")
    g.add_argument("--input", required=True, help="header-row delimited file, or '-' for stdin")
    g.add_argument("--response", required=True, help="name of the response column")
    g.add_argument("--delimiter", default=",", help="field delimiter (default ',')")
    g.add_argument("--add-intercept", action="store_true", help="prepend a column of ones")


def _add_output(p: argparse.ArgumentParser):
    p.add_argument("--output", help="write here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ssvb", description="Spike-and-slab variational Bayes variable selection.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    fit = sub.add_parser("fit", help="fit one of the variational algorithms")
    fit.add_argument("--model", required=True, choices=MODELS)
    _add_input(fit)
    _add_hyper(fit)
    fit.add_argument("--q-level", type=float, help="target quantile (quantile model only)")
    fit.add_argument("--tol", type=float, default=1e-6)
    fit.add_argument("--max-iter", type=_positive_int, default=500)
    fit.add_argument("--tau-shape", choices=("derivation", "listing"), default="derivation",
                     help="shape of q(sigma) in the quantile model")
    fit.add_argument("--tilt", choices=("sqrt", "literal"), default="sqrt",
                     help="Polya-Gamma tilt rule in the logistic model")
    fit.add_argument("--seed", type=_seed, help="accepted for interface uniformity; fits are deterministic")
    _add_output(fit)

    orc = sub.add_parser("oracle", help="exact posterior by enumerating every inclusion pattern")
    orc.add_argument("--model", required=True, choices=("collapsed", "linear"),
                     help="collapsed: beta scaled by sigma; linear: beta independent of sigma")
    _add_input(orc)
    _add_hyper(orc)
    orc.add_argument("--seed", type=_seed)
    _add_output(orc)

    sim = sub.add_parser("simulate", help="draw a synthetic data set as CSV")
    sim.add_argument("--model", required=True, choices=("linear", "quantile", "logistic"))
    sim.add_argument("--n", type=_positive_int, required=True)
    sim.add_argument("--beta", type=_float_list, required=True, help="true coefficients, comma separated")
    sim.add_argument("--sigma0", type=float, default=1.0)
    sim.add_argument("--x-corr", type=float, default=0.0, help="equicorrelation of the design columns")
    sim.add_argument("--q-level", type=float, help="noise quantile level (quantile model only)")
    sim.add_argument("--seed", type=_seed, default=0)
    _add_output(sim)

    exp = sub.add_parser("experiment", help="Monte-Carlo consistency study")
    exp.add_argument("--model", required=True, choices=MODELS, help="fitting algorithm")
    exp.add_argument("--beta", type=_float_list, required=True)
    exp.add_argument("--sigma0", type=float, default=1.0)
    exp.add_argument("--x-corr", type=float, default=0.0)
    exp.add_argument("--n-grid", type=_int_list, default=(100, 400, 1600))
    exp.add_argument("--reps", type=_positive_int, default=200)
    _add_hyper(exp)
    exp.add_argument("--v0-scaling", choices=("fixed", "inv_sqrt_n", "sqrt_n"), default="fixed")
    exp.add_argument("--delta", type=float, default=0.1, help="margin in the spike-width condition")
    exp.add_argument("--q-level", type=float)
    exp.add_argument("--tol", type=float, default=1e-6)
    exp.add_argument("--max-iter", type=_positive_int, default=500)
    exp.add_argument("--seed", type=_seed, default=0)
    exp.add_argument("--workers", type=_positive_int, default=1)
    _add_output(exp)
    return parser


# ---------------------------------------------------------------------------
# I/O
# ---------------------------------------------------------------------------

def read_table(source: str, response: str, delimiter: str = ",", add_intercept: bool = False):
    """Parse a header-row table into ``(X, y, column_names)``."""
    if source == "-":
        text = sys.stdin.read()
    else:
        text = Path(source).read_text()
    rows = [r for r in csv.reader(io.StringIO(text), delimiter=delimiter) if r]
    if not rows:
        raise ValueError("input is empty")
    header = [h.strip() for h in rows[0]]
    if len(set(header)) != len(header):
        raise ValueError("duplicate column names in header")
    if response not in header:
        raise ValueError(f"response column {response!r} not found")
    body = rows[1:]
    if not body:
        raise ValueError("input has no data rows")
    try:
        values = np.array([[float(v) for v in r] for r in body], dtype=float)
    except ValueError as exc:
        raise ValueError(f"non-numeric entry: {exc}") from None
    if values.ndim != 2 or values.shape[1] != len(header):
        raise ValueError("ragged rows: every row must have one field per header column")
    k = header.index(response)
    y = values[:, k]
    names = [h for i, h in enumerate(header) if i != k]
    X = np.delete(values, k, axis=1)
    if add_intercept:
        X = np.column_stack([np.ones(len(y)), X])
        names = ["intercept"] + names
    if X.shape[1] == 0:
        raise ValueError("no predictor columns")
    return X, y, names


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dump_json(doc) -> str:
    # float repr is the shortest string that round-trips exactly
    return json.dumps(_jsonable(doc), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _emit(text: str, output: str | None):
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _envelope(algorithm: str, hyper: dict, data_shape: dict, results: dict) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "algorithm": algorithm,
        "hyper": hyper,
        "data_shape": data_shape,
        "results": results,
    }


def _hyper(args) -> SpikeSlabHyper:
    return SpikeSlabHyper(v0=args.v0, v1=args.v1, A=args.A, B=args.B, rho=args.rho)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _check_q_level(args, model: str):
    if model == "quantile":
        if args.q_level is None:
            raise UsageError("--q-level is required with --model quantile")
        if not 0 < args.q_level < 1:
            raise UsageError("--q-level must lie strictly between 0 and 1")
    elif args.q_level is not None:
        raise UsageError("--q-level is only valid with --model quantile")


def cmd_fit(args) -> str:
    _check_q_level(args, args.model)
    hyper = _hyper(args)
    opts = FitOptions(tol=args.tol, max_iter=args.max_iter)
    X, y, names = read_table(args.input, args.response, args.delimiter, args.add_intercept)
    data = validate_dataset(X, y, "binary" if args.model == "logistic" else "continuous")
    if args.model == "linear":
        rep = fit_linear(data, hyper, opts)
    elif args.model == "collapsed":
        rep = fit_collapsed(data, hyper, opts)
    elif args.model == "quantile":
        rep = fit_quantile(data, args.q_level, hyper, opts, tau_shape=args.tau_shape)
    else:
        rep = fit_logistic(data, hyper, opts, tilt=args.tilt)
    results = rep.as_dict()
    results["columns"] = names
    results["selected_columns"] = [names[j] for j in rep.selected]
    options = {"tol": args.tol, "max_iter": args.max_iter}
    if args.model == "quantile":
        options.update(q_level=args.q_level, tau_shape=args.tau_shape)
    if args.model == "logistic":
        options["tilt"] = args.tilt
    results["options"] = options
    return dump_json(_envelope(args.model, hyper.as_dict(), {"n": data.n, "p": data.p}, results))


def cmd_oracle(args) -> str:
    hyper = _hyper(args)
    X, y, names = read_table(args.input, args.response, args.delimiter, args.add_intercept)
    data = validate_dataset(X, y, "continuous")
    kind = "collapsed" if args.model == "collapsed" else "model2"
    post = enumerate_posterior(data, hyper, kind)
    results = post.as_dict()
    results["columns"] = names
    return dump_json(_envelope(f"oracle-{kind}", hyper.as_dict(), {"n": data.n, "p": data.p}, results))


def cmd_simulate(args) -> str:
    if args.model == "quantile":
        _check_q_level(args, "quantile")
    elif args.q_level is not None:
        raise UsageError("--q-level is only valid with --model quantile")
    truth = TruthSpec(args.beta, sigma0=args.sigma0,
                      x_dist="equicorrelated" if args.x_corr > 0 else "normal", x_corr=args.x_corr)
    data, _ = simulate(args.model, truth, args.n, args.seed,
                       q_level=args.q_level if args.q_level is not None else 0.5)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"x{j + 1}" for j in range(data.p)] + ["y"])
    for row, yi in zip(data.X, data.y):
        w.writerow([repr(float(v)) for v in row] + [repr(float(yi))])
    return buf.getvalue()


def cmd_experiment(args) -> str:
    _check_q_level(args, args.model)
    truth = TruthSpec(args.beta, sigma0=args.sigma0,
                      x_dist="equicorrelated" if args.x_corr > 0 else "normal", x_corr=args.x_corr)
    config = ExperimentConfig(
        truth=truth, n_grid=args.n_grid, reps=args.reps, algorithm=args.model,
        v0=args.v0, v1=args.v1, A=args.A, B=args.B, rho=args.rho, v0_scaling=args.v0_scaling,
        q_level=args.q_level if args.q_level is not None else 0.5, delta=args.delta,
        seed=args.seed, tol=args.tol, max_iter=args.max_iter, workers=args.workers,
    )
    report = consistency_experiment(config)
    results = report.as_dict()
    # worker count never changes results, so keep it out of the document
    results["config"].pop("workers", None)
    return dump_json(_envelope(
        f"experiment-{args.model}", _hyper(args).as_dict(),
        {"n_grid": list(args.n_grid), "p": truth.p, "reps": args.reps}, results,
    ))


COMMANDS = {"fit": cmd_fit, "oracle": cmd_oracle, "simulate": cmd_simulate, "experiment": cmd_experiment}


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        # hyperparameter validation is a usage problem, not a runtime one
        if hasattr(args, "v0"):
            _hyper(args)
        if getattr(args, "tol", 1.0) <= 0:
            raise UsageError("--tol must be positive")
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"ssvb: error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    try:
        text = COMMANDS[args.command](args)
        _emit(text, args.output)
    except UsageError as exc:
        print(f"ssvb {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"ssvb {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run())
