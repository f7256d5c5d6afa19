"""``disorder-detect`` command-line interface.

Every subcommand prints a JSON report on stdout (numbers at full round-trip
precision, with a ``config`` echo for provenance) and a short human summary on
stderr.  Exit codes: 0 success; 1 validation failure, non-convergence or an
undecided detection; 2 malformed input, hash mismatch or budget exceeded.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

from .checks import PAYOFF_VARIANTS, run_oracle_gates
from .detector import parse_stream, run_to_decision
from .errors import BudgetExceededError, ConfigurationError, ImpossiblePathError, ModelError
from .model import DisorderModel, load_model, model_hash, validate_model
from .montecarlo import ExperimentConfig, estimate_success
from .solver import (
    DEFAULT_MAX_ITERATIONS,
    DEFAULT_TOLERANCE,
    ThresholdTable,
    fixed_point_residual,
    load_table,
    problem_value,
    save_table,
    solve_threshold,
)

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    """Malformed command-line input (exit code 2)."""


def _clean(obj):
    """Make a report JSON-safe: infinities become the string "inf"."""
    if isinstance(obj, float):
        if math.isnan(obj):
            return None
        return ("inf" if obj > 0 else "-inf") if math.isinf(obj) else obj
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item"):  # numpy scalar
        return _clean(obj.item())
    return obj


def _emit(report: dict, output: str | None = None) -> None:
    text = json.dumps(_clean(report), indent=2)
    print(text)
    if output:
        Path(output).write_text(text + "\n")


def _say(msg: str) -> None:
    print(msg, file=sys.stderr)


def _config(args) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in ("func", "debug_payoff_variant")}
    if getattr(args, "debug_payoff_variant", None):
        cfg["debug_payoff_variant"] = args.debug_payoff_variant
    return cfg


def _valid_model(args) -> DisorderModel | None:
    """Load the model; prints violations and returns None if it is invalid."""
    model = load_model(args.model)
    problems = validate_model(model)
    if problems:
        for msg in problems:
            _say(f"invalid model: {msg}")
        _emit({"config": _config(args), "valid": False, "violations": problems})
        return None
    return model


def _table_for(args, model: DisorderModel) -> ThresholdTable:
    if args.table:
        return load_table(args.table, model)
    table, _ = solve_threshold(model, args.tol, args.max_iter, args.threads)
    return table


# ---------------------------------------------------------------- subcommands


def cmd_validate(args) -> int:
    model = load_model(args.model)
    problems = validate_model(model)
    _emit({"config": _config(args), "valid": not problems, "violations": problems,
           "model_hash": None if problems else model_hash(model)})
    if problems:
        for msg in problems:
            _say(f"invalid model: {msg}")
        return EXIT_FAIL
    _say(f"model OK: {model.n_states} states, pi={model.pi:g}, p={model.p:g}, d1={model.d1}, d2={model.d2}")
    return EXIT_OK


def cmd_solve(args) -> int:
    model = _valid_model(args)
    if model is None:
        return EXIT_FAIL
    table, diag = solve_threshold(model, args.tol, args.max_iter, args.threads)
    if args.output:
        save_table(table, model, args.output)
    report = {
        "config": _config(args),
        "model_hash": table.model_hash,
        "converged": table.converged,
        "iterations": diag.iterations,
        "sup_delta": table.sup_delta,
        "max_decrease": diag.max_decrease,
        "fixed_point_residual": fixed_point_residual(model, table),
        "problem_value": problem_value(model, table),
        "table": args.output,
    }
    _emit(report)
    _say(f"{'converged' if table.converged else 'NOT converged'} after {diag.iterations} sweeps, "
         f"sup_delta={table.sup_delta:.3g}, value={report['problem_value']:.6f}")
    return EXIT_OK if table.converged else EXIT_FAIL


def cmd_detect(args) -> int:
    model = _valid_model(args)
    if model is None:
        return EXIT_FAIL
    if not args.table:
        raise InputError("detect needs --table (create one with `disorder-detect solve`)")
    table = load_table(args.table, model)
    if args.stream in (None, "-"):
        lines = sys.stdin.read().splitlines()
    else:
        try:
            lines = Path(args.stream).read_text().splitlines()
        except OSError as exc:
            raise InputError(f"cannot read stream {args.stream}: {exc}") from exc
    observations = parse_stream(model, lines)
    report = run_to_decision(model, table, observations, record_trace=args.trace, as_indices=True)
    doc = {"config": _config(args), "model_hash": table.model_hash, **report.to_dict()}
    if not args.trace:
        doc.pop("trace")
    _emit(doc, args.output)
    if report.undecided:
        _say(f"undecided after {report.observations_used} observations")
        return EXIT_FAIL
    _say(f"stop at n={report.stop_time}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.reps < 1:
        raise InputError("--reps must be at least 1")
    model = _valid_model(args)
    if model is None:
        return EXIT_FAIL
    table = _table_for(args, model)
    if not table.converged:
        _say("threshold table has not converged; refusing to simulate")
        _emit({"config": _config(args), "error": "threshold table has not converged"})
        return EXIT_FAIL
    config = ExperimentConfig(model, args.reps, seed=args.seed, horizon=args.horizon,
                              record_traces=args.trace, threads=args.threads)
    result = estimate_success(config, table)
    if args.output:
        result.write_csv(args.output)
    doc = {"config": _config(args), "model_hash": table.model_hash, **result.summary(), "csv": args.output}
    if args.trace:
        doc["traces"] = [t.to_dict() for t in result.traces]
    _emit(doc)
    se = "n/a" if result.standard_error is None else f"{result.standard_error:.5f}"
    z = "n/a" if result.z_score is None else f"{result.z_score:+.2f}"
    _say(f"success rate {result.success_rate:.5f} (SE {se}) vs theoretical {result.theoretical_value:.5f}, "
         f"z={z}, undecided={result.undecided_count}, horizon={result.horizon}")
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    model = _valid_model(args)
    if model is None:
        return EXIT_FAIL
    payoff = args.debug_payoff_variant or "theorem"
    report = run_oracle_gates(model, args.horizon, payoff)
    _emit({"config": _config(args), **report}, args.output)
    for g in report["gates"]:
        status = "PASS" if g["passed"] else "FAIL"
        note = f"  [{g['note']}]" if g["note"] else ""
        _say(f"{status} {g['name']:<26} max_err={g['max_abs_error']:.3e} n={g['checked']}{note}")
    return EXIT_OK if report["passed"] else EXIT_FAIL


def cmd_value(args) -> int:
    model = _valid_model(args)
    if model is None:
        return EXIT_FAIL
    table = _table_for(args, model)
    value = problem_value(model, table)
    _emit({
        "config": _config(args),
        "model_hash": table.model_hash,
        "problem_value": value,
        "converged": table.converged,
        "iterations": table.iteration,
    }, args.output)
    _say(f"optimal success probability {value:.6f}" + ("" if table.converged else " (table NOT converged)"))
    return EXIT_OK if table.converged else EXIT_FAIL


# ---------------------------------------------------------------- parser


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="disorder-detect",
        description="Optimal detection of a switch between two Markov regimes within a precision window.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", required=True, help="model JSON file")

    solving = argparse.ArgumentParser(add_help=False)
    solving.add_argument("--tol", type=float, default=DEFAULT_TOLERANCE, help="sup-norm stopping tolerance")
    solving.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITERATIONS, help="maximum value-iteration sweeps")
    solving.add_argument("--threads", type=_positive_int, default=os.cpu_count() or 1,
                         help="worker threads (results do not depend on it)")

    p = sub.add_parser("validate", parents=[common], help="check a model file")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("solve", parents=[common, solving], help="compute the threshold table r*")
    p.add_argument("--output", help="write the threshold table here")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("detect", parents=[common], help="run the detector over an observation stream")
    p.add_argument("--table", help="threshold table from `solve`")
    p.add_argument("--stream", default="-", help="observations, one label per line or CSV with header x (default stdin)")
    p.add_argument("--trace", action="store_true", help="include the per-step trace")
    p.add_argument("--output", help="also write the report here")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("simulate", parents=[common, solving], help="Monte Carlo success rate of the detector")
    p.add_argument("--table", help="threshold table (solved on the fly if omitted)")
    p.add_argument("--reps", type=int, default=10_000, help="replications")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--horizon", type=_positive_int, default=None, help="path length (default: automatic)")
    p.add_argument("--trace", type=int, default=0, metavar="K", help="include traces of the first K replications")
    p.add_argument("--output", help="write per-replication CSV here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("oracle-check", parents=[common], help="compare every formula with exhaustive enumeration")
    p.add_argument("--horizon", type=int, default=6, help="enumeration horizon N")
    p.add_argument("--output", help="also write the report here")
    p.add_argument("--debug-payoff-variant", choices=PAYOFF_VARIANTS, default=None, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_oracle_check)

    p = sub.add_parser("value", parents=[common, solving], help="optimal success probability")
    p.add_argument("--table", help="threshold table (solved on the fly if omitted)")
    p.add_argument("--output", help="also write the report here")
    p.set_defaults(func=cmd_value)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse uses 2 for usage errors already
        return int(exc.code or 0)
    try:
        return args.func(args)
    except BudgetExceededError as exc:
        _say(f"error: {exc}")
        return EXIT_INPUT
    except ImpossiblePathError as exc:
        _say(f"error: observations impossible under the model: {exc}")
        return EXIT_INPUT
    except (ModelError, ConfigurationError, InputError) as exc:
        _say(f"error: {exc}")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
