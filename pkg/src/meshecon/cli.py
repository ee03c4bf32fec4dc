"""Command-line orchestrator.

Subcommands: eval, sweep, equilibrium, simulate, radio, validate. Parameters
come from built-in defaults, optionally replaced by --config FILE (flat
key=value or JSON; the MESHECON_CONFIG environment variable supplies a
default path), with repeatable --set KEY=VALUE overrides applied last.
The parsed invocation fully determines a run: every command is
deterministic given its flags (including --seed), and numeric output uses
full round-trip precision.

Exit codes: 0 success; 2 configuration or validation error; 3 numeric
failure; 4 solver findings (no free-entry crossing / boundary club optimum)
— findings are reported results, not tool failures, but they get their own
code so scripts can branch on them.

Output files are written to a temporary name and renamed into place, so a
failed command never leaves a partial file.
"""

import argparse
import csv
import io
import json
import os
import sys
import tempfile

from .equilibrium import compare_regimes
from .errors import BoundaryOptimum, NoCrossing, NumericsError, ParamError, SimulationError
from .model import (
    PARAM_KEYS,
    RadioParams,
    channels_per_cell,
    default_params,
    params_from_dict,
    params_to_dict,
    path_loss,
    read_params_file,
    shannon_capacity,
    validate,
)
from .regimes import REGIME_ORDER, Regime, UTILITIES_CSV_HEADER, regime_utilities
from .simulator import SimConfig, estimate_vs_analytic, run_instant, write_event_trace

ENV_CONFIG = "MESHECON_CONFIG"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_FINDING = 4


def _add_param_args(sub):
    sub.add_argument("--config", help="parameter file (key=value or JSON)")
    sub.add_argument(
        "--set", dest="overrides", action="append", default=[],
        metavar="KEY=VALUE", help="override one parameter (repeatable)",
    )


def _add_output_args(sub, formats=("json", "csv")):
    sub.add_argument("--format", choices=formats, default="json")
    sub.add_argument("--output", help="write here instead of stdout")


def _load_params(args):
    path = args.config or os.environ.get(ENV_CONFIG)
    if path:
        base = params_to_dict(read_params_file(path))
    else:
        base = params_to_dict(default_params())
    for item in args.overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise ParamError(f"--set expects KEY=VALUE, got {item!r}")
        key = key.strip()
        if key not in PARAM_KEYS:
            raise ParamError(f"unknown parameter key {key!r} in --set")
        try:
            base[key] = float(value)
        except ValueError as exc:
            raise ParamError(f"--set {item!r}: {exc}") from exc
    return params_from_dict(base)


def _emit(text: str, output: str | None) -> None:
    if output is None:
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(output))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".meshecon-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, output)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _csv_text(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(rows)
    return buf.getvalue()


# --------------------------------------------------------------------------
# Commands


def cmd_eval(args) -> int:
    params = validate(_load_params(args))
    results = [regime_utilities(params, regime) for regime in REGIME_ORDER]
    if args.format == "json":
        text = _json_text({r.regime.value: r.to_json_dict() for r in results})
    else:
        text = _csv_text([list(UTILITIES_CSV_HEADER)] + [r.csv_row() for r in results])
    _emit(text, args.output)
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.steps < 2:
        raise ParamError(f"--steps must be >= 2, got {args.steps}")
    if args.axis not in PARAM_KEYS:
        raise ParamError(f"--axis must be one of {', '.join(PARAM_KEYS)}, got {args.axis!r}")
    if not (args.lo <= args.hi):
        raise ParamError(f"--lo must be <= --hi, got {args.lo!r} > {args.hi!r}")
    base = params_to_dict(_load_params(args))
    step = (args.hi - args.lo) / (args.steps - 1)
    grid = [args.lo + i * step for i in range(args.steps)]
    grid[-1] = args.hi

    results = []
    for value in grid:
        point = dict(base)
        point[args.axis] = value
        try:
            params = validate(params_from_dict(point))
        except ParamError as exc:
            raise ParamError(f"sweep point {args.axis}={value!r} is invalid: {exc}") from exc
        for regime in REGIME_ORDER:
            results.append(regime_utilities(params, regime))

    if args.format == "json":
        text = _json_text([r.to_json_dict() for r in results])
    else:
        text = _csv_text([list(UTILITIES_CSV_HEADER)] + [r.csv_row() for r in results])
    _emit(text, args.output)
    return EXIT_OK


def cmd_equilibrium(args) -> int:
    params = validate(_load_params(args))
    report = compare_regimes(params)
    if args.format == "json":
        text = report.to_json()
    else:
        text = _csv_text(report.csv_rows())
    _emit(text, args.output)
    return EXIT_FINDING if report.has_findings() else EXIT_OK


def cmd_simulate(args) -> int:
    params = validate(_load_params(args))
    config = SimConfig(
        side=args.side,
        params=params,
        regime=Regime(args.regime),
        trials=args.trials,
        seed=args.seed,
    ).validated()
    if args.trace:
        traced = run_instant(config, collect_events=True)
        write_event_trace(traced.events, args.trace)
    record = estimate_vs_analytic(config)
    _emit(record.to_json(), args.output)
    return EXIT_OK


def cmd_radio(args) -> int:
    radio = RadioParams(
        snr=args.snr,
        alpha=args.alpha,
        bandwidth_total=args.bt,
        user_bit_rate=args.rb,
        path_loss_constant=args.k,
        carrier_frequency=args.freq,
        path_loss_exponent=args.exp,
    )
    out = {
        "shannon_capacity": shannon_capacity(radio.snr),
        "channels_per_cell": channels_per_cell(radio),
    }
    if args.dist is not None:
        out["path_loss"] = path_loss(radio, args.dist)
    _emit(_json_text(out), args.output)
    return EXIT_OK


def cmd_validate(args) -> int:
    params = validate(_load_params(args))
    _emit(_json_text({"valid": True, "params": params_to_dict(params)}), args.output)
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="meshecon",
        description="Peer-to-peer relay economics: regime utilities, equilibria, simulation.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p_eval = subs.add_parser("eval", help="expected utilities for all regimes")
    _add_param_args(p_eval)
    _add_output_args(p_eval)
    p_eval.set_defaults(fn=cmd_eval)

    p_sweep = subs.add_parser("sweep", help="utilities over a parameter grid")
    _add_param_args(p_sweep)
    _add_output_args(p_sweep)
    p_sweep.add_argument("--axis", required=True, help="parameter to sweep")
    p_sweep.add_argument("--lo", type=float, required=True)
    p_sweep.add_argument("--hi", type=float, required=True)
    p_sweep.add_argument("--steps", type=int, required=True)
    p_sweep.set_defaults(fn=cmd_sweep)

    p_eq = subs.add_parser("equilibrium", help="free-entry and club densities report")
    _add_param_args(p_eq)
    _add_output_args(p_eq)
    p_eq.set_defaults(fn=cmd_equilibrium)

    p_sim = subs.add_parser("simulate", help="Monte Carlo run cross-checked against the closed forms")
    _add_param_args(p_sim)
    _add_output_args(p_sim, formats=("json",))
    p_sim.add_argument("--regime", choices=[r.value for r in REGIME_ORDER],
                       default=Regime.NO_PEERING.value)
    p_sim.add_argument("--side", type=int, default=40)
    p_sim.add_argument("--trials", type=int, default=200)
    p_sim.add_argument("--seed", type=int, default=7)
    p_sim.add_argument("--trace", help="also write a per-connection CSV trace here")
    p_sim.set_defaults(fn=cmd_simulate)

    p_radio = subs.add_parser("radio", help="radio-physics helper formulas")
    _add_output_args(p_radio, formats=("json",))
    p_radio.add_argument("--snr", type=float, default=0.0)
    p_radio.add_argument("--alpha", type=float, default=1.0)
    p_radio.add_argument("--bt", type=float, default=1e6)
    p_radio.add_argument("--rb", type=float, default=1e4)
    p_radio.add_argument("--k", type=float, default=1.0)
    p_radio.add_argument("--freq", type=float, default=1.0)
    p_radio.add_argument("--exp", type=float, default=2.0)
    p_radio.add_argument("--dist", type=float, help="distance for the path-loss ratio")
    p_radio.set_defaults(fn=cmd_radio)

    p_val = subs.add_parser("validate", help="check a parameter file")
    _add_param_args(p_val)
    _add_output_args(p_val, formats=("json",))
    p_val.set_defaults(fn=cmd_validate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ParamError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericsError, SimulationError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except NoCrossing as exc:
        print(f"finding: {exc}", file=sys.stderr)
        return EXIT_FINDING
    except BoundaryOptimum as exc:
        print(f"finding: {exc}", file=sys.stderr)
        return EXIT_FINDING


if __name__ == "__main__":
    sys.exit(main())
