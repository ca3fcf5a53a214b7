"""``gaussbec`` command-line front end.

Exit codes: 0 success, 2 configuration error, 3 physics-domain error
(instability), 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys

from .config import ConfigError, RunConfig, load_config
from .gaussian import StandardFormError, UnphysicalCovarianceError
from .model import critical_coupling, extended_space_limit, normal_modes, validate
from .output import render_csv, render_json, write_atomic
from .propagator import UnstableParametersError
from .runs import SWEEP_COLUMNS, TIMESERIES_COLUMNS, run_sweep, run_timeseries
from .spin import KrylovConvergenceError

EXIT_OK, EXIT_CONFIG, EXIT_PHYSICS, EXIT_NUMERICAL = 0, 2, 3, 4

SWEEP_NOTE = (
    "min_xi is the minimum of xi reached during the evolution "
    "(over t in [0, t_max], or the long-time infimum when window is long_time); "
    "smaller xi means stronger entanglement, so this is the most entangled point, not the maximum of xi"
)


log = logging.getLogger("gaussbec")


def _finite(x):
    return x if isinstance(x, float) and math.isfinite(x) else None


def stability_report(config: RunConfig) -> dict:
    params = config.model_params()
    modes = normal_modes(params)
    report = validate(params)
    out = {
        "kappa": params.kappa,
        "kappa_c": critical_coupling(params),
        "kappa_e": extended_space_limit(params),
        "omega_1": modes.omega_1,
        "omega_2": modes.omega_2,
        "omega_2_imag": modes.omega_2_imag,
        "mu_1": _finite(modes.mu_1),
        "mu_2": _finite(modes.mu_2),
        "stable": modes.stable,
        "degenerate": modes.degenerate,
        "status": report.status,
        "warnings": report.warnings,
        "errors": report.errors,
    }
    if modes.degenerate:
        out["note"] = "kappa = 0: the two species evolve independently (decoupled normal modes)"
    return out


def cmd_stability(config: RunConfig, args) -> int:
    report = stability_report(config)
    text = json.dumps(report, indent=2) + "\n"
    if args.out:
        write_atomic(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _emit(text: str, out) -> None:
    if out:
        write_atomic(out, text)
    else:
        sys.stdout.write(text)


def cmd_timeseries(config: RunConfig, args) -> int:
    rows = run_timeseries(config)
    params = config.model_params()
    header = {
        "kappa_c": critical_coupling(params),
        "kappa_e": extended_space_limit(params),
        "backend": config.backend,
        "initial": config.initial.kind,
    }
    if config.output.format == "json":
        text = render_json(rows, TIMESERIES_COLUMNS, header)
    else:
        text = render_csv(rows, TIMESERIES_COLUMNS)
    _emit(text, config.output.path)
    return EXIT_OK


def cmd_sweep(config: RunConfig, args) -> int:
    if config.backend != "hpt":
        log.info("sweep always uses the oscillator backend")
    rows = run_sweep(config)
    if not any(r.stable for r in rows):
        raise UnstableParametersError("every kappa in the grid is unstable")
    params = config.model_params()
    header = {
        "kappa_c": critical_coupling(params),
        "kappa_e": extended_space_limit(params),
        "window": config.sweep_window,
        "t_max": config.t_max if config.sweep_window == "grid" else None,
        "note": SWEEP_NOTE,
    }
    if config.output.format == "json":
        text = render_json(rows, SWEEP_COLUMNS, header)
    else:
        comments = [
            f"{k}={v:.12g}" if isinstance(v, float) else f"{k}: {v}" for k, v in header.items() if v is not None
        ]
        text = render_csv(rows, SWEEP_COLUMNS, comments)
    _emit(text, config.output.path)
    return EXIT_OK


COMMANDS = {"stability": cmd_stability, "timeseries": cmd_timeseries, "sweep": cmd_sweep}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gaussbec", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--out", help="output file (default: config output.path, else stdout)")
    parser.add_argument("--format", choices=["csv", "json"])
    parser.add_argument("--backend", choices=["hpt", "exact", "both"])
    parser.add_argument("--jobs", type=int)
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def apply_overrides(config: RunConfig, args) -> RunConfig:
    data = config.model_dump()
    if args.out:
        data["output"]["path"] = args.out
    if args.format:
        data["output"]["format"] = args.format
    if args.backend:
        data["backend"] = args.backend
    if args.jobs is not None:
        data["jobs"] = args.jobs
    try:
        return RunConfig.model_validate(data)
    except Exception as exc:
        raise ConfigError(str(exc)) from exc


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")

    try:
        config = apply_overrides(load_config(args.config), args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        return COMMANDS[args.command](config, args)
    except UnstableParametersError as exc:
        print(f"unstable parameters: {exc}", file=sys.stderr)
        return EXIT_PHYSICS
    except KrylovConvergenceError as exc:
        print(f"numerical failure: {exc} (achieved error bound {exc.error_bound:.3g})", file=sys.stderr)
        return EXIT_NUMERICAL
    except (StandardFormError, UnphysicalCovarianceError, MemoryError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
