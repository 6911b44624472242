"""Command line driver.

    mpnsch run <config>                 run a simulation, write diagnostics.csv and snapshots
    mpnsch scenario <name> [--emit-config]
    mpnsch sweep <config>               deep-quench sweep (logarithmic vs obstacle)
    mpnsch check <config>               parse and validate only

Exit codes: 0 ok, 2 configuration error, 3 solver failure, 4 ledger violation.
``MPNSCH_OUTDIR`` overrides ``io.output``.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
import time
from pathlib import Path

from . import diagnostics
from .config import RunConfig, parse_config, render_config
from .errors import ConfigError, MpnschError, SolverError
from .io import CsvLog, report_row, write_vtk
from .obstacle import complementarity_check, deep_quench_sweep
from .scenarios import describe, initial_state, scenario
from .stepper import step

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_LEDGER = 0, 2, 3, 4

log = logging.getLogger("mpnsch")


def output_dir(cfg: RunConfig) -> Path:
    return Path(os.environ.get("MPNSCH_OUTDIR") or cfg.io.output)


def _describe_report(k, rep):
    return (f"step {k}: t={rep.t:.6g} h={rep.h:.3g} E={rep.energy_new.total:.12g} "
            f"slack={rep.slack:.3e} (tol {rep.tol_slack:.1e}) mass drift={rep.mass_change:.3e} "
            f"picard={rep.picard_iters} newton={rep.newton_iters} pdas={rep.pdas_iters}")


def run(cfg: RunConfig, err=None) -> int:
    """Run the configured simulation; returns the exit code."""
    err = err or sys.stderr
    out = output_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(render_config(cfg))
    params = cfg.build_params()
    scfg = cfg.build_step_config()
    state = initial_state(cfg)
    mass0 = diagnostics.mass(state)
    stride = cfg.io.snapshot_stride
    if stride:
        write_vtk(out / "snap_0.vtk", state)
    first_bad = None
    with CsvLog(out / "diagnostics.csv") as csvlog:
        for k in range(1, cfg.stepping.n_steps + 1):
            try:
                state, rep = step(state, params, scfg)
            except (SolverError, MpnschError) as exc:
                print(f"solver failure at step {k}: {type(exc).__name__}: {exc}", file=err)
                report = getattr(exc, "report", None)
                if report:
                    print(f"report: {report}", file=err)
                return EXIT_SOLVER
            if k % cfg.io.csv_stride == 0 or k == cfg.stepping.n_steps:
                csvlog.write(report_row(k, rep, mass0))
            if stride and k % stride == 0:
                write_vtk(out / f"snap_{k}.vtk", state)
            log.info(_describe_report(k, rep))
            problems = []
            if not rep.passed:
                problems.append("energy ledger slack below tolerance")
            if params.potential.is_obstacle:
                comp = complementarity_check(state.phi, state.xi, 1e-8)
                if not comp.passed:
                    problems.append(f"complementarity: {comp.violations[0]}")
            if problems and first_bad is None:
                first_bad = (k, rep, problems)
    if first_bad is not None:
        k, rep, problems = first_bad
        print(f"ledger violation ({'; '.join(problems)})", file=err)
        print(_describe_report(k, rep), file=err)
        return EXIT_LEDGER
    return EXIT_OK


def sweep(cfg: RunConfig, out_stream=None) -> int:
    out_stream = out_stream or sys.stdout
    params = cfg.build_params()
    state0 = initial_state(cfg)
    table = deep_quench_sweep(state0, params, cfg.sweep.thetas, cfg.stepping.n_steps,
                              cfg.build_step_config())
    out = output_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["theta", "l2_error"])
        for th, e in table.rows():
            w.writerow([repr(th), repr(e)])
    print("theta        ||phi_theta - phi_obstacle||", file=out_stream)
    for th, e in table.rows():
        print(f"{th:<12.6g} {e:.6e}", file=out_stream)
    print(f"strictly decreasing: {'yes' if table.monotone else 'no'}", file=out_stream)
    return EXIT_OK


def _load(path) -> RunConfig:
    text = Path(path).read_text(encoding="utf-8")
    return parse_config(text)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="mpnsch", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="log every step")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run a simulation from a config file")
    p.add_argument("config")
    p = sub.add_parser("scenario", help="describe or emit a shipped scenario")
    p.add_argument("name")
    p.add_argument("--emit-config", action="store_true", help="print the scenario's config file")
    p = sub.add_parser("sweep", help="deep-quench sweep for a config")
    p.add_argument("config")
    p = sub.add_parser("check", help="validate a config file")
    p.add_argument("config")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s", stream=sys.stderr)
    try:
        if args.command == "scenario":
            cfg = scenario(args.name)
            if args.emit_config:
                sys.stdout.write(render_config(cfg))
            else:
                print(f"{args.name}: {describe(args.name)}")
                print("(use --emit-config for the full configuration)")
            return EXIT_OK
        cfg = _load(args.config)
        if args.command == "check":
            sys.stdout.write(render_config(cfg))
            return EXIT_OK
        if args.command == "run":
            t0 = time.perf_counter()
            code = run(cfg)
            log.info("finished in %.1f s with exit code %d", time.perf_counter() - t0, code)
            return code
        return sweep(cfg)
    except (ConfigError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
