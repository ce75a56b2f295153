"""Command-line entry point: ``magnon-duet simulate|lz-validate|sweep|analyze``.

Exit codes
----------
0 success, 1 invalid input file, 2 integration failure, 3 I/O failure,
4 Landau-Zener validation failure, 5 every sweep point failed.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .analysis import lz_sweep_point
from .integrator import IntegrationError
from .physics import DomainError
from .scenario import LZGrid, Scenario, ScenarioError, SweepSpec
from .signal import read_signal_csv

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_INTEGRATION = 2
EXIT_IO = 3
EXIT_LZ = 4
EXIT_SWEEP = 5

THREADS_ENV = "MAGNON_DUET_THREADS"
LZ_COLUMNS = ("omega_hz", "rate_hz_per_s", "predicted", "observed", "abs_err")

log = logging.getLogger("magnon_duet")


def _load(loader, path):
    """Parse an input file, mapping failures onto exit codes."""
    try:
        return loader(path), EXIT_OK
    except (ScenarioError, DomainError) as exc:
        log.error("invalid %s: %s", path, exc)
        return None, EXIT_INVALID
    except json.JSONDecodeError as exc:
        log.error("invalid %s: not JSON (%s)", path, exc)
        return None, EXIT_INVALID
    except OSError as exc:
        log.error("cannot read %s: %s", path, exc)
        return None, EXIT_IO


def cmd_simulate(scenario_file, out_dir, plots=True) -> int:
    from .pipeline import run_simulation

    scenario, code = _load(Scenario.load, scenario_file)
    if scenario is None:
        return code
    try:
        report = run_simulation(scenario, out_dir, plots=plots)
    except IntegrationError as exc:
        log.error("integration failed: %s (last state at t=%.6g s)", exc, exc.last_state.t)
        return EXIT_INTEGRATION
    except OSError as exc:
        log.error("cannot write outputs: %s", exc)
        return EXIT_IO
    if report.get("crossing_found"):
        log.info("crossing at %.4g s, predicted %.3f, observed %s", report["crossing_time_s"],
                 report["predicted_fraction"] or float("nan"), report["observed_fraction"])
    return EXIT_OK


def cmd_lz_validate(grid_file, out_dir) -> int:
    grid, code = _load(LZGrid.load, grid_file)
    if grid is None:
        return code
    rows = []
    try:
        for omega_hz, rate in grid.points():
            p = lz_sweep_point(omega_hz, rate, span=grid.span, rel_tol=grid.rel_tol,
                               abs_tol=grid.abs_tol)
            rows.append((p.omega_hz, p.rate_hz_per_s, p.predicted, p.observed, p.abs_err))
    except IntegrationError as exc:
        log.error("integration failed: %s", exc)
        return EXIT_INTEGRATION
    try:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "lz_grid.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(LZ_COLUMNS)
            for row in rows:
                writer.writerow([repr(float(v)) for v in row])
    except OSError as exc:
        log.error("cannot write outputs: %s", exc)
        return EXIT_IO
    worst = max(r[4] for r in rows)
    log.info("%d points, max abs_err %.3g (limit %.3g)", len(rows), worst, grid.max_abs_err)
    return EXIT_LZ if worst > grid.max_abs_err else EXIT_OK


def _sweep_point(args):
    """Worker body; returns ``(name, status, report, note)``."""
    from .pipeline import run_simulation

    name, data, out_dir, plots = args
    try:
        scenario = Scenario.from_dict(data)
        report = run_simulation(scenario, Path(out_dir) / name, plots=plots)
        return name, "ok", report, ""
    except IntegrationError as exc:
        return name, "integration_error", {}, str(exc)
    except (ScenarioError, DomainError) as exc:
        return name, "invalid", {}, str(exc)
    except OSError as exc:
        return name, "io_error", {}, str(exc)
    except Exception as exc:  # a failed point must not sink the sweep
        return name, "error", {}, f"{type(exc).__name__}: {exc}"


def worker_count(requested: int) -> int:
    cap = os.environ.get(THREADS_ENV)
    n = max(1, int(requested))
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            log.warning("ignoring non-integer %s=%r", THREADS_ENV, cap)
    return n


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(float(value))
    if isinstance(value, (list, tuple)):
        return ";".join(_cell(v) for v in value)
    return str(value)


def cmd_sweep(sweep_file, out_dir, workers=None, plots=True) -> int:
    spec, code = _load(SweepSpec.load, sweep_file)
    if spec is None:
        return code
    n_workers = worker_count(workers if workers is not None else spec.workers)
    points = spec.points()
    log.info("sweep of %d points on %d worker(s)", spec.size, n_workers)
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        log.error("cannot create %s: %s", out, exc)
        return EXIT_IO
    jobs = [(name, data, str(out), plots) for name, data in points]
    if n_workers == 1:
        results = [_sweep_point(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(_sweep_point, jobs))

    axis_paths = [path for path, _ in spec.axes]
    fields = sorted({k for _, _, report, _ in results for k in report})
    try:
        with open(out / "summary.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["point", "status", *axis_paths, *fields, "note"])
            for (name, status, report, note), (_, data) in zip(results, points):
                values = [_lookup(data, p) for p in axis_paths]
                writer.writerow([name, status, *map(_cell, values),
                                 *(_cell(report.get(f)) for f in fields), note])
    except OSError as exc:
        log.error("cannot write summary: %s", exc)
        return EXIT_IO
    ok = sum(1 for r in results if r[1] == "ok")
    log.info("%d of %d points succeeded", ok, len(results))
    return EXIT_OK if ok else EXIT_SWEEP


def _lookup(data, path):
    node = data
    for key in path.split("."):
        node = node[key]
    return node


def cmd_analyze(signal_file, scenario_file, out_dir, plots=True) -> int:
    from .pipeline import run_analysis

    scenario, code = _load(Scenario.load, scenario_file)
    if scenario is None:
        return code
    try:
        sig = read_signal_csv(signal_file)
    except OSError as exc:
        log.error("cannot read %s: %s", signal_file, exc)
        return EXIT_IO
    except ValueError as exc:
        log.error("invalid signal %s: %s", signal_file, exc)
        return EXIT_INVALID
    try:
        run_analysis(sig, scenario, out_dir, plots=plots)
    except OSError as exc:
        log.error("cannot write outputs: %s", exc)
        return EXIT_IO
    except ValueError as exc:
        log.error("analysis failed: %s", exc)
        return EXIT_INVALID
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="magnon-duet", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a scenario and analyse its signal")
    p.add_argument("scenario")
    p.add_argument("--out", required=True)
    p.add_argument("--no-plots", action="store_true")

    p = sub.add_parser("lz-validate", help="check simulated Landau-Zener transfer on a grid")
    p.add_argument("grid")
    p.add_argument("--out", required=True)

    p = sub.add_parser("sweep", help="run a scenario over a parameter grid")
    p.add_argument("spec")
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--no-plots", action="store_true")

    p = sub.add_parser("analyze", help="spectral and coupling analysis of a signal CSV")
    p.add_argument("signal")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-plots", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    if args.command == "simulate":
        return cmd_simulate(args.scenario, args.out, plots=not args.no_plots)
    if args.command == "lz-validate":
        return cmd_lz_validate(args.grid, args.out)
    if args.command == "sweep":
        return cmd_sweep(args.spec, args.out, args.workers, plots=not args.no_plots)
    return cmd_analyze(args.signal, args.scenario, args.out, plots=not args.no_plots)


if __name__ == "__main__":
    sys.exit(main())
