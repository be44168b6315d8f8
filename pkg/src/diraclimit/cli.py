"""Command-line entry point.

Exit status: 0 when every check of the command passes, 1 when a check fails
(a ``failure.json`` explains which), 2 for usage or configuration errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .dirac_solver import InnerAbort, initial_guess, outer_minimize
from .inequalities import report_json, run_suite
from .limit_harness import consistency_report, fit_decay_rate, records_to_csv, run_sweep
from .nls import gaussian_two_spinor, nls_ground_state
from .nonlinearity import build_potentials
from .snapshot import read_snapshot, write_snapshot
from .spectral import GridSpec, norm

log = logging.getLogger("diraclimit")

COMMANDS = ("solve-dirac", "solve-nls", "limit-sweep", "check-inequalities", "decay-fit")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class _Run:
    """Output directory bookkeeping shared by all commands."""

    def __init__(self, command: str, cfg: RunConfig, trace: bool):
        self.command = command
        self.cfg = cfg
        self.trace = trace
        self.out = Path(cfg.output_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.hash = cfg.config_hash()
        self.failures: list[dict] = []
        self.started = datetime.now(timezone.utc)

    def path(self, name: str) -> Path:
        return self.out / name

    def write_json(self, name: str, payload: dict) -> None:
        body = {"config_hash": self.hash, **payload}
        self.path(name).write_text(json.dumps(_finite(body), indent=2, sort_keys=True) + "\n")

    def write_text(self, name: str, text: str) -> None:
        self.path(name).write_text(text)

    def check(self, name: str, ok: bool, **detail) -> None:
        if not ok:
            self.failures.append({"check": name, **_finite(detail)})

    def finish(self) -> int:
        cfg_dump = self.cfg.model_dump(mode="json", exclude={"output_dir"})
        self.path("config.json").write_text(json.dumps(cfg_dump, indent=2, sort_keys=True) + "\n")
        # timestamps live here only, so every other file is reproducible byte for byte
        meta = {
            "command": self.command,
            "config_hash": self.hash,
            "version": __version__,
            "started": self.started.isoformat(),
            "finished": datetime.now(timezone.utc).isoformat(),
        }
        self.path("metadata.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        if self.failures:
            self.write_json("failure.json", {"command": self.command, "failures": self.failures})
            for f in self.failures:
                log.error("check failed: %s", f["check"])
            return EXIT_FAIL
        stale = self.path("failure.json")
        if stale.exists():
            stale.unlink()
        return EXIT_OK


def _finite(x):
    """JSON has no inf/nan; spell them as strings."""
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    if isinstance(x, dict):
        return {k: _finite(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_finite(v) for v in x]
    if isinstance(x, np.generic):
        return _finite(x.item())
    return x


def _gnuplot(csv_name: str, title: str, ylabel: str, column: str, logscale: bool, png: str) -> str:
    lines = [
        f"# {title}",
        "set datafile separator ','",
        "set key autotitle columnhead",
        f"set title '{title}'",
        "set xlabel 'c'",
        f"set ylabel '{ylabel}'",
    ]
    if logscale:
        lines.append("set logscale xy")
    lines += [
        "set terminal pngcairo size 800,600",
        f"set output '{png}'",
        f"plot '{csv_name}' using (column('c')):(column('{column}')) with linespoints",
        "",
    ]
    return "\n".join(lines)


def cmd_solve_dirac(run: _Run) -> None:
    cfg = run.cfg
    grid, p = cfg.grid_spec(), cfg.phys()
    pot = build_potentials(grid, p)
    trace = str(run.path("dirac_trace.csv")) if run.trace else None
    res = outer_minimize(initial_guess(grid, pot, p, cfg.solver.guess_width), pot, p, cfg.minmax(trace))
    write_snapshot(run.path("u.dspn"), res.u, grid)
    gap = p.rest_energy - res.omega
    run.write_json(
        "dirac.json",
        {
            "c": p.c,
            "omega": res.omega,
            "gap": gap,
            "energy": res.energy,
            "residual": res.residual,
            "converged": res.converged,
            "outer_iterations": res.outer_iterations,
            "inner_iterations": res.inner_iterations,
            "message": res.message,
        },
    )
    run.check("converged", res.converged, residual=res.residual, tol=cfg.solver.outer_tol)
    run.check("multiplier_window", 0 < res.omega < p.rest_energy, omega=res.omega, rest_energy=p.rest_energy)


def cmd_solve_nls(run: _Run) -> None:
    cfg = run.cfg
    grid, p = cfg.grid_spec(), cfg.phys()
    pot = build_potentials(grid, p)
    res = nls_ground_state(gaussian_two_spinor(grid, cfg.solver.guess_width), pot, p, cfg.nls())
    write_snapshot(run.path("h.dspn"), res.h, grid)
    run.write_json(
        "nls.json",
        {"nu": res.nu, "energy": res.energy, "residual": res.residual, "iterations": res.iterations, "converged": res.converged},
    )
    run.check("converged", res.converged, residual=res.residual, tol=cfg.solver.nls_tol)
    mass = norm(res.h, grid)
    run.check("unit_mass", abs(mass - 1) <= 1e-8, mass=mass)


def cmd_limit_sweep(run: _Run) -> None:
    cfg = run.cfg
    grid, p = cfg.grid_spec(), cfg.phys()
    pot = build_potentials(grid, p)
    trace = str(run.path("dirac_trace.csv")) if run.trace else None
    outcome = run_sweep(cfg.params.c_list, pot, p, cfg.minmax(trace), cfg.nls(), cfg.tolerances())
    run.write_text("sweep.csv", records_to_csv(outcome.records, f"config_hash={run.hash}"))
    write_snapshot(run.path("h.dspn"), outcome.nls.h, grid)
    for s in outcome.solves:
        write_snapshot(run.path(f"u_c{s.c:g}.dspn"), s.u, grid)
    figures = [
        ("gap.gp", "gap mc^2 - omega versus c", "gap", "gap", False, "gap.png"),
        ("g_norm.gp", "lower spinor H1 norm versus c", "||g_c||_H1", "g_H1", True, "g_norm.png"),
        ("f_dist.gp", "aligned H1 distance to the Schrodinger ground state", "||f_c - h||_H1", "f_dist_H1", True, "f_dist.png"),
    ]
    for name, title, ylabel, column, logscale, png in figures:
        run.write_text(name, _gnuplot("sweep.csv", title, ylabel, column, logscale, png))
    nls_info = {"nu": outcome.nls.nu, "energy": outcome.nls.energy, "residual": outcome.nls.residual}
    run.check("nls_converged", outcome.nls.converged, **nls_info)
    failed_c = [r.c for r in outcome.records if not r.converged]
    run.check("all_converged", not failed_c, failed_c=failed_c)
    try:
        report = consistency_report(outcome.records, outcome.nls.nu, p.m, cfg.tolerances())
    except ValueError as exc:
        run.write_json("report.json", {"nls": nls_info, "error": str(exc)})
        run.check("consistency_report", False, error=str(exc))
        return
    run.write_json("report.json", {"nls": nls_info, **report})
    for name, verdict in report["checks"].items():
        run.check(name, verdict["pass"], **{k: v for k, v in verdict.items() if k != "pass"})


def cmd_check_inequalities(run: _Run) -> None:
    cfg = run.cfg
    q = cfg.inequalities
    grid, p = GridSpec(q.n, cfg.grid.half_width), cfg.phys()
    pot = build_potentials(grid, p)
    report = run_suite(pot, p, cfg.seed, q.n_samples, q.growth_max, q.homogeneity_tol, q.cutoff_fraction)
    run.write_text("inequalities.json", report_json({"config_hash": run.hash, **report}) + "\n")
    for name, verdict in report["checks"].items():
        run.check(name, verdict["pass"], stability_ratio=verdict["stability_ratio"])


def cmd_decay_fit(run: _Run, source: str | None) -> None:
    cfg = run.cfg
    tol = cfg.tolerances()
    a_n = None
    if source:
        u, grid = read_snapshot(source)
    else:
        grid, p = cfg.grid_spec(), cfg.phys()
        pot = build_potentials(grid, p)
        res = outer_minimize(initial_guess(grid, pot, p, cfg.solver.guess_width), pot, p, cfg.minmax())
        run.check("converged", res.converged, residual=res.residual)
        u = res.u
        mc2 = p.rest_energy
        a_n = (mc2 - res.omega) * (mc2 + res.omega) / p.c**2
    fit = fit_decay_rate(u, grid, tol.decay_window, tol.r2_min)
    payload = {"delta": fit.delta, "r2": fit.r2, "bins": fit.bins, "source": "snapshot" if source else "solve"}
    run.check("fit_linear", fit.linear, r2=fit.r2, r2_min=tol.r2_min)
    if a_n is not None:
        bound = tol.decay_factor * math.sqrt(a_n)
        payload.update(a_n=a_n, bound=bound)
        run.check("decay_rate", fit.delta >= bound, delta=fit.delta, bound=bound)
    run.write_json("decay.json", payload)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="diraclimit", description="Nonrelativistic-limit experiments for a nonlinear Dirac equation.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file (defaults apply when omitted)")
    common.add_argument("--out", help="output directory (overrides output_dir)")
    common.add_argument("--seed", type=int, help="random seed (overrides seed)")
    common.add_argument("--trace", action="store_true", help="write per-iteration solver traces")
    common.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "decay-fit":
            sp.add_argument("--input", help="fit this .dspn snapshot instead of solving")
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        updates = {}
        if args.out is not None:
            updates["output_dir"] = args.out
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError(f"seed must be a u64, got {args.seed}")
            updates["seed"] = args.seed
        if updates:
            cfg = cfg.model_copy(update=updates)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    run = _Run(args.command, cfg, args.trace)
    t0 = time.perf_counter()
    try:
        if args.command == "solve-dirac":
            cmd_solve_dirac(run)
        elif args.command == "solve-nls":
            cmd_solve_nls(run)
        elif args.command == "limit-sweep":
            cmd_limit_sweep(run)
        elif args.command == "check-inequalities":
            cmd_check_inequalities(run)
        else:
            cmd_decay_fit(run, args.input)
    except (InnerAbort, FloatingPointError, AssertionError, ValueError) as exc:
        run.check("exception", False, type=type(exc).__name__, error=str(exc))
    log.info("%s finished in %.1f s", args.command, time.perf_counter() - t0)
    return run.finish()


if __name__ == "__main__":
    sys.exit(main())
