"""Command-line entry point.

Exit codes: 0 success, 2 validation failure, 3 breakdown, 4 internal error.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import writers
from .config import RunConfig, load_config, parse_config, serialize_config
from .diagnostics import DiagnosticsSink, build_report, ns_energy, report_apriori
from .errors import AdmissibilityError, BreakdownError, InternalConsistencyError, ValidationError
from .experiments import (
    grid_convergence,
    initial_layer_probe,
    make_initial,
    neo_hookean_sweep,
    tau_sweep,
    threshold_probe,
)
from .grid import GridSpec, NSField, l2_norm
from .model import CellState, admissibility_scan, characteristic_speeds, symmetrizer
from .ns import ViscosityLaw, limit_stress, run_ns
from .relaxed import run_relaxed

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_BREAKDOWN = 3
EXIT_INTERNAL = 4

SUBCOMMANDS = ("run", "run-ns", "sweep-tau", "sweep-neo", "converge", "probe-threshold", "probe-layer",
               "inspect-model")

logger = logging.getLogger("oldroyd1d")


def _snapshot_times(cfg: RunConfig):
    times = []
    for t in cfg.output.snapshot_times:
        k = t * cfg.output.cadence
        if t < 0 or t > cfg.control.t_end or abs(k - round(k)) > 1e-9 * max(1.0, abs(k)):
            if not math.isclose(t, cfg.control.t_end):
                raise ValidationError(
                    f"snapshot time {t!r} must be a multiple of 1/cadence within [0, t_end]",
                    key="Output.snapshot_times",
                )
        times.append(t)
    return times


class _SnapshotWriter:
    def __init__(self, outdir: Path, times, cadence):
        self.outdir = outdir
        self.pending = sorted(times)
        self.cadence = cadence
        self.written = []

    def __call__(self, field):
        for t in list(self.pending):
            if math.isclose(field.t, t, rel_tol=1e-12, abs_tol=1e-12):
                name = f"snapshot_{len(self.written):03d}.csv"
                writers.write_snapshot_csv(self.outdir / name, field)
                self.written.append({"file": name, "t": field.t})
                self.pending.remove(t)


def cmd_run(cfg: RunConfig, outdir: Path):
    p = cfg.phys
    initial = make_initial(cfg.initial, cfg.grid, p, with_conformation=p.G is not None)
    diag = DiagnosticsSink(p)
    snaps = _SnapshotWriter(outdir, _snapshot_times(cfg), cfg.output.cadence)
    res = run_relaxed(initial, p, cfg.control, sinks=[diag, snaps], sample_dt=cfg.sample_dt)
    report = build_report(diag.samples)
    writers.write_timeseries_csv(outdir / "timeseries.csv", report)
    scan = admissibility_scan(res.final, p)
    results = {
        "completed": res.completed,
        "steps": res.steps,
        "t_final": res.final.t,
        "E0": report.E[0],
        "supE": report.supE[-1],
        "cumD": report.cumD[-1],
        "max_abs_ledger_residual": float(np.max(np.abs(report.ledger_residual))),
        "E_phys_final": {"statement": report.E_phys[-1], "proof": report.E_phys_proof[-1]},
        "apriori_sup": float(np.max(report_apriori(report))) if report.E[0] > 0 else None,
        "final_admissibility": {
            "min_v": scan.min_v, "max_v": scan.max_v, "min_margin": scan.min_margin,
            "passed": scan.passed, "in_small_data_window": scan.in_small_data_window,
        },
        "snapshots": snaps.written,
        "solver_warnings": res.warnings,
        "timeseries": "timeseries.csv",
    }
    return (EXIT_OK if res.completed else EXIT_BREAKDOWN), results, res.breakdown


def cmd_run_ns(cfg: RunConfig, outdir: Path):
    p = cfg.phys
    law = ViscosityLaw("constant", p.mu) if p.G is None else ViscosityLaw("neo-limit", 2.0 * p.G * p.tau)
    initial = NSField.from_state(make_initial(cfg.initial, cfg.grid, p))
    rows = []

    def sink(f):
        rows.append((f.t, ns_energy(f, p), float(f.v.min()), float(f.v.max()),
                     l2_norm(limit_stress(f, law), f.grid.dx)))

    res = run_ns(initial, p, law, cfg.control, sinks=[sink], sample_dt=cfg.sample_dt)
    writers.write_ns_timeseries_csv(outdir / "ns_timeseries.csv", rows)
    results = {
        "completed": res.completed,
        "steps": res.steps,
        "t_final": res.final.t,
        "viscosity_law": {"kind": law.kind, "value": law.value},
        "energy_initial": rows[0][1],
        "energy_final": rows[-1][1],
        "timeseries": "ns_timeseries.csv",
    }
    return (EXIT_OK if res.completed else EXIT_BREAKDOWN), results, res.breakdown


def _sweep_result(report):
    status = EXIT_OK if report.completed else EXIT_BREAKDOWN
    return status, report.to_dict(), report.breakdown


def cmd_sweep_tau(cfg: RunConfig, outdir: Path):
    report = tau_sweep(cfg.initial, cfg.grid, cfg.phys, cfg.experiment.taus, cfg.control,
                       sample_dt=cfg.sample_dt, workers=cfg.experiment.workers)
    return _sweep_result(report)


def cmd_sweep_neo(cfg: RunConfig, outdir: Path):
    report = neo_hookean_sweep(cfg.initial, cfg.grid, cfg.experiment.mubar, cfg.experiment.Gs,
                               gamma=cfg.phys.gamma, B=cfg.phys.B, control=cfg.control,
                               sample_dt=cfg.sample_dt, workers=cfg.experiment.workers)
    return _sweep_result(report)


def cmd_converge(cfg: RunConfig, outdir: Path):
    ns = cfg.experiment.grids or (cfg.grid.N, 2 * cfg.grid.N, 4 * cfg.grid.N)
    grids = [GridSpec(L=cfg.grid.L, N=n) for n in ns]
    out = grid_convergence(cfg.initial, cfg.phys, grids, cfg.control, solver=cfg.experiment.solver,
                           dt_rule=cfg.experiment.dt_rule)
    return EXIT_OK, out, None


def cmd_probe_threshold(cfg: RunConfig, outdir: Path):
    e = cfg.experiment
    spec = cfg.initial.replace(preparation=e.probe_preparation)
    out = threshold_probe(cfg.grid, cfg.phys, e.ladder, spec=spec, t_probe=e.t_probe,
                          n_bisect=e.n_bisect, cfl=cfg.control.cfl, sample_dt=cfg.sample_dt)
    return EXIT_OK, out, None


def cmd_probe_layer(cfg: RunConfig, outdir: Path):
    out = initial_layer_probe(cfg.initial, cfg.grid, cfg.phys, cfg.experiment.layer_taus,
                              samples_per_tau=cfg.experiment.samples_per_tau)
    return EXIT_OK, out, None


COMMANDS = {
    "run": cmd_run,
    "run-ns": cmd_run_ns,
    "sweep-tau": cmd_sweep_tau,
    "sweep-neo": cmd_sweep_neo,
    "converge": cmd_converge,
    "probe-threshold": cmd_probe_threshold,
    "probe-layer": cmd_probe_layer,
}


def inspect_model(cfg: RunConfig, v: float, u: float, S: float, out=None) -> int:
    out = out or sys.stdout
    p = cfg.phys
    W = CellState(v=v, u=u, S=S)
    scan = admissibility_scan(np.array([v]), p, S=np.array([S]))
    print(f"state: v={v!r} u={u!r} S={S!r}", file=out)
    print(f"params: gamma={p.gamma!r} B={p.B!r} mu={p.mu!r} a={p.a!r} tau={p.tau!r} G={p.G!r}", file=out)
    print(f"admissible: {scan.passed} (v={scan.min_v!r}, 2*tau*a*S+mu={scan.min_margin!r})", file=out)
    print(f"small-relaxation regime tau < min(1, mu^2): {p.in_small_relaxation_regime}", file=out)
    if not scan.passed:
        print(f"violated: {', '.join(scan.violated)}", file=out)
        return EXIT_VALIDATION
    tri = symmetrizer(W, p)
    with np.printoptions(precision=17):
        for name in ("A0", "A1", "Bmat"):
            print(f"{name} =\n{getattr(tri, name)}", file=out)
    speeds = characteristic_speeds(W, p)
    print("characteristic speeds: " + ", ".join(repr(float(s)) for s in speeds), file=out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oldroyd1d", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="config file (defaults apply to missing keys)")
        sp.add_argument("--set", action="append", default=[], metavar="Section.key=value",
                        help="override one config key (repeatable)")
        if name == "inspect-model":
            sp.add_argument("--v", type=float, default=1.0)
            sp.add_argument("--u", type=float, default=0.0)
            sp.add_argument("--S", type=float, default=0.0)
        else:
            sp.add_argument("--out", help="output directory (overrides Output.output_dir)")
    return parser


def run_command(command: str, cfg: RunConfig, outdir: Path) -> int:
    """Execute one experiment subcommand and write its outputs into ``outdir``."""
    outdir.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    status, results, breakdown = COMMANDS[command](cfg, outdir)
    (outdir / "config.ini").write_text(serialize_config(cfg))
    writers.write_summary(outdir / "summary.json", command, cfg.echo(), results,
                          warnings=cfg.warnings(), breakdown=breakdown)
    writers.write_metadata(outdir / "metadata.json", time.perf_counter() - start)
    return status


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        overrides = list(args.set)
        if getattr(args, "out", None):
            overrides.append(f"Output.output_dir={args.out}")
        cfg = load_config(args.config, overrides) if args.config else parse_config("", overrides)
        for msg in cfg.warnings():
            logger.warning(msg)
        if args.command == "inspect-model":
            return inspect_model(cfg, args.v, args.u, args.S)
        return run_command(args.command, cfg, Path(cfg.output.output_dir))
    except (ValidationError, AdmissibilityError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except BreakdownError as exc:
        print(f"breakdown: {exc}", file=sys.stderr)
        return EXIT_BREAKDOWN
    except (InternalConsistencyError, Exception) as exc:  # noqa: BLE001
        logger.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
