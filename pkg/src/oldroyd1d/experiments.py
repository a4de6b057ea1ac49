"""Relaxation-limit, convergence and stability experiments.

Every sweep builds its initial data once per grid and hands each parameter
point a copy, and all runs of a sweep share the same sample times so that
errors are always compared at coincident instants.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .diagnostics import DiagnosticsSink, SnapshotSink, report_apriori, sobolev_energy
from .errors import BreakdownError, ValidationError
from .grid import GridSpec, NSField, StateField, StepControl, ddx, l2_norm
from .model import PhysParams, max_wave_speed
from .ns import ViscosityLaw, limit_stress, run_ns
from .relaxed import check_state, run_relaxed

logger = logging.getLogger(__name__)

FAMILIES = ("gaussian-bump", "single-mode", "custom-table")
PREPARATIONS = ("well-prepared", "ill-prepared")


@dataclass(frozen=True)
class InitialDataSpec:
    """Initial perturbation of the rest state ``(v, u, S) = (1, 0, 0)``.

    The shape ``phi`` is ``sin(mode * pi * x / L)`` (single-mode) or a Gaussian
    of width ``width`` centred at ``center`` (gaussian-bump); then
    ``v0 = 1 + amplitude * v_weight * phi`` and ``u0 = amplitude * u_weight * phi``.
    ``custom-table`` reads columns ``v,u[,S]`` from ``table`` (one row per node)
    and adds ``noise * N(0,1)`` drawn with ``seed`` to ``u``.
    """

    family: str = "single-mode"
    amplitude: float = 1e-3
    width: float = 0.5
    preparation: str = "well-prepared"
    mode: int = 1
    center: float = 0.0
    v_weight: float = 0.0
    u_weight: float = 1.0
    table: str = ""
    noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValidationError(f"family must be one of {FAMILIES}, got {self.family!r}",
                                  key="InitialDataSpec.family")
        if self.preparation not in PREPARATIONS:
            raise ValidationError(f"preparation must be one of {PREPARATIONS}, got {self.preparation!r}",
                                  key="InitialDataSpec.preparation")
        if not self.amplitude >= 0:
            raise ValidationError(f"amplitude must be >= 0, got {self.amplitude!r}",
                                  key="InitialDataSpec.amplitude")
        if not self.width > 0:
            raise ValidationError(f"width must be > 0, got {self.width!r}", key="InitialDataSpec.width")
        if self.family == "custom-table" and not self.table:
            raise ValidationError("custom-table needs a table path", key="InitialDataSpec.table")
        if self.noise < 0:
            raise ValidationError("noise must be >= 0", key="InitialDataSpec.noise")

    def replace(self, **changes) -> "InitialDataSpec":
        d = asdict(self)
        d.update(changes)
        return InitialDataSpec(**d)


def _read_table(path, n):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if len(rows) != n:
        raise ValidationError(f"table has {len(rows)} rows, grid has {n} nodes", key="InitialDataSpec.table")
    cols = {k: np.array([float(r[k]) for r in rows]) for k in rows[0]}
    if "v" not in cols or "u" not in cols:
        raise ValidationError("table needs columns v and u", key="InitialDataSpec.table")
    return cols


def make_initial(spec: InitialDataSpec, grid: GridSpec, p: PhysParams,
                 with_conformation: bool = False) -> StateField:
    """Build periodic initial data; ``with_conformation`` also sets ``A`` (needs ``p.G``)."""
    x = grid.x
    S0 = None
    if spec.family == "single-mode":
        phi = np.sin(spec.mode * math.pi * x / grid.L)
    elif spec.family == "gaussian-bump":
        # nearest periodic image so the bump is smooth across the boundary
        r = (x - spec.center + grid.L) % (2 * grid.L) - grid.L
        phi = np.exp(-0.5 * (r / spec.width) ** 2)
    else:
        phi = None
    if phi is not None:
        v0 = 1.0 + spec.amplitude * spec.v_weight * phi
        u0 = spec.amplitude * spec.u_weight * phi
    else:
        cols = _read_table(spec.table, grid.N)
        v0, u0 = cols["v"], cols["u"].copy()
        S0 = cols.get("S")
        if spec.noise > 0:
            u0 = u0 + spec.noise * np.random.default_rng(spec.seed).standard_normal(grid.N)
    if np.any(~(v0 > 0)):
        idx = int(np.flatnonzero(~(v0 > 0))[0])
        raise ValidationError(
            f"amplitude {spec.amplitude!r} gives v0 <= 0 at node {idx}", key="InitialDataSpec.amplitude"
        )
    if spec.preparation == "well-prepared":
        S0 = p.viscosity(v0) * ddx(u0, grid.dx) / v0
    elif S0 is None:
        S0 = np.zeros(grid.N)
    A0 = None
    if with_conformation:
        if p.G is None:
            raise ValidationError("conformation variable requires PhysParams.G")
        A0 = (S0 / p.G + 1.0 / v0) / v0
        if np.any(~(A0 > 0)):
            raise ValidationError("initial stress gives a non-positive conformation A0")
    field0 = StateField(grid, v0, u0, S0, A0)
    logger.debug("initial data E0=%r", sobolev_energy(field0, p).E)
    return field0


def fitted_slope(params, errors) -> float:
    """Least-squares slope of ``log(error)`` against ``log(param)``."""
    x = np.log(np.asarray(params, dtype=float))
    errors = np.asarray(errors, dtype=float)
    if x.size < 3 or not np.all(errors > 0) or not np.all(np.isfinite(errors)):
        return float("nan")
    y = np.log(errors)
    return float(np.polyfit(x, y, 1)[0])


def strictly_decreasing(values) -> bool:
    values = np.asarray(values, dtype=float)
    return bool(np.all(np.isfinite(values)) and np.all(np.diff(values) < 0))


@dataclass
class SweepReport:
    """Per-parameter error table of a sweep.

    ``values`` are ordered so that the limit is approached along the list;
    ``monotone_*`` flags require strict decrease along that order.
    """

    parameter: str
    values: list
    e_sup: list = field(default_factory=list)
    e_final: list = field(default_factory=list)
    defect: list = field(default_factory=list)
    apriori_sup: list = field(default_factory=list)
    slope_e: float = float("nan")
    slope_d: float = float("nan")
    monotone_e: bool = False
    monotone_d: bool = False
    completed: bool = True
    breakdown: Optional[dict] = None
    extras: dict = field(default_factory=dict)

    def finalize(self, slope_axis=None):
        axis = self.values if slope_axis is None else slope_axis
        n = len(self.e_sup)
        self.monotone_e = n == len(self.values) and strictly_decreasing(self.e_sup)
        self.monotone_d = n == len(self.values) and strictly_decreasing(self.defect)
        if n == len(self.values):
            self.slope_e = fitted_slope(axis, self.e_sup)
            self.slope_d = fitted_slope(axis, self.defect)
        return self

    def to_dict(self) -> dict:
        return asdict(self)


def _validate_sweep_values(values, name, descending=True):
    values = [float(x) for x in values]
    if len(values) < 3:
        raise ValidationError(f"{name} needs at least 3 values, got {len(values)}")
    if any(not x > 0 for x in values):
        raise ValidationError(f"{name} values must be > 0")
    diffs = np.diff(values)
    if descending and not np.all(diffs < 0):
        raise ValidationError(f"{name} must be strictly descending, got {values}")
    if not descending and not np.all(diffs > 0):
        raise ValidationError(f"{name} must be strictly increasing, got {values}")
    return values


def _relaxed_job(args):
    initial, p, control, sample_dt = args
    diag = DiagnosticsSink(p)
    snaps = SnapshotSink()
    result = run_relaxed(initial.copy(), p, control, sinks=[diag, snaps], sample_dt=sample_dt)
    return result, diag.samples, snaps.snapshots


def _map(jobs, workers):
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_relaxed_job, jobs))
    return [_relaxed_job(j) for j in jobs]


def _reference_ns(initial: StateField, p, law, control, sample_dt, dt_max):
    snaps = SnapshotSink()
    result = run_ns(NSField.from_state(initial), p, law, control.replace(dt_max=dt_max),
                    sinks=[snaps], sample_dt=sample_dt)
    return result, snaps.snapshots


def _compare(relaxed_snaps, ref_snaps, p, t_skip):
    """Sup-in-time and final L2 errors of (v, u) plus the stress defect."""
    errs, defects = [], []
    for fr, fn in zip(relaxed_snaps, ref_snaps):
        if fr.t != fn.t:
            raise RuntimeError(f"sample times differ: {fr.t!r} vs {fn.t!r}")
        dx = fr.grid.dx
        errs.append(math.hypot(l2_norm(fr.v - fn.v, dx), l2_norm(fr.u - fn.u, dx)))
        if fr.t >= t_skip:
            d = fr.S - p.viscosity(fr.v) * ddx(fr.u, dx) / fr.v
            defects.append(l2_norm(d, dx))
    return max(errs), errs[-1], (max(defects) if defects else float("nan"))


def _ns_dt_cap(initial, p_stiff, control):
    """Reference step: the relaxed CFL step at the stiffest parameter point."""
    smax = float(np.max(max_wave_speed(initial.v, initial.S, p_stiff)))
    return min(control.dt_max, control.cfl * initial.grid.dx / smax)


def tau_sweep(spec: InitialDataSpec, grid: GridSpec, p_base: PhysParams, taus: Sequence[float],
              control: StepControl = StepControl(t_end=2.0), sample_dt: float = 0.05,
              workers: int = 1, ns_dt_max: Optional[float] = None) -> SweepReport:
    """Relaxed runs for each ``tau`` against one limit-system reference run.

    ``e`` is the sup over sample times of ``||(v - v0, u - u0)||_L2``; ``d`` is
    the sup over sample times ``>= t_skip`` of ``||S - mu D(u)/v||_L2`` with
    ``t_skip = 0`` for well-prepared and ``10 tau`` for ill-prepared data.
    """
    taus = _validate_sweep_values(taus, "taus", descending=True)
    if p_base.G is not None:
        raise ValidationError("tau_sweep uses constant viscosity; use neo_hookean_sweep for G")
    initial = make_initial(spec, grid, p_base.replace(tau=taus[0]))
    p_list = [p_base.replace(tau=t) for t in taus]
    if ns_dt_max is None:
        ns_dt_max = _ns_dt_cap(initial, p_list[-1], control)
    law = ViscosityLaw("constant", p_base.mu)
    ref, ref_snaps = _reference_ns(initial, p_base, law, control, sample_dt, ns_dt_max)
    report = SweepReport(parameter="tau", values=taus)
    report.extras["E0"] = sobolev_energy(initial, p_list[0]).E
    report.extras["ns_dt_max"] = ns_dt_max
    if not ref.completed:
        report.completed = False
        report.breakdown = {"run": "ns-reference", **ref.breakdown}
        return report
    outs = _map([(initial, pp, control, sample_dt) for pp in p_list], workers)
    for tau, pp, (res, samples, snaps) in zip(taus, p_list, outs):
        if not res.completed:
            report.completed = False
            report.breakdown = {"run": f"tau={tau!r}", **res.breakdown}
            break
        t_skip = 10.0 * tau if spec.preparation == "ill-prepared" else 0.0
        e_sup, e_fin, d = _compare(snaps, ref_snaps, pp, t_skip)
        report.e_sup.append(e_sup)
        report.e_final.append(e_fin)
        report.defect.append(d)
        diag = DiagnosticsSink(pp)
        diag.samples = samples
        rep = diag.report()
        # the ratio is undefined for equilibrium data
        report.apriori_sup.append(float(np.max(report_apriori(rep))) if rep.E[0] > 0 else float("nan"))
    return report.finalize()


def initial_layer_probe(spec: InitialDataSpec, grid: GridSpec, p_base: PhysParams,
                        taus: Sequence[float], control: Optional[StepControl] = None,
                        samples_per_tau: int = 20) -> dict:
    """First time ``t*`` at which the stress defect halves, per ``tau``.

    The frozen-coefficient oracle is ``t* = tau ln 2``.  A run whose defect
    never halves (or starts at zero) is reported as censored.
    """
    taus = [float(t) for t in taus]
    if not taus or any(not t > 0 for t in taus):
        raise ValidationError("taus must be positive")
    rows = []
    for tau in taus:
        pp = p_base.replace(tau=tau)
        ctrl = control or StepControl(t_end=10.0 * tau)
        initial = make_initial(spec, grid, pp)
        diag = DiagnosticsSink(pp)
        res = run_relaxed(initial, pp, ctrl, sinks=[diag], sample_dt=tau / samples_per_tau)
        d = np.array([s.stress_defect for s in diag.samples])
        t = np.array([s.t for s in diag.samples])
        newton = l2_norm(pp.viscosity(initial.v) * ddx(initial.u, grid.dx) / initial.v, grid.dx)
        row = {"tau": tau, "t_star": None, "ratio": None, "censored": True,
               "initial_defect": float(d[0]), "completed": res.completed}
        if d[0] > 1e-12 * newton and d[0] > 0:
            hit = np.flatnonzero(d <= 0.5 * d[0])
            if hit.size:
                row.update(t_star=float(t[hit[0]]), ratio=float(t[hit[0]] / tau), censored=False)
        rows.append(row)
    return {"oracle_ratio": math.log(2.0), "rows": rows}


def threshold_probe(grid: GridSpec, p: PhysParams, ladder: Sequence[float],
                    spec: InitialDataSpec = InitialDataSpec(preparation="ill-prepared"), t_probe: float = 2.0,
                    n_bisect: int = 4, cfl: float = 0.45, sample_dt: float = 0.05) -> dict:
    """Ladder then bisection search for the smallest amplitude that breaks down.

    Returns per-run records plus ``eps_ok`` (largest completed amplitude below
    the first failure) and ``eps_break`` (smallest failing amplitude found).
    The default data start off the Newtonian manifold (``S0 = 0``), where a
    strong compression can collapse ``v`` within the horizon.
    """
    ladder = [float(e) for e in ladder]
    if any(b <= a for a, b in zip(ladder, ladder[1:])):
        raise ValidationError("amplitude ladder must be strictly increasing")
    control = StepControl(cfl=cfl, t_end=t_probe)
    runs = []

    def probe(eps):
        rec = {"eps": eps, "completed": False, "breakdown": None}
        try:
            initial = make_initial(spec.replace(amplitude=eps), grid, p)
            check_state(initial.v, initial.S, p, t=0.0, stage="initial", u=initial.u)
        except ValidationError as exc:
            rec["breakdown"] = {"invariant": "v>0", "time": 0.0, "index": None, "stage": "initial",
                                "message": str(exc)}
            runs.append(rec)
            return False
        except BreakdownError as exc:
            rec["breakdown"] = exc.record()
            runs.append(rec)
            return False
        diag = DiagnosticsSink(p)
        ux0 = float(np.max(np.abs(ddx(initial.u, grid.dx))))
        uxmax = [ux0]
        res = run_relaxed(initial, p, control,
                          sinks=[diag, lambda f: uxmax.append(float(np.max(np.abs(ddx(f.u, grid.dx)))))],
                          sample_dt=sample_dt)
        E = np.array([s.E for s in diag.samples])
        rec.update(
            completed=res.completed,
            breakdown=res.breakdown,
            t_reached=res.final.t,
            min_v=float(min(s.minv for s in diag.samples)),
            min_margin=float(min(s.min_margin for s in diag.samples)),
            ux_growth=(max(uxmax) / ux0) if ux0 > 0 else None,
            energy_growth=float(E.max() / E[0]) if E[0] > 0 else None,
        )
        runs.append(rec)
        return res.completed

    eps_ok, eps_break = None, None
    for eps in ladder:
        if probe(eps):
            eps_ok = eps
        else:
            eps_break = eps
            break
    if eps_ok is not None and eps_break is not None:
        lo, hi = eps_ok, eps_break
        for _ in range(n_bisect):
            mid = 0.5 * (lo + hi)
            if probe(mid):
                lo = mid
            else:
                hi = mid
        eps_ok, eps_break = lo, hi
    failing = [r for r in runs if r["eps"] == eps_break]
    return {
        "eps_ok": eps_ok,
        "eps_break": eps_break,
        "breakdown_record": failing[0]["breakdown"] if failing else None,
        "runs": sorted(runs, key=lambda r: r["eps"]),
    }


def neo_reference_law(mubar: float) -> ViscosityLaw:
    """Limit law of the Neo-Hookean closure when ``G tau = mubar``.

    The Lagrangian viscosity is ``2 G tau / v``, so the limit stress is
    ``2 mubar u_x / v**2``: a ``neo-limit`` law with value ``2 mubar``.
    """
    return ViscosityLaw("neo-limit", 2.0 * mubar)


def neo_hookean_sweep(spec: InitialDataSpec, grid: GridSpec, mubar: float, Gs: Sequence[float],
                      gamma: float = 1.4, B: float = 1.0,
                      control: StepControl = StepControl(t_end=2.0), sample_dt: float = 0.05,
                      workers: int = 1, reference: Optional[ViscosityLaw] = None) -> SweepReport:
    """A-formulation runs with ``tau = mubar / G`` against the limit system."""
    Gs = _validate_sweep_values(Gs, "Gs", descending=False)
    if not mubar > 0:
        raise ValidationError("mubar must be > 0")
    p_list = [PhysParams(gamma=gamma, B=B, mu=2.0 * mubar, a=0.5, tau=mubar / G, G=G) for G in Gs]
    base = make_initial(spec, grid, p_list[0], with_conformation=True)
    law = reference or neo_reference_law(mubar)
    ns_dt_max = _ns_dt_cap(base, p_list[-1], control)
    ref, ref_snaps = _reference_ns(base, p_list[0], law, control, sample_dt, ns_dt_max)
    report = SweepReport(parameter="G", values=Gs)
    report.extras.update(mubar=mubar, reference_law=asdict(law), ns_dt_max=ns_dt_max)
    if not ref.completed:
        report.completed = False
        report.breakdown = {"run": "ns-reference", **ref.breakdown}
        return report
    jobs = []
    for pp in p_list:
        init = base.copy()
        init.A = (init.S / pp.G + 1.0 / init.v) / init.v
        jobs.append((init, pp, control, sample_dt))
    outs = _map(jobs, workers)
    for G, pp, (res, samples, snaps) in zip(Gs, p_list, outs):
        if not res.completed:
            report.completed = False
            report.breakdown = {"run": f"G={G!r}", **res.breakdown}
            break
        e_sup, e_fin, d = _compare(snaps, ref_snaps, pp, 0.0)
        report.e_sup.append(e_sup)
        report.e_final.append(e_fin)
        report.defect.append(d)
    return report.finalize(slope_axis=[1.0 / G for G in Gs])


def neo_formulation_agreement(spec: InitialDataSpec, grids: Sequence[GridSpec], p: PhysParams,
                              control: StepControl = StepControl(t_end=1.0),
                              sample_dt: float = 0.05) -> dict:
    """Run the S-equation and the A-equation side by side on nested grids.

    The defect is ``max_t max_x |S_Sform - G (A v - 1/v)_Aform|``.
    """
    if p.G is None:
        raise ValidationError("formulation agreement needs PhysParams.G")
    defects = []
    for grid in grids:
        init_s = make_initial(spec, grid, p)
        init_a = make_initial(spec, grid, p, with_conformation=True)
        snaps_s, snaps_a = SnapshotSink(), SnapshotSink()
        rs = run_relaxed(init_s, p, control, sinks=[snaps_s], sample_dt=sample_dt)
        ra = run_relaxed(init_a, p, control, sinks=[snaps_a], sample_dt=sample_dt)
        if not (rs.completed and ra.completed):
            raise RuntimeError("formulation agreement run broke down")
        worst = 0.0
        for fs, fa in zip(snaps_s.snapshots, snaps_a.snapshots):
            S_a = p.G * (fa.A * fa.v - 1.0 / fa.v)
            worst = max(worst, float(np.max(np.abs(fs.S - S_a))))
        defects.append(worst)
    ratios = [a / b if b > 0 else float("inf") for a, b in zip(defects, defects[1:])]
    return {"N": [g.N for g in grids], "defect": defects, "ratios": ratios}


def _check_nested(grids):
    if len(grids) != 3:
        raise ValidationError("grid_convergence needs exactly three grids")
    g0 = grids[0]
    for k, g in enumerate(grids):
        if g.L != g0.L or g.N != g0.N * 2**k:
            raise ValidationError(f"grids must be nested N, 2N, 4N on one domain, got {[x.N for x in grids]}")


def richardson_order(coarse, mid, fine) -> Optional[float]:
    """``log2(|f_N - f_2N| / |f_2N - f_4N|)`` using node injection; None when exact."""
    d1 = np.linalg.norm(coarse - mid[::2]) / math.sqrt(coarse.size)
    d2 = np.linalg.norm(mid[::2] - fine[::4]) / math.sqrt(coarse.size)
    if d1 == 0 and d2 == 0:
        return None
    if d2 == 0:
        return float("inf")
    return math.log2(d1 / d2)


def grid_convergence(spec: InitialDataSpec, p: PhysParams, grids: Sequence[GridSpec],
                     control: StepControl = StepControl(t_end=1.0), solver: str = "relaxed",
                     dt_rule: str = "cfl", dt_coef: float = 0.5) -> dict:
    """Three-grid self-convergence order per variable at the final time.

    ``dt_rule="cfl"`` keeps the Courant number fixed; ``"diffusive"`` uses
    ``dt = dt_coef * dx**2`` (limit-system order in ``dx``).  Equal results on
    all grids are reported as ``"exact"``.
    """
    grids = list(grids)
    _check_nested(grids)
    finals = []
    for grid in grids:
        ctrl = control
        if dt_rule == "diffusive":
            ctrl = control.replace(dt_max=dt_coef * grid.dx**2)
        elif dt_rule != "cfl":
            raise ValidationError(f"dt_rule must be 'cfl' or 'diffusive', got {dt_rule!r}")
        init = make_initial(spec, grid, p)
        if solver == "relaxed":
            res = run_relaxed(init, p, ctrl)
        elif solver == "ns":
            res = run_ns(NSField.from_state(init), p, ViscosityLaw("constant", p.mu), ctrl)
        else:
            raise ValidationError(f"solver must be 'relaxed' or 'ns', got {solver!r}")
        if not res.completed:
            raise RuntimeError(f"convergence run on N={grid.N} broke down: {res.breakdown}")
        finals.append(res.final)
    names = ("v", "u", "S") if solver == "relaxed" else ("v", "u")
    orders = {}
    for name in names:
        o = richardson_order(*(getattr(f, name) for f in finals))
        orders[name] = "exact" if o is None else o
    return {"N": [g.N for g in grids], "solver": solver, "dt_rule": dt_rule, "orders": orders}


def ns_limit_stress_series(snapshots, law: ViscosityLaw):
    """Limit stress ``mu_eff D(u)/v`` at each stored NS sample."""
    return [limit_stress(f, law) for f in snapshots]
