"""Strang-split integrator for the relaxed (hyperbolic) system.

One step is ``R(dt/2) T(dt) R(dt/2)`` where ``T`` is an SSP-RK2 step of the
transport/pressure part discretized with periodic central differences, and
``R`` integrates the stiff stress equation exactly per cell with ``u_x`` and
``v`` frozen.  In the Neo-Hookean A-formulation ``R`` relaxes ``A`` toward
``1/v**2`` instead and ``S`` is recomputed from ``A``.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from .errors import BreakdownError, InternalConsistencyError, NonFiniteError
from .grid import StateField, StepControl, d2dx2, ddx
from .model import PhysParams, max_wave_speed, pressure

logger = logging.getLogger(__name__)

# exp(50) ~ 5e21: anything beyond is certain breakdown anyway
MAX_GROWTH_EXPONENT = 50.0


class ClampWarning(RuntimeWarning):
    """The exponential relaxation update was clamped to avoid overflow."""


def check_state(v, S, p: PhysParams, t=None, stage=None, u=None, A=None):
    """Raise :class:`BreakdownError` on the first non-finite or inadmissible cell."""
    arrays = [v, S] + [x for x in (u, A) if x is not None]
    finite = np.ones(v.shape, dtype=bool)
    for arr in arrays:
        finite &= np.isfinite(arr)
    if not finite.all():
        idx = int(np.flatnonzero(~finite)[0])
        raise NonFiniteError(
            f"non-finite value at cell {idx}, t={t!r}, stage={stage}",
            invariant="finite", time=t, index=idx, stage=stage,
        )
    bad = ~(v > 0)
    if bad.any():
        idx = int(np.flatnonzero(bad)[0])
        raise BreakdownError(
            f"v>0 violated at cell {idx} (v={v[idx]!r}), t={t!r}, stage={stage}",
            invariant="v>0", time=t, index=idx, stage=stage,
        )
    margin = 2.0 * p.tau * p.a * S + p.viscosity(v)
    bad = ~(margin > 0)
    if bad.any():
        idx = int(np.flatnonzero(bad)[0])
        raise BreakdownError(
            f"2*tau*a*S+mu>0 violated at cell {idx} (value {margin[idx]!r}), t={t!r}, stage={stage}",
            invariant="2*tau*a*S+mu>0", time=t, index=idx, stage=stage,
        )
    if A is not None:
        bad = ~(A > 0)
        if bad.any():
            idx = int(np.flatnonzero(bad)[0])
            raise BreakdownError(
                f"A>0 violated at cell {idx}, t={t!r}, stage={stage}",
                invariant="A>0", time=t, index=idx, stage=stage,
            )


def _stress_from_A(A, v, p: PhysParams):
    return p.G * (A * v - 1.0 / v)


def _rates(v, u, S, p: PhysParams, dx, stretch_in, nu_h):
    ux = ddx(u, dx)
    dv = ux
    du = ddx(S - pressure(v, p), dx)
    if stretch_in == "transport":
        dS = (2.0 * p.a * S / v) * ux
    else:
        dS = np.zeros_like(S)
    if nu_h > 0:
        visc = nu_h * dx * dx
        dv = dv + visc * d2dx2(v, dx)
        du = du + visc * d2dx2(u, dx)
        dS = dS + visc * d2dx2(S, dx)
    return dv, du, dS


def transport_rhs(field: StateField, p: PhysParams, control: Optional[StepControl] = None):
    """Rates ``(dv/dt, du/dt, dS/dt)`` of the explicit transport stage.

    The stress rate only carries the stretch term when
    ``control.stretch_in == "transport"`` (plus hyperviscosity, if enabled).
    """
    control = control or StepControl()
    check_state(field.v, field.S, p, t=field.t, stage="transport", u=field.u)
    return _rates(field.v, field.u, field.S, p, field.grid.dx, control.stretch_in, control.hyperviscosity)


def _phi1(z):
    """``expm1(z)/z`` with the removable singularity filled in."""
    z = np.asarray(z, dtype=float)
    out = np.ones_like(z)
    small = np.abs(z) < 1e-8
    zs = z[~small]
    out[~small] = np.expm1(zs) / zs
    out[small] = 1.0 + 0.5 * z[small]
    return out


def relaxation_substep(field: StateField, p: PhysParams, dt: float, stretch_in: str = "relaxation") -> StateField:
    """Exact per-cell solution of ``S_t = alpha S + beta`` over ``dt``.

    ``alpha = 2 a u_x / v - 1/tau`` (only ``-1/tau`` when the stretch term is
    handled by the transport stage), ``beta = mu u_x / (tau v)``, with
    ``u_x = D(u)`` and ``v`` frozen.  ``v`` and ``u`` are returned unchanged.
    """
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt!r}")
    v, S = field.v, field.S
    ux = ddx(field.u, field.grid.dx)
    alpha = -1.0 / p.tau + (2.0 * p.a * ux / v if stretch_in == "relaxation" else 0.0)
    beta = p.viscosity(v) * ux / (p.tau * v)
    z = alpha * dt
    if np.any(z > MAX_GROWTH_EXPONENT):
        warnings.warn(
            f"relaxation exponent {float(np.max(z)):.3g} clamped to {MAX_GROWTH_EXPONENT}",
            ClampWarning,
            stacklevel=2,
        )
        z = np.minimum(z, MAX_GROWTH_EXPONENT)
        alpha = z / dt
    S_new = np.exp(z) * S + dt * beta * _phi1(z)
    out = field.copy()
    out.S = S_new
    return out


def neo_hookean_substep(field: StateField, p: PhysParams, dt: float) -> StateField:
    """Relax ``A`` toward ``1/v**2`` at rate ``1/tau`` with ``v`` frozen; recompute ``S``."""
    if field.A is None or p.G is None:
        raise ValueError("neo_hookean_substep needs field.A and params.G")
    if np.any(~(field.A > 0)):
        raise ValueError("A must be > 0")
    target = 1.0 / (field.v * field.v)
    A_new = target + (field.A - target) * math.exp(-dt / p.tau)
    if np.any(~(A_new > 0)):
        idx = int(np.flatnonzero(~(A_new > 0))[0])
        raise InternalConsistencyError(f"A became non-positive at cell {idx}")
    out = field.copy()
    out.A = A_new
    out.S = _stress_from_A(A_new, field.v, p)
    return out


def cfl_dt(field: StateField, p: PhysParams, control: StepControl) -> float:
    """``cfl * dx / max|lambda|`` capped by ``dt_max`` and by the time left to ``t_end``."""
    check_state(field.v, field.S, p, t=field.t, stage="cfl", u=field.u)
    smax = float(np.max(max_wave_speed(field.v, field.S, p)))
    if not smax > 0:
        raise InternalConsistencyError("maximum characteristic speed is zero")
    dt = min(control.cfl * field.grid.dx / smax, control.dt_max)
    remaining = control.t_end - field.t
    if remaining > 0:
        dt = min(dt, remaining)
    return dt


def _transport_step(field: StateField, p: PhysParams, control: StepControl, dt: float) -> StateField:
    dx = field.grid.dx
    nu_h = control.hyperviscosity
    t = field.t
    if field.A is not None:
        A = field.A
        v0, u0 = field.v, field.u

        def stage_rates(v, u, label):
            S = _stress_from_A(A, v, p)
            check_state(v, S, p, t=t, stage=label, u=u, A=A)
            dv, du, _ = _rates(v, u, S, p, dx, "relaxation", nu_h)
            return dv, du

        dv, du = stage_rates(v0, u0, "transport-stage1")
        v1, u1 = v0 + dt * dv, u0 + dt * du
        dv, du = stage_rates(v1, u1, "transport-stage2")
        v2 = 0.5 * (v0 + v1 + dt * dv)
        u2 = 0.5 * (u0 + u1 + dt * du)
        S2 = _stress_from_A(A, v2, p) if np.all(v2 > 0) else np.full_like(v2, np.nan)
        out = StateField(field.grid, v2, u2, S2, A.copy(), t)
        check_state(out.v, out.S, p, t=t, stage="transport", u=out.u, A=A)
        return out

    v0, u0, S0 = field.v, field.u, field.S
    check_state(v0, S0, p, t=t, stage="transport-stage1", u=u0)
    dv, du, dS = _rates(v0, u0, S0, p, dx, control.stretch_in, nu_h)
    v1, u1, S1 = v0 + dt * dv, u0 + dt * du, S0 + dt * dS
    check_state(v1, S1, p, t=t, stage="transport-stage2", u=u1)
    dv, du, dS = _rates(v1, u1, S1, p, dx, control.stretch_in, nu_h)
    out = StateField(
        field.grid,
        0.5 * (v0 + v1 + dt * dv),
        0.5 * (u0 + u1 + dt * du),
        0.5 * (S0 + S1 + dt * dS),
        None,
        t,
    )
    check_state(out.v, out.S, p, t=t, stage="transport", u=out.u)
    return out


def _relax(field: StateField, p: PhysParams, dt: float, control: StepControl, label: str) -> StateField:
    if field.A is not None:
        out = neo_hookean_substep(field, p, dt)
        check_state(out.v, out.S, p, t=field.t, stage=label, u=out.u, A=out.A)
    else:
        out = relaxation_substep(field, p, dt, control.stretch_in)
        check_state(out.v, out.S, p, t=field.t, stage=label, u=out.u)
    return out


def strang_step(field: StateField, p: PhysParams, control: StepControl, dt: Optional[float] = None) -> StateField:
    """Advance by one Strang step; ``dt`` defaults to :func:`cfl_dt`."""
    if dt is None:
        dt = cfl_dt(field, p, control)
    out = _relax(field, p, 0.5 * dt, control, "relax-1")
    out = _transport_step(out, p, control, dt)
    out = _relax(out, p, 0.5 * dt, control, "relax-2")
    out.t = field.t + dt
    return out


Sink = Callable[[StateField], None]


@dataclass
class RunResult:
    final: StateField
    completed: bool
    steps: int
    breakdown: Optional[dict] = None
    warnings: list = field(default_factory=list)

    @property
    def t_final(self) -> float:
        return self.final.t


def sample_schedule(t0: float, t_end: float, sample_dt: Optional[float]) -> np.ndarray:
    """Sample times after ``t0``: multiples of ``sample_dt`` plus ``t_end``."""
    if sample_dt is None or not math.isfinite(sample_dt):
        return np.array([t_end]) if t_end > t0 else np.array([])
    n = int(math.floor((t_end - t0) / sample_dt + 1e-9))
    times = t0 + sample_dt * np.arange(1, n + 1)
    if n == 0 or t_end - times[-1] > 1e-12 * max(1.0, abs(t_end)):
        times = np.append(times, t_end)
    else:
        times[-1] = t_end
    return times


def advance_with_samples(initial, step: Callable, max_dt: Callable, t_end: float,
                         sample_dt: Optional[float], sinks: Iterable[Sink], max_steps: int):
    """Shared driver: step until ``t_end`` landing exactly on every sample time.

    Returns ``(last_good_field, steps, breakdown_error_or_None)``.
    """
    sinks = list(sinks)
    state = initial
    for sink in sinks:
        sink(state)
    steps = 0
    for t_sample in sample_schedule(initial.t, t_end, sample_dt):
        while state.t < t_sample:
            try:
                dt = max_dt(state)
            except BreakdownError as err:
                return state, steps, err
            gap = t_sample - state.t
            if dt >= gap or gap - dt < 1e-10 * dt:
                dt = gap
            try:
                new = step(state, dt)
            except BreakdownError as err:
                return state, steps, err
            if dt == gap:
                new.t = t_sample
            state = new
            steps += 1
            if steps > max_steps:
                raise InternalConsistencyError(f"exceeded max_steps={max_steps}")
        for sink in sinks:
            sink(state)
    return state, steps, None


def run_relaxed(initial: StateField, p: PhysParams, control: StepControl,
                sinks: Iterable[Sink] = (), sample_dt: Optional[float] = None,
                max_steps: int = 10_000_000) -> RunResult:
    """Integrate from ``initial`` to ``control.t_end``.

    Every sink is called with the state at ``t0``, at each multiple of
    ``sample_dt`` and at ``t_end``; steps are shortened to land on those times.
    A breakdown stops the run and the partial result carries its record.
    """
    check_state(initial.v, initial.S, p, t=initial.t, stage="initial", u=initial.u, A=initial.A)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ClampWarning)
        final, steps, err = advance_with_samples(
            initial,
            step=lambda f, dt: strang_step(f, p, control, dt),
            max_dt=lambda f: min(cfl_dt(f, p, control), control.dt_max),
            t_end=control.t_end,
            sample_dt=sample_dt,
            sinks=sinks,
            max_steps=max_steps,
        )
    msgs = sorted({str(w.message) for w in caught})
    if err is not None:
        logger.info("breakdown: %s", err)
        return RunResult(final, False, steps, breakdown=err.record(), warnings=msgs)
    return RunResult(final, True, steps, warnings=msgs)
