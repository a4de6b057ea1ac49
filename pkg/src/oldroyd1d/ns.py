"""Reference solver for the limit system ``v_t = u_x, u_t + p(v)_x = (mu_eff(v) u_x / v)_x``.

Semi-implicit: SSP-RK2 for the acoustic part, then backward Euler for the
viscous term with coefficients frozen at the start of that stage.  The
periodic three-point viscous operator gives a cyclic tridiagonal system,
reduced by Sherman-Morrison to two ordinary tridiagonal solves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
from scipy.linalg import solve_banded

from .errors import BreakdownError, InternalConsistencyError, NonFiniteError, ValidationError
from .grid import NSField, StepControl, ddx
from .model import PhysParams, dpressure, pressure
from .relaxed import RunResult, advance_with_samples

VISCOSITY_KINDS = ("constant", "neo-limit")


@dataclass(frozen=True)
class ViscosityLaw:
    """``constant``: ``mu_eff = value``; ``neo-limit``: ``mu_eff(v) = value / v``."""

    kind: str = "constant"
    value: float = 1.0

    def __post_init__(self):
        if self.kind not in VISCOSITY_KINDS:
            raise ValidationError(f"kind must be one of {VISCOSITY_KINDS}, got {self.kind!r}")
        if not self.value > 0:
            raise ValidationError(f"viscosity value must be > 0, got {self.value!r}")

    def mu_eff(self, v):
        if self.kind == "constant":
            return np.full_like(np.asarray(v, dtype=float), self.value)
        return self.value / v


def cyclic_tridiag_solve(lower, diag, upper, rhs):
    """Solve a periodic tridiagonal system.

    Row ``i`` reads ``lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]``
    with indices taken modulo ``n``; ``lower[0]`` and ``upper[-1]`` are the
    corner entries.
    """
    lower = np.asarray(lower, dtype=float)
    diag = np.asarray(diag, dtype=float)
    upper = np.asarray(upper, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    n = diag.size
    if n < 3:
        raise ValueError("cyclic system needs n >= 3")
    alpha = upper[-1]  # A[n-1, 0]
    beta = lower[0]  # A[0, n-1]
    gamma = -diag[0] if diag[0] != 0 else -1.0
    bb = diag.copy()
    bb[0] -= gamma
    bb[-1] -= alpha * beta / gamma

    ab = np.zeros((3, n))
    ab[0, 1:] = upper[:-1]
    ab[1] = bb
    ab[2, :-1] = lower[1:]
    corr = np.zeros(n)
    corr[0] = gamma
    corr[-1] = alpha
    try:
        sol = solve_banded((1, 1), ab, np.column_stack([rhs, corr]))
    except np.linalg.LinAlgError as exc:
        raise InternalConsistencyError(f"singular cyclic tridiagonal system: {exc}") from exc
    y, z = sol[:, 0], sol[:, 1]
    vy = y[0] + beta / gamma * y[-1]
    vz = z[0] + beta / gamma * z[-1]
    denom = 1.0 + vz
    if denom == 0 or not math.isfinite(denom):
        raise InternalConsistencyError("singular cyclic tridiagonal system")
    return y - z * (vy / denom)


def viscous_matrix_bands(v, law: ViscosityLaw, dx: float, dt: float):
    """Bands of ``I - dt L`` where ``L u = (kappa u_x)_x`` and ``kappa = mu_eff(v)/v``."""
    kappa = law.mu_eff(v) / v
    k_half = 0.5 * (kappa + np.roll(kappa, -1))  # at j+1/2
    k_minus = np.roll(k_half, 1)  # at j-1/2
    r = dt / (dx * dx)
    return -r * k_minus, 1.0 + r * (k_half + k_minus), -r * k_half


def _check(field_v, u, t, stage):
    finite = np.isfinite(field_v) & np.isfinite(u)
    if not finite.all():
        idx = int(np.flatnonzero(~finite)[0])
        raise NonFiniteError(f"non-finite value at cell {idx}", invariant="finite", time=t, index=idx, stage=stage)
    bad = ~(field_v > 0)
    if bad.any():
        idx = int(np.flatnonzero(bad)[0])
        raise BreakdownError(f"v>0 violated at cell {idx}", invariant="v>0", time=t, index=idx, stage=stage)


def ns_step(field: NSField, p: PhysParams, law: ViscosityLaw, dt: float,
            include_pressure: bool = True) -> NSField:
    """One semi-implicit step.

    ``include_pressure=False`` drops the acoustic stage, leaving ``v`` frozen and
    ``u`` under pure diffusion (a test hook).
    """
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt!r}")
    dx = field.grid.dx
    v0, u0 = field.v, field.u
    _check(v0, u0, field.t, "ns-start")

    def rates(v, u):
        return ddx(u, dx), -ddx(pressure(v, p), dx)

    if include_pressure:
        dv, du = rates(v0, u0)
        v1, u1 = v0 + dt * dv, u0 + dt * du
        _check(v1, u1, field.t, "ns-acoustic-stage2")
        dv, du = rates(v1, u1)
        v2 = 0.5 * (v0 + v1 + dt * dv)
        u2 = 0.5 * (u0 + u1 + dt * du)
        _check(v2, u2, field.t, "ns-acoustic")
    else:
        v2, u2 = v0.copy(), u0

    lo, di, up = viscous_matrix_bands(v2, law, dx, dt)
    u3 = cyclic_tridiag_solve(lo, di, up, u2)
    _check(v2, u3, field.t, "ns-viscous")
    return NSField(field.grid, v2, u3, field.t + dt)


def ns_dt(field: NSField, p: PhysParams, control: StepControl) -> float:
    """Acoustic CFL step ``cfl dx / max sqrt(-p'(v))`` capped by ``dt_max`` and ``t_end``."""
    _check(field.v, field.u, field.t, "ns-cfl")
    c = float(np.max(np.sqrt(-dpressure(field.v, p))))
    dt = min(control.cfl * field.grid.dx / c, control.dt_max)
    remaining = control.t_end - field.t
    if remaining > 0:
        dt = min(dt, remaining)
    return dt


def limit_stress(field: NSField, law: ViscosityLaw) -> np.ndarray:
    """Identified limit stress ``mu_eff(v) D(u) / v``."""
    return law.mu_eff(field.v) * ddx(field.u, field.grid.dx) / field.v


def run_ns(initial: NSField, p: PhysParams, law: ViscosityLaw, control: StepControl,
           sinks: Iterable = (), sample_dt: Optional[float] = None,
           include_pressure: bool = True, max_steps: int = 10_000_000) -> RunResult:
    """Integrate the limit system to ``control.t_end`` (same sampling rules as the relaxed run)."""
    _check(initial.v, initial.u, initial.t, "initial")
    final, steps, err = advance_with_samples(
        initial,
        step=lambda f, dt: ns_step(f, p, law, dt, include_pressure),
        max_dt=lambda f: ns_dt(f, p, control),
        t_end=control.t_end,
        sample_dt=sample_dt,
        sinks=sinks,
        max_steps=max_steps,
    )
    if err is not None:
        return RunResult(final, False, steps, breakdown=err.record())
    return RunResult(final, True, steps)
