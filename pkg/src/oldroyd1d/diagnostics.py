"""Discrete energy functionals and their time-series bookkeeping.

Norms use the solver's own central stencils so that the instantaneous
Sobolev energy and dissipation are consistent with the discrete dynamics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError, ValidationError
from .grid import d2dx2, ddx, integrate
from .model import PhysParams


def discrete_derivative(f, order: int, dx: float) -> np.ndarray:
    """Periodic central derivative of order 1 or 2."""
    f = np.asarray(f, dtype=float)
    if f.ndim != 1 or f.size < 5:
        raise ValidationError(f"need a 1-D periodic sequence of length >= 5, got shape {f.shape}")
    if order == 1:
        return ddx(f, dx)
    if order == 2:
        return d2dx2(f, dx)
    raise ValidationError(f"order must be 1 or 2, got {order!r}")


def _h2_parts(f, dx):
    """``(||f||^2, ||f'||^2, ||f''||^2)`` with the rectangle rule."""
    d1 = ddx(f, dx)
    d2 = d2dx2(f, dx)
    return integrate(f * f, dx), integrate(d1 * d1, dx), integrate(d2 * d2, dx)


@dataclass(frozen=True)
class SobolevEnergy:
    E: float
    D: float


def sobolev_energy(field, p: PhysParams) -> SobolevEnergy:
    """``E = ||(v-1, u, sqrt(tau) S)||_H2^2`` and ``D = ||(v_x, u_x)||_H1^2 + ||S||_H2^2``."""
    dx = field.grid.dx
    pv = _h2_parts(field.v - 1.0, dx)
    pu = _h2_parts(field.u, dx)
    pS = _h2_parts(field.S, dx)
    E = sum(pv) + sum(pu) + p.tau * sum(pS)
    D = pv[1] + pv[2] + pu[1] + pu[2] + sum(pS)
    return SobolevEnergy(E=E, D=D)


def potential_density(v, p: PhysParams):
    """``B [ (v^(1-gamma) - 1)/(gamma-1) + v - 1 ]`` evaluated without cancellation near v=1."""
    v = np.asarray(v, dtype=float)
    if np.any(~(v > 0)):
        raise DomainError("specific volume must be > 0")
    g = p.gamma
    return p.B * (np.expm1((1.0 - g) * np.log(v)) / (g - 1.0) + (v - 1.0))


def physical_energy(field, p: PhysParams, weight: str = "statement") -> float:
    """Integral of ``u^2/2 + w S^2 + potential``.

    ``weight="statement"`` uses ``w = tau v / (2 mu)``; ``weight="proof"`` uses
    ``w = tau v / (2 (2 a tau S + mu))``.
    """
    v, u, S = field.v, field.u, field.S
    dens = potential_density(v, p) + 0.5 * u * u
    mu = p.viscosity(v)
    if weight == "statement":
        w = p.tau * v / (2.0 * mu)
    elif weight == "proof":
        w = p.tau * v / (2.0 * (2.0 * p.a * p.tau * S + mu))
    else:
        raise ValidationError(f"weight must be 'statement' or 'proof', got {weight!r}")
    return integrate(dens + w * S * S, field.grid.dx)


def physical_dissipation(field, p: PhysParams) -> float:
    """Instantaneous dissipation ``int (v/mu) S^2 dx``."""
    v = field.v
    return integrate(v / p.viscosity(v) * field.S**2, field.grid.dx)


def cross_term(field, p: PhysParams) -> float:
    """Stretch/cubic source ``int c(v) u_x S^2 dx`` of the energy balance.

    ``c = tau (2a/mu + d/dv[v/(2mu)])``: ``(4a+1) tau / (2 mu)`` for constant
    viscosity, ``(a + 1/2) v / G`` for the Neo-Hookean viscosity ``2 G tau / v``.
    """
    v = field.v
    ux = ddx(field.u, field.grid.dx)
    if p.G is None:
        coef = (4.0 * p.a + 1.0) * p.tau / (2.0 * p.mu)
        if coef == 0.0:
            return 0.0
    else:
        coef = (p.a + 0.5) * v / p.G
    return integrate(coef * ux * field.S**2, field.grid.dx)


def cumulative_trapezoid(t, y) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    if y.size > 1:
        out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(t))
    return out


@dataclass
class EnergyReport:
    """Per-sample diagnostics of one run (all arrays have one entry per sample)."""

    t: np.ndarray
    E: np.ndarray
    supE: np.ndarray
    D: np.ndarray
    cumD: np.ndarray
    E_phys: np.ndarray
    E_phys_proof: np.ndarray
    diss: np.ndarray
    cumDiss: np.ndarray
    cross: np.ndarray
    cumCross: np.ndarray
    ledger_residual: np.ndarray
    minv: np.ndarray
    maxv: np.ndarray
    min_margin: np.ndarray
    stress_defect: np.ndarray

    CSV_COLUMNS = (
        "t", "E", "supE", "D", "cumD", "E_phys", "cumDiss", "ledger_residual",
        "minv", "maxv", "min2taS+mu", "stress_defect",
    )

    def rows(self):
        cols = (self.t, self.E, self.supE, self.D, self.cumD, self.E_phys, self.cumDiss,
                self.ledger_residual, self.minv, self.maxv, self.min_margin, self.stress_defect)
        return [tuple(float(c[i]) for c in cols) for i in range(len(self.t))]


@dataclass
class Sample:
    t: float
    E: float
    D: float
    E_phys: float
    E_phys_proof: float
    diss: float
    cross: float
    minv: float
    maxv: float
    min_margin: float
    stress_defect: float


def stress_defect(field, p: PhysParams) -> float:
    """``||S - mu(v) D(u) / v||_L2``: distance from the Newtonian manifold."""
    v = field.v
    d = field.S - p.viscosity(v) * ddx(field.u, field.grid.dx) / v
    return math.sqrt(integrate(d * d, field.grid.dx))


def sample_state(field, p: PhysParams) -> Sample:
    se = sobolev_energy(field, p)
    margin = 2.0 * p.tau * p.a * field.S + p.viscosity(field.v)
    return Sample(
        t=float(field.t),
        E=se.E,
        D=se.D,
        E_phys=physical_energy(field, p, "statement"),
        E_phys_proof=physical_energy(field, p, "proof"),
        diss=physical_dissipation(field, p),
        cross=cross_term(field, p),
        minv=float(np.min(field.v)),
        maxv=float(np.max(field.v)),
        min_margin=float(np.min(margin)),
        stress_defect=stress_defect(field, p),
    )


def energy_ledger(samples: Sequence[Sample]) -> np.ndarray:
    """Residual of the physical energy balance along the sampled run.

    ``r(t) = E_phys(t) - E_phys(0) + int_0^t diss - int_0^t cross`` with
    trapezoid time integrals; zero for an exact solution.
    """
    if len(samples) < 2:
        raise ValidationError("energy_ledger needs at least 2 samples")
    t = np.array([s.t for s in samples])
    e = np.array([s.E_phys for s in samples])
    diss = cumulative_trapezoid(t, [s.diss for s in samples])
    cross = cumulative_trapezoid(t, [s.cross for s in samples])
    return (e - e[0]) + diss - cross


def build_report(samples: Sequence[Sample]) -> EnergyReport:
    """Assemble the per-sample table; a single sample (early breakdown) gets a zero ledger."""
    if not samples:
        raise ValidationError("an energy report needs at least 1 sample")
    t = np.array([s.t for s in samples])
    E = np.array([s.E for s in samples])
    D = np.array([s.D for s in samples])
    diss = np.array([s.diss for s in samples])
    cross = np.array([s.cross for s in samples])
    return EnergyReport(
        t=t,
        E=E,
        supE=np.maximum.accumulate(E),
        D=D,
        cumD=cumulative_trapezoid(t, D),
        E_phys=np.array([s.E_phys for s in samples]),
        E_phys_proof=np.array([s.E_phys_proof for s in samples]),
        diss=diss,
        cumDiss=cumulative_trapezoid(t, diss),
        cross=cross,
        cumCross=cumulative_trapezoid(t, cross),
        ledger_residual=energy_ledger(samples) if len(samples) > 1 else np.zeros(1),
        minv=np.array([s.minv for s in samples]),
        maxv=np.array([s.maxv for s in samples]),
        min_margin=np.array([s.min_margin for s in samples]),
        stress_defect=np.array([s.stress_defect for s in samples]),
    )


class DiagnosticsSink:
    """Run sink collecting a :class:`Sample` at every call."""

    def __init__(self, p: PhysParams):
        self.p = p
        self.samples: list[Sample] = []

    def __call__(self, field):
        self.samples.append(sample_state(field, self.p))

    def report(self) -> EnergyReport:
        return build_report(self.samples)


class SnapshotSink:
    """Run sink keeping copies of the sampled fields."""

    def __init__(self):
        self.snapshots = []

    def __call__(self, field):
        self.snapshots.append(field.copy())

    @property
    def times(self):
        return np.array([f.t for f in self.snapshots])


@dataclass(frozen=True)
class TaylorBounds:
    c0: float
    c1: float


def taylor_ratio(v, gamma: float):
    """``[(v^(1-gamma)-1)/(gamma-1) + v - 1] / (v-1)^2`` with the limit ``gamma/2`` at v=1."""
    v = np.asarray(v, dtype=float)
    out = np.full(v.shape, gamma / 2.0)
    off = v != 1.0
    w = v[off]
    num = np.expm1((1.0 - gamma) * np.log(w)) / (gamma - 1.0) + (w - 1.0)
    out[off] = num / (w - 1.0) ** 2
    return out


def taylor_bounds(gamma: float, v_interval, n_samples: int = 4001) -> TaylorBounds:
    """Min/max of :func:`taylor_ratio` over a sampled interval (v=1 inserted if inside)."""
    lo, hi = float(v_interval[0]), float(v_interval[1])
    if not lo > 0:
        raise DomainError(f"interval must lie in (0, inf), got {v_interval!r}")
    if hi < lo:
        raise DomainError(f"empty interval {v_interval!r}")
    if not gamma > 1:
        raise DomainError(f"gamma must be > 1, got {gamma!r}")
    vs = np.linspace(lo, hi, n_samples) if hi > lo else np.array([lo])
    if lo <= 1.0 <= hi:
        vs = np.append(vs, 1.0)
    g = taylor_ratio(vs, gamma)
    return TaylorBounds(c0=float(g.min()), c1=float(g.max()))


def apriori_residual(E: Sequence[float], D: Sequence[float], t: Sequence[float]) -> np.ndarray:
    """``R(t) = [E(t) + int D] / [E0 + E(t)^(1/2) int D]`` with ``E(t)`` the running sup.

    ``E`` are instantaneous values; ``R(0) = 1``.
    """
    E = np.asarray(E, dtype=float)
    if E.size == 0 or not E[0] > 0:
        raise ValidationError("apriori_residual needs E0 > 0 (equilibrium data has no meaningful ratio)")
    supE = np.maximum.accumulate(E)
    cumD = cumulative_trapezoid(t, D)
    return (supE + cumD) / (E[0] + np.sqrt(supE) * cumD)


def report_apriori(report: EnergyReport) -> np.ndarray:
    return apriori_residual(report.E, report.D, report.t)


def ns_energy(field, p: PhysParams) -> float:
    """``int (u^2/2 + potential(v)) dx`` for a limit-system field (no stress)."""
    return integrate(0.5 * field.u**2 + potential_density(field.v, p), field.grid.dx)
