"""Physical model: gamma-law pressure, Oldroyd-type stress closure, symmetrizer.

All functions here are pure. Variables are Lagrangian: specific volume ``v``,
velocity ``u`` and stress ``S``.  The relaxed system reads::

    v_t - u_x = 0
    u_t + p(v)_x = S_x
    tau * (S_t - (2 a S / v) u_x) + S = mu u_x / v

and admits the symmetric form ``A0(W) W_t + A1(W) W_x + Bmat(W) W = 0``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .errors import AdmissibilityError, DomainError, InternalConsistencyError, ValidationError


class RegimeWarning(UserWarning):
    """Parameters lie outside ``tau < min(1, mu**2)``."""


@dataclass(frozen=True)
class PhysParams:
    """Model constants.

    Parameters
    ----------
    gamma : float
        Adiabatic index, ``> 1``.
    B : float
        Pressure constant in ``p = B v**(-gamma)``.
    mu : float
        Viscosity, ``> 0``.  Ignored by the constitutive law when ``G`` is set.
    a : float
        Kinematic slip constant in ``[-1, 1]``.
    tau : float
        Relaxation time, ``> 0``.
    G : float or None
        Elastic modulus.  When given, the Neo-Hookean closure is used:
        Lagrangian viscosity ``2 G tau / v`` and ``a`` must equal 1/2.
    """

    gamma: float = 1.4
    B: float = 1.0
    mu: float = 1.0
    a: float = 0.5
    tau: float = 0.1
    G: Optional[float] = None

    def __post_init__(self):
        for name in ("gamma", "B", "mu", "a", "tau"):
            val = getattr(self, name)
            if not isinstance(val, (int, float)) or isinstance(val, bool) or not math.isfinite(val):
                raise ValidationError(f"must be a finite number, got {val!r}", key=f"PhysParams.{name}")
        if not self.gamma > 1:
            raise ValidationError(f"gamma must be > 1, got {self.gamma!r}", key="PhysParams.gamma")
        if not self.B > 0:
            raise ValidationError(f"B must be > 0, got {self.B!r}", key="PhysParams.B")
        if not self.mu > 0:
            raise ValidationError(f"mu must be > 0, got {self.mu!r}", key="PhysParams.mu")
        if not -1 <= self.a <= 1:
            raise ValidationError(f"a must lie in [-1,1], got {self.a!r}", key="PhysParams.a")
        if not self.tau > 0:
            raise ValidationError(f"tau must be > 0, got {self.tau!r}", key="PhysParams.tau")
        if self.G is not None:
            if not self.G > 0:
                raise ValidationError(f"G must be > 0, got {self.G!r}", key="PhysParams.G")
            if self.a != 0.5:
                raise ValidationError(
                    f"Neo-Hookean variant requires a = 0.5, got {self.a!r}", key="PhysParams.a"
                )

    @property
    def neo_hookean(self) -> bool:
        return self.G is not None

    @property
    def in_small_relaxation_regime(self) -> bool:
        return self.tau < min(1.0, self.mu**2)

    def regime_warning(self) -> Optional[str]:
        if self.in_small_relaxation_regime:
            return None
        return (
            f"tau={self.tau!r} >= min(1, mu^2)={min(1.0, self.mu**2)!r}: "
            "outside the small-relaxation regime covered by the uniform estimates"
        )

    def warn_if_outside_regime(self):
        msg = self.regime_warning()
        if msg is not None:
            warnings.warn(msg, RegimeWarning, stacklevel=2)

    def viscosity(self, v):
        """Lagrangian viscosity; ``2 G tau / v`` in the Neo-Hookean case."""
        if self.G is None:
            return self.mu if np.ndim(v) == 0 else np.full_like(np.asarray(v, dtype=float), self.mu)
        return 2.0 * self.G * self.tau / v

    def replace(self, **changes) -> "PhysParams":
        d = asdict(self)
        d.update(changes)
        return PhysParams(**d)


@dataclass(frozen=True)
class CellState:
    v: float
    u: float
    S: float


@dataclass(frozen=True)
class SymmetrizerTriple:
    A0: np.ndarray
    A1: np.ndarray
    Bmat: np.ndarray


def _check_positive_v(v):
    arr = np.asarray(v, dtype=float)
    bad = ~(arr > 0)
    if np.any(bad):
        if arr.ndim == 0:
            raise DomainError(f"specific volume must be > 0, got v={float(arr)!r}")
        idx = int(np.flatnonzero(bad)[0])
        raise DomainError(f"specific volume must be > 0, got v={float(arr[idx])!r} at index {idx}")


def pressure(v, p: PhysParams):
    """``B * v**(-gamma)``; accepts scalars or arrays."""
    _check_positive_v(v)
    return p.B * np.power(v, -p.gamma)


def dpressure(v, p: PhysParams):
    """Derivative ``-gamma * B * v**(-gamma-1)``."""
    _check_positive_v(v)
    return -p.gamma * p.B * np.power(v, -p.gamma - 1.0)


def constitutive_margin(v, S, p: PhysParams):
    """``2 tau a S + mu(v)``; must stay positive."""
    return 2.0 * p.tau * p.a * S + p.viscosity(v)


def _check_admissible_cell(W: CellState, p: PhysParams):
    if not W.v > 0:
        raise AdmissibilityError(f"v must be > 0, got {W.v!r}", invariant="v>0")
    m = constitutive_margin(W.v, W.S, p)
    if not m > 0:
        raise AdmissibilityError(
            f"2*tau*a*S + mu must be > 0, got {m!r}", invariant="2*tau*a*S+mu>0"
        )
    return m


def symmetrizer(W: CellState, p: PhysParams) -> SymmetrizerTriple:
    m = _check_admissible_cell(W, p)
    dp = float(dpressure(W.v, p))
    A0 = np.diag([-dp, 1.0, p.tau * W.v / m])
    A1 = np.array([[0.0, dp, 0.0], [dp, 0.0, -1.0], [0.0, -1.0, 0.0]])
    Bmat = np.zeros((3, 3))
    Bmat[2, 2] = W.v / m
    return SymmetrizerTriple(A0=A0, A1=A1, Bmat=Bmat)


def _scaled_flux_matrices(v, S, p: PhysParams):
    """Batched ``A0^{-1/2} A1 A0^{-1/2}`` for arrays of cells (A0 is diagonal)."""
    v = np.asarray(v, dtype=float)
    S = np.asarray(S, dtype=float)
    dp = -p.gamma * p.B * np.power(v, -p.gamma - 1.0)
    m = constitutive_margin(v, S, p)
    d1 = np.sqrt(-dp)
    d3 = np.sqrt(p.tau * v / m)
    C = np.zeros(v.shape + (3, 3))
    C[..., 0, 1] = C[..., 1, 0] = dp / d1
    C[..., 1, 2] = C[..., 2, 1] = -1.0 / d3
    return C


def characteristic_speeds(W: CellState, p: PhysParams) -> np.ndarray:
    """Real roots of ``det(A1 - lam A0) = 0`` in ascending order."""
    _check_admissible_cell(W, p)
    C = _scaled_flux_matrices(W.v, W.S, p)
    lam = np.linalg.eigvals(C)
    scale = max(np.abs(C).max(), 1.0)
    if np.any(np.abs(lam.imag) > 1e-12 * scale) or not np.all(np.isfinite(lam)):
        raise InternalConsistencyError(f"non-real characteristic speeds {lam!r}")
    lam = np.sort(lam.real)
    # det(A1) vanishes identically, so the middle root is exactly zero
    if abs(lam[1]) > 1e-12 * scale:
        raise InternalConsistencyError(f"middle characteristic speed {lam[1]!r} is not zero")
    lam[1] = 0.0
    return lam


def max_wave_speed(v, S, p: PhysParams) -> np.ndarray:
    """Cell-wise spectral radius of the generalized pencil ``(A1, A0)``."""
    C = _scaled_flux_matrices(v, S, p)
    return np.abs(np.linalg.eigvalsh(C)).max(axis=-1)


def neo_hookean_stress(A, v, G):
    """Stress ``G (A v - 1/v)`` generated by the conformation scalar ``A``."""
    for name, val in (("A", A), ("v", v), ("G", G)):
        if np.any(~(np.asarray(val, dtype=float) > 0)):
            raise DomainError(f"{name} must be > 0, got {val!r}")
    return G * (A * v - 1.0 / v)


@dataclass
class AdmissibilityReport:
    min_v: float
    max_v: float
    min_v_index: int
    min_margin: float
    min_margin_index: int
    passed: bool
    violated: list = field(default_factory=list)
    first_bad_index: Optional[int] = None
    in_small_data_window: bool = False


def admissibility_scan(field_or_v, p: PhysParams, S=None) -> AdmissibilityReport:
    """Field-wide minima of ``v`` and ``2 tau a S + mu``.

    Accepts an object with ``v`` and ``S`` attributes, or arrays ``(v, p, S=...)``.
    ``in_small_data_window`` reports whether ``3/4 <= v <= 5/4`` everywhere; it
    is informational and does not affect ``passed``.
    """
    if S is None:
        v = np.asarray(field_or_v.v, dtype=float)
        S = np.asarray(field_or_v.S, dtype=float)
    else:
        v = np.asarray(field_or_v, dtype=float)
        S = np.asarray(S, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        margin = 2.0 * p.tau * p.a * S + (p.mu if p.G is None else 2.0 * p.G * p.tau / v)
    iv = int(np.argmin(v))
    im = int(np.nanargmin(margin)) if np.any(np.isfinite(margin)) else 0
    violated = []
    bad = np.zeros(v.shape, dtype=bool)
    nonfinite = ~(np.isfinite(v) & np.isfinite(S))
    if np.any(nonfinite):
        violated.append("finite")
        bad |= nonfinite
    if np.any(~(v > 0) & ~nonfinite):
        violated.append("v>0")
        bad |= ~(v > 0)
    if np.any(~(margin > 0) & ~bad):
        violated.append("2*tau*a*S+mu>0")
        bad |= ~(margin > 0)
    first = int(np.flatnonzero(bad)[0]) if violated else None
    return AdmissibilityReport(
        min_v=float(v[iv]),
        max_v=float(np.max(v)),
        min_v_index=iv,
        min_margin=float(margin[im]),
        min_margin_index=im,
        passed=not violated,
        violated=violated,
        first_bad_index=first,
        in_small_data_window=bool(np.all((v >= 0.75) & (v <= 1.25))),
    )
