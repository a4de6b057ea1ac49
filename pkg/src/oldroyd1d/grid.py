"""Periodic grid, field containers and the central difference stencils."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import ValidationError

STRETCH_OPTIONS = ("relaxation", "transport")


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid on ``[-L, L)`` with nodes ``x_j = -L + j dx``."""

    L: float = math.pi
    N: int = 512

    def __post_init__(self):
        if isinstance(self.N, bool) or not isinstance(self.N, (int, np.integer)):
            raise ValidationError(f"N must be an integer, got {self.N!r}", key="GridSpec.N")
        if self.N < 8:
            raise ValidationError(f"N must be >= 8, got {self.N}", key="GridSpec.N")
        if not (math.isfinite(self.L) and self.L > 0):
            raise ValidationError(f"L must be > 0, got {self.L!r}", key="GridSpec.L")

    @property
    def dx(self) -> float:
        return 2.0 * self.L / self.N

    @property
    def x(self) -> np.ndarray:
        return -self.L + self.dx * np.arange(self.N)

    @property
    def length(self) -> float:
        return 2.0 * self.L

    def refined(self, factor: int = 2) -> "GridSpec":
        return GridSpec(L=self.L, N=self.N * factor)


@dataclass(frozen=True)
class StepControl:
    """Time stepping knobs.

    ``hyperviscosity`` is the coefficient ``nu_h`` of the ``nu_h dx^2 D2``
    term added to every equation.  ``stretch_in`` assigns the ``2 a S u_x / v``
    term either to the exact relaxation substep or to the explicit transport.
    """

    cfl: float = 0.45
    t_end: float = 1.0
    dt_max: float = math.inf
    hyperviscosity: float = 0.0
    stretch_in: str = "relaxation"

    def __post_init__(self):
        if not 0 < self.cfl < 1:
            raise ValidationError(f"cfl must lie in (0,1), got {self.cfl!r}", key="StepControl.cfl")
        if not self.t_end >= 0:
            raise ValidationError(f"t_end must be >= 0, got {self.t_end!r}", key="StepControl.t_end")
        if not self.dt_max > 0:
            raise ValidationError(f"dt_max must be > 0, got {self.dt_max!r}", key="StepControl.dt_max")
        if not self.hyperviscosity >= 0:
            raise ValidationError(
                f"hyperviscosity must be >= 0, got {self.hyperviscosity!r}",
                key="StepControl.hyperviscosity",
            )
        if self.stretch_in not in STRETCH_OPTIONS:
            raise ValidationError(
                f"stretch_in must be one of {STRETCH_OPTIONS}, got {self.stretch_in!r}",
                key="StepControl.stretch_in",
            )

    def replace(self, **changes) -> "StepControl":
        return replace(self, **changes)


@dataclass
class StateField:
    """Grid functions of the relaxed system; ``A`` is set for the Neo-Hookean form."""

    grid: GridSpec
    v: np.ndarray
    u: np.ndarray
    S: np.ndarray
    A: Optional[np.ndarray] = None
    t: float = 0.0

    def __post_init__(self):
        n = self.grid.N
        self.v = np.asarray(self.v, dtype=float)
        self.u = np.asarray(self.u, dtype=float)
        self.S = np.asarray(self.S, dtype=float)
        if self.A is not None:
            self.A = np.asarray(self.A, dtype=float)
        for name in ("v", "u", "S") + (("A",) if self.A is not None else ()):
            arr = getattr(self, name)
            if arr.shape != (n,):
                raise ValidationError(f"{name} must have shape ({n},), got {arr.shape}")

    def copy(self) -> "StateField":
        return StateField(
            grid=self.grid,
            v=self.v.copy(),
            u=self.u.copy(),
            S=self.S.copy(),
            A=None if self.A is None else self.A.copy(),
            t=self.t,
        )

    @classmethod
    def constant(cls, grid: GridSpec, v=1.0, u=0.0, S=0.0, A=None) -> "StateField":
        n = grid.N
        return cls(
            grid,
            np.full(n, float(v)),
            np.full(n, float(u)),
            np.full(n, float(S)),
            None if A is None else np.full(n, float(A)),
        )


@dataclass
class NSField:
    grid: GridSpec
    v: np.ndarray
    u: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.v = np.asarray(self.v, dtype=float)
        self.u = np.asarray(self.u, dtype=float)
        for name in ("v", "u"):
            if getattr(self, name).shape != (self.grid.N,):
                raise ValidationError(f"{name} must have shape ({self.grid.N},)")

    def copy(self) -> "NSField":
        return NSField(self.grid, self.v.copy(), self.u.copy(), self.t)

    @classmethod
    def from_state(cls, state: StateField) -> "NSField":
        return cls(state.grid, state.v.copy(), state.u.copy(), state.t)


def ddx(f: np.ndarray, dx: float) -> np.ndarray:
    """Second-order central first derivative on a periodic grid."""
    return (np.roll(f, -1) - np.roll(f, 1)) / (2.0 * dx)


def d2dx2(f: np.ndarray, dx: float) -> np.ndarray:
    """Three-point second derivative on a periodic grid."""
    return (np.roll(f, -1) - 2.0 * f + np.roll(f, 1)) / (dx * dx)


def integrate(f: np.ndarray, dx: float) -> float:
    """Rectangle rule; exact for trigonometric polynomials resolved by the grid."""
    return float(np.sum(f) * dx)


def l2_norm(f: np.ndarray, dx: float) -> float:
    return math.sqrt(integrate(f * f, dx))
