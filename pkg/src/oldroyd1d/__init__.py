"""Relaxed-stress (Oldroyd-type) compressible flow in one Lagrangian dimension.

Finite-difference solvers for the relaxed system and its Navier-Stokes limit,
energy diagnostics, and the parameter-sweep experiments built on them.
"""

from .diagnostics import (
    DiagnosticsSink,
    EnergyReport,
    SnapshotSink,
    apriori_residual,
    energy_ledger,
    physical_energy,
    sobolev_energy,
    taylor_bounds,
)
from .errors import (
    AdmissibilityError,
    BreakdownError,
    DomainError,
    InternalConsistencyError,
    NonFiniteError,
    Oldroyd1DError,
    ValidationError,
)
from .experiments import (
    InitialDataSpec,
    grid_convergence,
    initial_layer_probe,
    make_initial,
    neo_hookean_sweep,
    tau_sweep,
    threshold_probe,
)
from .grid import GridSpec, NSField, StateField, StepControl
from .model import (
    CellState,
    PhysParams,
    admissibility_scan,
    characteristic_speeds,
    dpressure,
    pressure,
    symmetrizer,
)
from .ns import ViscosityLaw, run_ns
from .relaxed import run_relaxed, strang_step

__version__ = "0.1.0"
