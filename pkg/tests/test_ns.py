import math

import numpy as np
import pytest

from oldroyd1d.diagnostics import ns_energy
from oldroyd1d.errors import ValidationError
from oldroyd1d.experiments import InitialDataSpec, make_initial
from oldroyd1d.grid import GridSpec, NSField, StepControl
from oldroyd1d.model import PhysParams
from oldroyd1d.ns import (
    ViscosityLaw,
    cyclic_tridiag_solve,
    limit_stress,
    ns_dt,
    ns_step,
    run_ns,
    viscous_matrix_bands,
)

P = PhysParams(gamma=1.4, B=1.0, mu=1.0, tau=0.1)


def dense_cyclic(lower, diag, upper):
    n = diag.size
    M = np.zeros((n, n))
    for i in range(n):
        M[i, (i - 1) % n] += lower[i]
        M[i, i] += diag[i]
        M[i, (i + 1) % n] += upper[i]
    return M


@pytest.mark.parametrize("n", [3, 5, 16, 64])
def test_cyclic_solver_matches_dense(n):
    rng = np.random.default_rng(n)
    lower, upper = rng.uniform(-1, 0, n), rng.uniform(-1, 0, n)
    diag = 2.5 + rng.uniform(0, 1, n)
    rhs = rng.standard_normal(n)
    x = cyclic_tridiag_solve(lower, diag, upper, rhs)
    ref = np.linalg.solve(dense_cyclic(lower, diag, upper), rhs)
    np.testing.assert_allclose(x, ref, rtol=1e-12, atol=1e-13)


def test_viscous_bands_match_dense_operator():
    g = GridSpec(N=16)
    v = 1.0 + 0.3 * np.sin(g.x)
    law = ViscosityLaw("neo-limit", 2.0)
    lo, di, up = viscous_matrix_bands(v, law, g.dx, 0.01)
    M = dense_cyclic(lo, di, up)
    np.testing.assert_allclose(M, M.T, atol=1e-12)
    np.testing.assert_allclose(M.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(np.linalg.eigvalsh(M) >= 1.0 - 1e-12)


def test_viscosity_law_validation():
    with pytest.raises(ValidationError):
        ViscosityLaw("quadratic", 1.0)
    with pytest.raises(ValidationError):
        ViscosityLaw("constant", 0.0)
    np.testing.assert_allclose(ViscosityLaw("neo-limit", 2.0).mu_eff(np.array([1.0, 2.0])), [2.0, 1.0])


def test_constant_state_fixed_point():
    g = GridSpec(N=32)
    f = NSField(g, np.full(32, 0.8), np.full(32, -0.2))
    for _ in range(1000):
        f = ns_step(f, P, ViscosityLaw("constant", 1.0), 0.01)
    assert np.max(np.abs(f.v - 0.8)) <= 1e-13 and np.max(np.abs(f.u + 0.2)) <= 1e-13
    np.testing.assert_allclose(limit_stress(f, ViscosityLaw()), 0.0, atol=1e-13)


def test_pure_diffusion_mode_decay():
    errs, bounds = [], []
    for N in (32, 64):
        g = GridSpec(N=N)
        f = NSField(g, np.ones(N), np.sin(g.x))
        dt = 0.25 * g.dx**2
        T = 0.5
        nsteps = int(round(T / dt))
        dt = T / nsteps
        for _ in range(nsteps):
            f = ns_step(f, P, ViscosityLaw("constant", 1.0), dt, include_pressure=False)
        np.testing.assert_array_equal(f.v, 1.0)
        errs.append(np.max(np.abs(f.u - math.exp(-T) * np.sin(g.x))))
        bounds.append(dt + g.dx**2)
    assert errs[1] < errs[0] / 3
    assert all(e <= b for e, b in zip(errs, bounds))


def test_viscous_stage_does_not_grow_l2():
    rng = np.random.default_rng(0)
    g = GridSpec(N=64)
    f = NSField(g, np.ones(64), rng.standard_normal(64))
    out = ns_step(f, P, ViscosityLaw("constant", 1.0), 0.05, include_pressure=False)
    assert np.linalg.norm(out.u) <= np.linalg.norm(f.u)


def test_conservation_and_energy_decay():
    g = GridSpec(N=128)
    init = NSField.from_state(make_initial(InitialDataSpec(amplitude=0.05, v_weight=1.0), g, P))
    mass, mom = init.v.sum(), init.u.sum()
    energies = []
    res = run_ns(init, P, ViscosityLaw("constant", 1.0), StepControl(t_end=1.0),
                 sinks=[lambda f: energies.append(ns_energy(f, P))], sample_dt=0.1)
    assert res.completed
    assert abs(res.final.v.sum() - mass) <= 1e-12 * mass
    assert abs(res.final.u.sum() - mom) <= 1e-12
    assert np.all(np.diff(energies) <= 1e-3 * energies[0])
    assert energies[-1] < energies[0]


def test_ns_dt_acoustic_cfl():
    g = GridSpec(N=64)
    f = NSField(g, np.ones(64), np.zeros(64))
    assert ns_dt(f, P, StepControl(t_end=5.0)) == pytest.approx(0.45 * g.dx / math.sqrt(1.4), rel=1e-14)


def test_zero_perturbation_identity():
    g = GridSpec(N=16)
    res = run_ns(NSField(g, np.ones(16), np.zeros(16)), P, ViscosityLaw(), StepControl(t_end=0.3))
    np.testing.assert_array_equal(res.final.v, 1.0)
    np.testing.assert_array_equal(res.final.u, 0.0)
