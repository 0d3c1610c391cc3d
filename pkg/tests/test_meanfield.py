import numpy as np
import pytest

import mfmicro as mf
from mfmicro.errors import InfeasibleEnergyError

from conftest import random_density


# -- fixed-energy solver: exactly solvable kernels -------------------------------

def test_zero_kernel_solution(grid3d4):
    K = mf.assemble_kernel(mf.zero_potential(), grid3d4)
    sol = mf.solve_microcanonical(1.5, K)
    assert np.allclose(sol.rho.values, 1.0, rtol=1e-12)
    assert abs(sol.theta - 1.0) <= 1e-10
    assert abs(sol.s_I) <= 1e-10
    assert abs(sol.s - mf.perfect_gas_entropy(1.5, grid3d4)) <= 1e-10


def test_constant_kernel_solution(grid3d4):
    c, eps = 4.0, 3.0
    K = mf.assemble_kernel(mf.constant_potential(c), grid3d4)
    sol = mf.solve_microcanonical(eps, K)
    D = 3
    assert np.allclose(sol.rho.values, 1.0, rtol=1e-10)
    assert abs(sol.theta - (2.0 / D) * (eps - c / 2)) <= 1e-8
    assert abs(sol.s_I - 0.5 * D * np.log(1 - c / (2 * eps))) <= 1e-8


def test_infeasible_energy_raises(grid3d4):
    K = mf.assemble_kernel(mf.constant_potential(4.0), grid3d4)
    with pytest.raises(InfeasibleEnergyError):
        mf.solve_microcanonical(1.9, K)  # below eps_g = 2


def test_solution_invariants(coulomb16):
    sol = mf.solve_microcanonical(2.0, K=coulomb16)
    assert sol.diagnostics["bilinear"] < 2.0  # strict feasibility
    assert sol.theta > 0
    assert sol.fixed_point_residual <= 1e-10
    # energy recovery to 1e-8 relative
    assert abs(sol.diagnostics["energy_recovery"] - 2.0) <= 1e-8 * 2.0
    # mass exactly preserved by the iteration map
    assert abs(float(np.sum(sol.rho.masses)) - 1.0) < 1e-12


def test_solver_agrees_with_variational_oracle(coulomb16):
    sol = mf.solve_microcanonical(2.0, coulomb16)
    rho, S = mf.maximize_interaction_entropy(2.0, coulomb16)
    assert abs(S - sol.s_I) <= 1e-6
    # the oracle output satisfies the self-consistency equation
    grid = coulomb16.grid
    x = rho.masses
    theta = mf.theta_of_rho(rho, 2.0, coulomb16)
    field = coulomb16.entries @ x
    e = grid.weights * np.exp(-(field - field.min()) / theta)
    T = e / e.sum()
    assert float(np.max(np.abs(x - T) / grid.weights)) <= 1e-6


def test_variational_oracle_against_dense_simplex_scan():
    # 4-cell grid: exhaustive scan of the 3-simplex at step 0.01
    g = mf.build_grid(1, (0.0, 1.0), 4)
    K = mf.assemble_kernel(mf.softened_coulomb(0.1), g)
    eps = 2.5
    step = 0.01
    n = round(1.0 / step)
    best = -np.inf
    lam = g.weights / g.total_volume
    U = K.entries
    for i in range(n + 1):
        for j in range(n + 1 - i):
            ks = np.arange(n + 1 - i - j)
            x = np.empty((ks.size, 4))
            x[:, 0] = i * step
            x[:, 1] = j * step
            x[:, 2] = ks * step
            x[:, 3] = 1.0 - x[:, :3].sum(axis=1)
            b = 0.5 * np.einsum("bi,ij,bj->b", x, U, x)
            ok = b < eps
            if not ok.any():
                continue
            xe = np.maximum(x[ok], 1e-300)
            R = -np.sum(xe * np.log(xe / lam), axis=1)
            S = R + 0.5 * np.log(1.0 - b[ok] / eps)
            best = max(best, float(S.max()))
    _, S_solver = mf.maximize_interaction_entropy(eps, K)
    # the solver must beat the grid scan up to its resolution
    assert S_solver >= best - 1e-9
    assert abs(S_solver - best) < 5e-4


def test_warm_and_cold_scans_agree(coulomb16):
    scan = mf.entropy_scan(1.8, 3.0, 7, K=coulomb16)
    for e, s in zip(scan.eps_values, scan.solutions):
        cold = mf.solve_microcanonical(float(e), coulomb16)
        assert abs(cold.s - s.s) <= 1e-8


def test_scan_zero_kernel(grid3d4):
    K = mf.assemble_kernel(mf.zero_potential(), grid3d4)
    scan = mf.entropy_scan(0.5, 3.0, 12, K)
    assert scan.monotone and scan.concave and not scan.failures
    for e, s in zip(scan.eps_values, scan.solutions):
        assert abs(s.s - mf.perfect_gas_entropy(float(e), grid3d4)) <= 1e-10


def test_scan_constant_kernel_closed_form(grid3d4):
    c = 4.0
    K = mf.assemble_kernel(mf.constant_potential(c), grid3d4)
    scan = mf.entropy_scan(2.4, 5.0, 10, K)
    assert scan.monotone
    for e, s in zip(scan.eps_values, scan.solutions):
        expect = mf.perfect_gas_entropy(float(e), grid3d4) + 1.5 * np.log(
            1 - c / (2 * float(e))
        )
        assert abs(s.s - expect) <= 1e-8


def test_scan_coulomb_strictly_increasing(coulomb16):
    scan = mf.entropy_scan(1.8, 4.0, 16, coulomb16)
    s_vals = np.array([s.s for s in scan.solutions])
    assert np.all(np.diff(s_vals) > 0)
    assert scan.monotone


# -- auxiliary constrained entropy ------------------------------------------------

def test_auxiliary_entropy_constant_kernel(grid3d4):
    K = mf.assemble_kernel(mf.constant_potential(4.0), grid3d4)
    assert mf.auxiliary_interaction_entropy(2.0, K) == 0.0
    assert mf.auxiliary_interaction_entropy(5.0, K) == 0.0
    with pytest.raises(InfeasibleEnergyError):
        mf.auxiliary_interaction_entropy(1.5, K)


def test_auxiliary_entropy_against_simplex_scan():
    g = mf.build_grid(1, (0.0, 1.0), 4)
    K = mf.assemble_kernel(mf.softened_coulomb(0.1), g)
    eps_g, _ = mf.continuum_ground_energy(K)
    a = eps_g + 0.3 * (2.2 - eps_g)
    val = mf.auxiliary_interaction_entropy(a, K)
    # brute-force scan of the 3-simplex at step 0.005
    step = 0.005
    n = round(1.0 / step)
    lam = g.weights / g.total_volume
    U = K.entries
    best = -np.inf
    for i in range(n + 1):
        for j in range(n + 1 - i):
            ks = np.arange(n + 1 - i - j)
            x = np.empty((ks.size, 4))
            x[:, 0] = i * step
            x[:, 1] = j * step
            x[:, 2] = ks * step
            x[:, 3] = 1.0 - x[:, :3].sum(axis=1)
            b = 0.5 * np.einsum("bi,ij,bj->b", x, U, x)
            ok = b <= a
            if not ok.any():
                continue
            xe = np.maximum(x[ok], 1e-300)
            R = -np.sum(xe * np.log(xe / lam), axis=1)
            best = max(best, float(R.max()))
    assert val >= best - 1e-9
    assert abs(val - best) < 2e-3


def test_auxiliary_entropy_nonpositive_monotone(coulomb16):
    eps_g, _ = mf.continuum_ground_energy(coulomb16)
    args = np.linspace(eps_g + 1e-6, 2.5, 12)
    vals = [mf.auxiliary_interaction_entropy(float(a), coulomb16) for a in args]
    assert all(v <= 1e-12 for v in vals)
    assert all(b >= a - 1e-10 for a, b in zip(vals, vals[1:]))


# -- decomposition identities ------------------------------------------------------

def test_decompositions_zero_kernel(grid3d4):
    K = mf.assemble_kernel(mf.zero_potential(), grid3d4)
    rep = mf.verify_entropy_decompositions(1.5, K, n_grid=16)
    assert rep["gap_total"] <= 1e-10
    assert rep["gap_interaction"] <= 1e-10
    assert abs(rep["x_total"] - 1.0) < 1e-6


def test_decompositions_constant_kernel(grid3d4):
    c, eps = 4.0, 3.0
    K = mf.assemble_kernel(mf.constant_potential(c), grid3d4)
    rep = mf.verify_entropy_decompositions(eps, K, n_grid=16)
    assert rep["gap_total"] <= 1e-6
    assert rep["gap_interaction"] <= 1e-6
    assert abs(rep["x_total"] - (1 - c / (2 * eps))) < 1e-5


def test_decompositions_coulomb(coulomb16):
    rep = mf.verify_entropy_decompositions(2.0, coulomb16, n_grid=64)
    assert rep["gap_total"] <= 1e-4
    assert rep["gap_interaction"] <= 1e-4
    # reporting table is monotone increasing in its argument
    assert np.all(np.diff(rep["sbar_values"]) >= -1e-9)


# -- canonical ensemble ---------------------------------------------------------

def test_canonical_zero_kernel_unit_potential():
    g = mf.build_grid(3, (0.0, 1.0), 2)
    K = mf.assemble_kernel(mf.zero_potential(), g)
    sol = mf.solve_canonical(1.0 / (2 * np.pi), K)
    assert abs(sol.objective - 1.0) <= 1e-12
    assert np.allclose(sol.rho.values, 1.0, rtol=1e-12)


def test_canonical_constant_kernel(grid3d4):
    c, theta = 4.0, 2.0 / 3.0
    K = mf.assemble_kernel(mf.constant_potential(c), grid3d4)
    sol = mf.solve_canonical(theta, K)
    expect = mf.perfect_gas_t_potential(theta, grid3d4) - c / (2 * theta)
    assert abs(sol.objective - expect) <= 1e-10
    assert np.allclose(sol.rho.values, 1.0, rtol=1e-10)


def test_canonical_coulomb_residual(coulomb16):
    sol = mf.solve_canonical(1.0, coulomb16)
    assert sol.fixed_point_residual <= 1e-10


# -- Legendre duality -------------------------------------------------------------

def test_legendre_zero_kernel(grid3d4):
    K = mf.assemble_kernel(mf.zero_potential(), grid3d4)
    theta = 0.8
    scan = mf.entropy_scan(0.5, 3.0, 64, K)
    rep = mf.legendre_check(theta, K, scan)
    assert rep["gap"] <= 1e-8
    assert abs(rep["eps_star"] - 1.5 * theta) < 1e-3
    assert not rep["widen_scan"]


def test_legendre_constant_kernel(grid3d4):
    c, theta = 4.0, 1.0
    K = mf.assemble_kernel(mf.constant_potential(c), grid3d4)
    scan = mf.entropy_scan(2.2, 6.0, 64, K)
    rep = mf.legendre_check(theta, K, scan)
    assert rep["gap"] <= 1e-8
    assert abs(rep["eps_star"] - (1.5 * theta + c / 2)) < 1e-3


def test_legendre_coulomb(coulomb16):
    scan = mf.entropy_scan(1.78, 3.8, 64, coulomb16)
    rep = mf.legendre_check(1.0, coulomb16, scan)
    assert rep["gap"] <= 1e-4
    assert rep["eps_consistency"] < 5e-3
    assert not rep["widen_scan"]


def test_legendre_boundary_advisory(coulomb16):
    scan = mf.entropy_scan(3.0, 3.8, 8, coulomb16)  # maximizer below range
    rep = mf.legendre_check(1.0, coulomb16, scan)
    assert rep["widen_scan"]


# -- entropy / H-function identity ------------------------------------------------

def test_identity_zero_kernel(grid3d4):
    K = mf.assemble_kernel(mf.zero_potential(), grid3d4)
    rep = mf.entropy_hfunction_identity(mf.solve_microcanonical(1.5, K))
    assert rep["gap"] <= 1e-10


def test_identity_constant_kernel(grid3d4):
    K = mf.assemble_kernel(mf.constant_potential(4.0), grid3d4)
    rep = mf.entropy_hfunction_identity(mf.solve_microcanonical(3.0, K))
    assert rep["gap"] <= 1e-10


def test_identity_coulomb(coulomb16):
    rep = mf.entropy_hfunction_identity(mf.solve_microcanonical(2.0, coulomb16))
    assert rep["gap"] <= 1e-6


# -- determinism -------------------------------------------------------------------

def test_solver_deterministic(coulomb16):
    a = mf.solve_microcanonical(2.0, coulomb16, mf.SolverOptions(seed=42))
    b = mf.solve_microcanonical(2.0, coulomb16, mf.SolverOptions(seed=42))
    assert np.array_equal(a.rho.values, b.rho.values)
    assert a.s_I == b.s_I
