"""Warm-up: systems solvable on paper.

The ideal gas (zero kernel) and the constant-coupling gas both keep a flat
density, so every thermodynamic quantity has a closed form.  This script
solves them numerically and prints the comparison table.
"""

import numpy as np

import mfmicro as mf

grid = mf.build_grid(3, (0.0, 1.0), 4)

print("== ideal gas, eps = 1.5 ==")
K0 = mf.assemble_kernel(mf.zero_potential(), grid)
sol = mf.solve_microcanonical(1.5, K0)
print(f"theta      = {sol.theta:.12f}   (expected {2 * 1.5 / 3:.12f})")
print(f"s_I        = {sol.s_I:.3e}        (expected 0)")
print(f"s          = {sol.s:.12f}   (ideal-gas entropy {mf.perfect_gas_entropy(1.5, grid):.12f})")

print()
print("== constant coupling c = 4, eps = 3 ==")
c, eps = 4.0, 3.0
Kc = mf.assemble_kernel(mf.constant_potential(c), grid)
sol = mf.solve_microcanonical(eps, Kc)
print(f"theta      = {sol.theta:.12f}   (expected {(2 / 3) * (eps - c / 2):.12f})")
print(f"s_I        = {sol.s_I:.12f}   (expected {1.5 * np.log(1 - c / (2 * eps)):.12f})")

theta = sol.theta
can = mf.solve_canonical(theta, Kc)
phi_expected = mf.perfect_gas_t_potential(theta, grid) - c / (2 * theta)
print(f"phi        = {can.objective:.12f}   (expected {phi_expected:.12f})")

scan = mf.entropy_scan(2.2, 5.0, 48, Kc)
leg = mf.legendre_check(theta, Kc, scan)
print(f"Legendre maximizing energy = {leg['eps_star']:.8f} "
      f"(expected {1.5 * theta + c / 2:.8f}), duality gap {leg['gap']:.2e}")

ident = mf.entropy_hfunction_identity(sol)
print(f"entropy vs -H(f) identity gap = {ident['gap']:.2e}")
