"""Scalar functionals of one-body densities in the continuum (N = infinity) limit.

Momentum space is never discretized: every momentum integral is evaluated in
Gaussian closed form, so a phase-space density is represented by its spatial
part plus a temperature.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .domain import DensityField, Grid, project_to_simplex
from .errors import ConvergenceError, GridMismatchError
from .potentials import KernelMatrix

__all__ = [
    "MINUS_INF",
    "is_minus_inf",
    "PhaseDensity",
    "EnergyBudget",
    "bilinear_form",
    "relative_entropy",
    "theta_of_rho",
    "quasi_interaction_energy",
    "interaction_entropy_density",
    "maxwellian_value",
    "h_function",
    "energy_of_f",
    "perfect_gas_entropy",
    "perfect_gas_t_potential",
    "continuum_ground_energy",
]


class _MinusInfinity:
    """Tagged minus-infinity: an explicit marker kept out of float arithmetic."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "MINUS_INF"

    def __lt__(self, other):
        return not isinstance(other, _MinusInfinity)

    def __le__(self, other):
        return True

    def __gt__(self, other):
        return False

    def __ge__(self, other):
        return isinstance(other, _MinusInfinity)

    def __eq__(self, other):
        return isinstance(other, _MinusInfinity)

    def __hash__(self):
        return hash("MINUS_INF")


MINUS_INF = _MinusInfinity()


def is_minus_inf(x) -> bool:
    return isinstance(x, _MinusInfinity)


@dataclass(frozen=True)
class PhaseDensity:
    """Product phase-space density: Maxwellian in momentum times rho in position.

    The Maxwellian is carried analytically through its temperature theta.
    """

    rho: DensityField
    theta: float

    def __post_init__(self):
        if self.theta <= 0:
            raise ValueError(f"temperature must be positive, got {self.theta}")

    @property
    def dimension(self) -> int:
        return self.rho.grid.dimension


@dataclass(frozen=True)
class EnergyBudget:
    """Kinetic + interaction split of the energy per pair-scaling unit."""

    kinetic: float
    interaction: float

    @property
    def total(self) -> float:
        return self.kinetic + self.interaction


def _check_grid(rho: DensityField, K: KernelMatrix):
    if rho.grid.n_nodes != K.grid.n_nodes or not np.array_equal(
        rho.grid.bounds, K.grid.bounds
    ):
        raise GridMismatchError("density and kernel matrix live on different grids")


def bilinear_form(rho: DensityField, K: KernelMatrix) -> float:
    """Half the double integral of U rho rho, discretized on the grid."""
    _check_grid(rho, K)
    v = rho.masses
    return 0.5 * float(v @ K.entries @ v)


def bilinear_form_masses(x: np.ndarray, K: KernelMatrix) -> float:
    """Same quadratic form on a bare probability-mass vector."""
    return 0.5 * float(x @ K.entries @ x)


def relative_entropy(rho: DensityField) -> float:
    """Entropy of rho relative to the normalized flat measure; always <= 0.

    Computed as -sum_i w_i rho_i ln(|box| rho_i) with 0 ln 0 = 0.
    """
    vol = rho.grid.total_volume
    v = rho.values
    w = rho.grid.weights
    mask = v > 0
    return -float(np.sum(w[mask] * v[mask] * np.log(vol * v[mask])))


def theta_of_rho(rho: DensityField, eps: float, K: KernelMatrix) -> float:
    """Temperature that balances the energy budget: (2/D)(eps - <rho,rho>).

    May be <= 0 for infeasible rho; the caller decides what that means.
    """
    D = rho.grid.dimension
    return (2.0 / D) * (eps - bilinear_form(rho, K))


def quasi_interaction_energy(rho: DensityField, eps: float, K: KernelMatrix):
    """(D/2) ln(1 - <rho,rho>/eps), or MINUS_INF when the argument is not positive."""
    b = bilinear_form(rho, K)
    if b >= eps:
        return MINUS_INF
    D = rho.grid.dimension
    return 0.5 * D * np.log(1.0 - b / eps)


def interaction_entropy_density(rho: DensityField, eps: float, K: KernelMatrix):
    """Relative entropy plus quasi-interaction energy; <= 0 for nonnegative kernels."""
    q = quasi_interaction_energy(rho, eps, K)
    if is_minus_inf(q):
        return MINUS_INF
    return relative_entropy(rho) + q


def maxwellian_value(theta: float, p) -> float:
    """Gaussian momentum density (2 pi theta)^(-D/2) exp(-|p|^2 / (2 theta))."""
    if theta <= 0:
        raise ValueError(f"temperature must be positive, got {theta}")
    p = np.asarray(p, dtype=float)
    D = p.shape[-1] if p.ndim else 1
    return float(
        (2 * np.pi * theta) ** (-0.5 * D) * np.exp(-0.5 * np.sum(p * p, axis=-1) / theta)
    )


def h_function(f: PhaseDensity) -> float:
    """Boltzmann's H function of a Maxwellian-product density, in closed form.

    H(f) = int rho ln rho - (D/2) ln(2 pi theta) - D/2 - 1.
    """
    rho = f.rho
    D = f.dimension
    v = rho.values
    w = rho.grid.weights
    mask = v > 0
    int_rho_ln_rho = float(np.sum(w[mask] * v[mask] * np.log(v[mask])))
    return int_rho_ln_rho - 0.5 * D * np.log(2 * np.pi * f.theta) - 0.5 * D - 1.0


def energy_of_f(f: PhaseDensity, K: KernelMatrix) -> EnergyBudget:
    """Kinetic (D/2) theta plus interaction <rho,rho>."""
    D = f.dimension
    return EnergyBudget(kinetic=0.5 * D * f.theta, interaction=bilinear_form(f.rho, K))


def perfect_gas_entropy(eps: float, grid: Grid) -> float:
    """Entropy per particle of the spatially uniform ideal gas at energy eps.

    Convention: 1 + ln|box| + (D/2) ln(4 pi e eps / D).  The additive
    constant 1 is fixed by requiring s = -H(f) at the entropy maximizer and
    Legendre consistency with the canonical potential of the ideal gas.
    """
    if eps <= 0:
        raise ValueError(f"energy must be positive, got {eps}")
    D = grid.dimension
    return 1.0 + np.log(grid.total_volume) + 0.5 * D * np.log(4 * np.pi * np.e * eps / D)


def perfect_gas_t_potential(theta: float, grid: Grid) -> float:
    """Canonical potential per particle of the uniform ideal gas at temperature theta."""
    if theta <= 0:
        raise ValueError(f"temperature must be positive, got {theta}")
    D = grid.dimension
    return 1.0 + np.log(grid.total_volume) + 0.5 * D * np.log(2 * np.pi * theta)


# -- ground state of the interaction functional -------------------------------

def continuum_ground_energy(
    K: KernelMatrix,
    n_starts: int = 9,
    max_iter: int = 20000,
    tol: float = 1e-12,
    seed: int = 0,
):
    """Minimize <rho,rho> over probability densities on the grid.

    Projected gradient descent with Armijo backtracking on the probability
    mass simplex, multistarted from the uniform density plus vertex-biased
    random starts.  Returns (value, minimizer DensityField).

    Raises ConvergenceError with the best iterate attached if no start
    reaches the tolerance.
    """
    U = K.entries
    n = U.shape[0]
    rng = np.random.default_rng(seed)
    starts = [np.full(n, 1.0 / n)]
    for _ in range(max(n_starts - 1, 0)):
        v = rng.random(n) ** 4  # biased toward simplex vertices
        starts.append(v / v.sum())

    scale = max(1.0, float(np.max(np.abs(U))))

    def kkt_residual(x, g):
        # stationarity: gradient equals its multiplier on the support, and is
        # no smaller off it
        support = x > 1e-14
        nu = float(x @ g)
        r_support = float(np.max(np.abs(g[support] - nu))) if support.any() else 0.0
        r_off = float(max(0.0, np.max(nu - g))) if (~support).any() else 0.0
        return max(r_support, r_off)

    results = []
    for x0 in starts:
        x = x0.copy()
        f = 0.5 * float(x @ U @ x)
        t = 1.0
        ok = False
        for _ in range(max_iter):
            g = U @ x
            if kkt_residual(x, g) <= 1e-10 * scale:
                ok = True
                break
            y = project_to_simplex(x - t * g)
            fy = 0.5 * float(y @ U @ y)
            bt = 0
            while fy > f + 1e-4 * float(g @ (y - x)) + 1e-18 and bt < 60:
                t *= 0.5
                y = project_to_simplex(x - t * g)
                fy = 0.5 * float(y @ U @ y)
                bt += 1
            step = float(np.max(np.abs(y - x)))
            x, f = y, fy
            t = min(t * 1.5, 1e6)
            if step < tol:
                ok = True
                break
        results.append((f, x, ok))

    best_val, best_x, _ = min(results, key=lambda r: r[0])
    polished = _active_set_polish(U, best_x, 1e-10 * scale)
    any_ok = any(ok for _, _, ok in results)
    if polished is not None:
        f_pol = 0.5 * float(polished @ U @ polished)
        if f_pol <= best_val + 1e-12 * scale:
            best_val, best_x = f_pol, polished
            any_ok = True
    grid = K.grid
    rho = DensityField(grid, best_x / grid.weights)
    if not any_ok:
        raise ConvergenceError(
            "ground-state projected gradient did not converge", best=(best_val, rho)
        )
    return best_val, rho


def _active_set_polish(U, x0, kkt_tol, max_rounds=60):
    """Refine a near-optimal simplex QP point by solving on its support set.

    Solves the stationarity system on the current support, drops negative
    coordinates, adds the most violating off-support index, and stops when
    the KKT conditions hold.  Returns None when the linear algebra fails
    (e.g. indefinite or rank-deficient kernels), letting the caller keep the
    projected-gradient answer.
    """
    n = U.shape[0]
    support = x0 > max(1e-12, 1e-6 * x0.max())
    if not support.any():
        return None
    for _ in range(max_rounds):
        S = np.flatnonzero(support)
        k = S.size
        A = np.zeros((k + 1, k + 1))
        A[:k, :k] = U[np.ix_(S, S)]
        A[:k, k] = 1.0
        A[k, :k] = 1.0
        rhs = np.zeros(k + 1)
        rhs[k] = 1.0
        try:
            sol = np.linalg.lstsq(A, rhs, rcond=None)[0]
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(sol)):
            return None
        xs, nu = sol[:k], sol[k]
        if abs(float(xs.sum()) - 1.0) > 1e-9:
            return None
        if np.any(xs < -1e-12):
            support[S[int(np.argmin(xs))]] = False
            if not support.any():
                return None
            continue
        x = np.zeros(n)
        x[S] = np.maximum(xs, 0.0)
        g = U @ x
        slack = g - nu
        worst = int(np.argmin(slack))
        if slack[worst] < -kkt_tol and not support[worst]:
            support[worst] = True
            continue
        return x
    return None


def ground_energy_oracle(K: KernelMatrix):
    """Exhaustive active-set solver for min (1/2) x'Ux on the simplex (n <= 12).

    Test oracle: enumerates every support set, solves the equality-constrained
    stationarity system, and keeps the best KKT-feasible point.
    """
    U = K.entries
    n = U.shape[0]
    if n > 12:
        raise ValueError("oracle is exhaustive; use n <= 12")
    best = (np.inf, None)
    for k in range(1, n + 1):
        for S in combinations(range(n), k):
            S = list(S)
            A = np.zeros((k + 1, k + 1))
            A[:k, :k] = U[np.ix_(S, S)]
            A[:k, k] = 1.0
            A[k, :k] = 1.0
            rhs = np.zeros(k + 1)
            rhs[k] = 1.0
            try:
                sol = np.linalg.solve(A, rhs)
            except np.linalg.LinAlgError:
                continue
            xs, nu = sol[:k], sol[k]
            if np.any(xs < -1e-12):
                continue
            x = np.zeros(n)
            x[S] = np.maximum(xs, 0.0)
            if np.all(U @ x - nu >= -1e-9):
                f = 0.5 * float(x @ U @ x)
                if f < best[0]:
                    best = (f, x)
    return best
