"""Finite-N machinery: interaction energies, ground states, Metropolis sampling
of the fixed-energy configurational measure, and Monte Carlo entropy estimates.

Chains work on the configurational marginal with momenta resampled exactly
afterwards (the conditional momentum law on the energy surface is analytic:
uniform on a sphere whose radius is fixed by the configurational energy), so
no phase-space random walk is ever needed.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import simpson
from scipy.special import gammaln

from .domain import DensityField, Grid
from .errors import ConfigError, ConvergenceError, InfeasibleEnergyError
from .potentials import PairPotential

__all__ = [
    "ParticleConfiguration",
    "GroundStateRecord",
    "GroundStateOptions",
    "ChainOptions",
    "TiOptions",
    "interaction_hamiltonian",
    "empirical_interaction_density",
    "ground_state",
    "monotonicity_report",
    "sample_configurations",
    "smallest_feasible_n",
    "resample_momenta",
    "position_histogram",
    "lln_test",
    "default_test_functions",
    "estimate_interaction_entropy",
    "finite_n_entropy",
    "jensen_superadditivity_check",
    "kinetic_prefactor_per_particle",
]


@dataclass
class ParticleConfiguration:
    """N particle positions in the box, optionally with momenta."""

    positions: np.ndarray               # (N, D)
    momenta: np.ndarray | None = None   # (N, D)

    def __post_init__(self):
        self.positions = np.atleast_2d(np.asarray(self.positions, dtype=float))

    @property
    def n_particles(self) -> int:
        return self.positions.shape[0]

    @property
    def dimension(self) -> int:
        return self.positions.shape[1]


def interaction_hamiltonian(config, pot: PairPotential) -> float:
    """Sum of the kernel over unordered particle pairs; the diagonal is never touched.

    Returns +inf if a singular kernel is evaluated at coincident points
    (a measure-zero event, reported as such rather than raised).
    """
    q = config.positions if isinstance(config, ParticleConfiguration) else np.atleast_2d(config)
    return float(_interaction_batch(q[None, :, :], pot)[0])


def _interaction_batch(Q: np.ndarray, pot: PairPotential) -> np.ndarray:
    """Interaction energy for a batch of configurations, shape (B, N, D) -> (B,)."""
    B, N, _ = Q.shape
    iu, ju = np.triu_indices(N, 1)
    vals = pot.pair_values(Q[:, iu, :], Q[:, ju, :])
    with np.errstate(over="ignore"):
        return vals.sum(axis=1)


def _pair_field(Q: np.ndarray, qi: np.ndarray, i: int, pot: PairPotential) -> np.ndarray:
    """Sum over j != i of U(qi, Q_j) for a batch: Q (B,N,D), qi (B,D) -> (B,)."""
    vals = pot.pair_values(qi[:, None, :], Q)
    vals[:, i] = 0.0
    return vals.sum(axis=1)


def empirical_interaction_density(positions: np.ndarray, pot: PairPotential) -> float:
    """Bilinear interaction of the empirical one-point measure, diagonal included.

    (1/N^2) sum over ALL ordered pairs of (1/2) U, with the coincidence value
    taken from the kernel's diagonal convention.  Exceeds I/N^2 by the O(1/N)
    self-interaction term.
    """
    q = np.atleast_2d(positions)
    N = q.shape[0]
    total = 2.0 * _interaction_batch(q[None], pot)[0]  # ordered off-diagonal pairs
    diag = sum(pot.diagonal_value(qi) for qi in q)
    return 0.5 * (total + diag) / (N * N)


# -- ground states -------------------------------------------------------------

@dataclass
class GroundStateRecord:
    n_particles: int
    best_value: float                  # minimal interaction sum I
    configuration: np.ndarray
    pair_specific: float               # I / (N (N-1))
    quasi_pair_specific: float         # I / N^2
    restarts_used: int
    best_history: list = field(default_factory=list)
    upper_bound_only: bool = True      # local search certifies an upper bound
    nonneg_shift: float = 0.0

    @property
    def best_value_unshifted(self) -> float:
        """Interaction sum with any nonnegativity offset removed again."""
        N = self.n_particles
        return self.best_value - self.nonneg_shift * N * (N - 1) / 2.0


@dataclass(frozen=True)
class GroundStateOptions:
    n_restarts: int = 32
    max_iter: int = 2000
    gtol: float = 1e-10
    seed: int = 0
    max_doublings: int = 3


def ground_state(
    N: int, pot: PairPotential, grid: Grid, opts: GroundStateOptions | None = None
) -> GroundStateRecord:
    """Multistart local minimization of the interaction sum over box configurations.

    Projected gradient descent with Armijo backtracking where the kernel has
    a usable slope, compass pattern search otherwise.  The restart budget is
    doubled (up to a cap) whenever the incumbent changed in the last quartile
    of restarts, a cheap guard against under-searched landscapes.  The result
    is an upper bound on the true minimum and is flagged as such.
    """
    if N < 2:
        raise ConfigError("ground states need at least two particles")
    opts = opts or GroundStateOptions()
    lo, hi = grid.bounds[:, 0], grid.bounds[:, 1]
    rng = np.random.default_rng(opts.seed)

    best_val, best_q = np.inf, None
    history = []
    budget = opts.n_restarts
    restarts = 0
    doublings = 0
    best_at = -1
    while restarts < budget:
        q0 = lo + (hi - lo) * rng.random((N, grid.dimension))
        if pot.differentiable:
            val, q = _descend(q0, pot, lo, hi, opts)
        else:
            val, q = _pattern_search(q0, pot, lo, hi, opts)
        if val < best_val - 1e-13:
            best_val, best_q = val, q
            best_at = restarts
        history.append(best_val)
        restarts += 1
        if restarts == budget and best_at >= (3 * budget) // 4 and doublings < opts.max_doublings:
            budget *= 2
            doublings += 1
    return GroundStateRecord(
        n_particles=N,
        best_value=best_val,
        configuration=best_q,
        pair_specific=best_val / (N * (N - 1)),
        quasi_pair_specific=best_val / (N * N),
        restarts_used=restarts,
        best_history=history,
        nonneg_shift=pot.nonneg_shift,
    )


def _interaction_and_grad(q, pot):
    N = q.shape[0]
    diff = q[:, None, :] - q[None, :, :]
    r = np.linalg.norm(diff, axis=-1)
    iu = np.triu_indices(N, 1)
    val = float(pot.radial(r[iu]).sum())
    rs = np.maximum(r, 1e-300)
    slope = pot.radial_slope(rs)
    np.fill_diagonal(slope, 0.0)
    coincident = (r <= 0) & ~np.eye(N, dtype=bool)
    slope[coincident] = 0.0  # symmetric limit
    g = np.sum((slope / rs)[:, :, None] * diff, axis=1)
    return val, g


def _descend(q0, pot, lo, hi, opts):
    q = np.clip(q0, lo, hi)
    val, g = _interaction_and_grad(q, pot)
    t = 0.1
    for _ in range(opts.max_iter):
        qn = np.clip(q - t * g, lo, hi)
        vn, gn = _interaction_and_grad(qn, pot)
        bt = 0
        while vn > val + 1e-4 * np.sum(g * (qn - q)) + 1e-15 and bt < 50:
            t *= 0.5
            qn = np.clip(q - t * g, lo, hi)
            vn, gn = _interaction_and_grad(qn, pot)
            bt += 1
        move = float(np.max(np.abs(qn - q)))
        q, val, g = qn, vn, gn
        t = min(t * 1.6, 1e3)
        if move < opts.gtol:
            break
    return val, q


def _pattern_search(q0, pot, lo, hi, opts):
    q = np.clip(q0, lo, hi)
    val = interaction_hamiltonian(ParticleConfiguration(q), pot)
    step = 0.25 * float(np.max(hi - lo))
    while step > opts.gtol:
        improved = False
        for i in range(q.shape[0]):
            for a in range(q.shape[1]):
                for sgn in (+1.0, -1.0):
                    qt = q.copy()
                    qt[i, a] = np.clip(qt[i, a] + sgn * step, lo[a], hi[a])
                    vt = interaction_hamiltonian(ParticleConfiguration(qt), pot)
                    if vt < val - 1e-15:
                        q, val = qt, vt
                        improved = True
        if not improved:
            step *= 0.5
    return val, q


def monotonicity_report(records: list, eps_g_continuum: float, tol: float = 1e-9) -> dict:
    """Certify the two ground-state growth inequalities along a chain of N values.

    Checks, for consecutive records: the pair-specific energy never
    decreases; the quasi-pair-specific energy grows at least by the factor
    N^2 / ((N+1)(N-1)); and every value sits at or below the continuum
    ground energy.  A violation is a certificate of insufficient
    optimization (the inequalities are necessary conditions for true
    minima), not of a physics failure.
    """
    recs = sorted(records, key=lambda r: r.n_particles)
    pair_ok, quasi_ok, bound_ok = True, True, True
    rows = []
    for a, b in zip(recs, recs[1:]):
        if b.n_particles != a.n_particles + 1:
            raise ConfigError("records must cover consecutive particle numbers")
        N = a.n_particles
        factor = N * N / ((N + 1.0) * (N - 1.0))
        row = {
            "N": N,
            "pair_increase": b.pair_specific - a.pair_specific,
            "quasi_margin": b.quasi_pair_specific - factor * a.quasi_pair_specific,
        }
        pair_ok &= row["pair_increase"] >= -tol
        quasi_ok &= row["quasi_margin"] >= -tol
        rows.append(row)
    for r in recs:
        bound_ok &= r.quasi_pair_specific <= r.pair_specific + tol
        bound_ok &= r.pair_specific <= eps_g_continuum + tol
    return {
        "pair_specific_monotone": pair_ok,
        "quasi_pair_growth": quasi_ok,
        "continuum_bound": bound_ok,
        "all_pass": pair_ok and quasi_ok and bound_ok,
        "rows": rows,
        "eps_g_continuum": eps_g_continuum,
    }


# -- Metropolis chains on the configurational measure ---------------------------

@dataclass(frozen=True)
class ChainOptions:
    sweeps: int = 2000
    burn_in: int = 500
    thin: int = 5
    n_chains: int = 1
    step0: float = 0.2            # initial move scale, absolute units
    accept_low: float = 0.25
    accept_high: float = 0.40
    adapt_every: int = 20         # sweeps between step adaptations (burn-in only)
    audit_every: int = 200        # sweeps between exact energy audits
    seed: int = 0
    feasibility_probes: int = 10000


class _BatchChains:
    """Vectorized single-site random-walk chains targeting (1 - I/E)_+^k.

    One numpy state for all chains: positions (B, N, D), energies (B,), one
    exponent per chain.  Proposals leaving the box are rejected, which
    enforces confinement exactly.
    """

    def __init__(self, pot, grid, N, E, k_vec, opts: ChainOptions, rng):
        self.pot = pot
        self.grid = grid
        self.N = N
        self.E = E
        self.k = np.asarray(k_vec, dtype=float)
        self.B = self.k.size
        self.opts = opts
        self.rng = rng
        self.lo = grid.bounds[:, 0]
        self.hi = grid.bounds[:, 1]
        self.step = np.full(self.B, opts.step0)
        self.accepted = np.zeros(self.B)
        self.proposed = np.zeros(self.B)
        self.audit_failures = 0
        self.Q = None
        self.I = None

    def init_feasible(self, ground_config=None):
        """Uniform probing for starts with I < E, ground-state fallback."""
        B, N, D = self.B, self.N, self.grid.dimension
        Q = self.lo + (self.hi - self.lo) * self.rng.random((B, N, D))
        I = _interaction_batch(Q, self.pot)
        probes = B
        while np.any(I >= self.E) and probes < self.opts.feasibility_probes:
            bad = I >= self.E
            Q[bad] = self.lo + (self.hi - self.lo) * self.rng.random((int(bad.sum()), N, D))
            I[bad] = _interaction_batch(Q[bad], self.pot)
            probes += int(bad.sum())
        if np.any(I >= self.E):
            if ground_config is None:
                raise InfeasibleEnergyError(
                    f"no configuration with I < {self.E} found after "
                    f"{self.opts.feasibility_probes} uniform probes"
                )
            bad = I >= self.E
            jitter = 1e-3 * (self.hi - self.lo) * self.rng.standard_normal(
                (int(bad.sum()), N, D)
            )
            Q[bad] = np.clip(ground_config[None, :, :] + jitter, self.lo, self.hi)
            I[bad] = _interaction_batch(Q[bad], self.pot)
            if np.any(I >= self.E):
                raise InfeasibleEnergyError(
                    "even the ground-state configuration is infeasible at this energy"
                )
        self.Q, self.I = Q, I

    def sweep(self, adapt: bool):
        B, N = self.B, self.N
        E = self.E
        for i in range(N):
            qi = self.Q[:, i, :]
            qn = qi + self.step[:, None] * self.rng.standard_normal(qi.shape)
            inside = np.all((qn >= self.lo) & (qn <= self.hi), axis=-1)
            old_row = _pair_field(self.Q, qi, i, self.pot)
            new_row = _pair_field(self.Q, qn, i, self.pot)
            I_new = self.I + (new_row - old_row)
            feasible = inside & (I_new < E)
            t_old = 1.0 - self.I / E
            t_new = np.where(feasible, 1.0 - I_new / E, 1.0)
            log_ratio = self.k * (np.log(t_new) - np.log(t_old))
            accept = feasible & (np.log(self.rng.random(B)) < log_ratio)
            self.Q[accept, i, :] = qn[accept]
            self.I[accept] = I_new[accept]
            self.proposed += 1.0
            self.accepted += accept
        if adapt:
            rate = self.accepted / np.maximum(self.proposed, 1.0)
            self.step = np.where(rate < self.opts.accept_low, self.step * 0.8, self.step)
            self.step = np.where(rate > self.opts.accept_high, self.step * 1.25, self.step)
            self.step = np.clip(self.step, 1e-6, float(np.max(self.hi - self.lo)))
            self.accepted[:] = 0.0
            self.proposed[:] = 0.0

    def audit(self):
        exact = _interaction_batch(self.Q, self.pot)
        bad = np.abs(exact - self.I) > 1e-9 * np.maximum(1.0, np.abs(exact))
        self.audit_failures += int(bad.sum())
        self.I = exact

    def acceptance_rate(self):
        return self.accepted / np.maximum(self.proposed, 1.0)


def _exponent(N: int, D: int) -> float:
    return 0.5 * D * N - 1.0


def smallest_feasible_n(
    eps: float,
    pot: PairPotential,
    grid: Grid,
    n_max: int = 64,
    opts: GroundStateOptions | None = None,
) -> int | None:
    """Smallest particle number whose configurational integrand is positive somewhere.

    Diagnostic only: for small N the empirical-measure interaction (diagonal
    included) can exceed the energy cap everywhere in the box, making the
    configurational integral vanish.  Returns the first N <= n_max where a
    feasible configuration exists, or None.
    """
    opts = opts or GroundStateOptions(n_restarts=8)
    for N in range(2, n_max + 1):
        rec = ground_state(N, pot, grid, opts)
        q = rec.configuration
        if empirical_interaction_density(q, pot) < eps:
            return N
    return None


def sample_configurations(
    N: int,
    eps: float,
    pot: PairPotential,
    grid: Grid,
    opts: ChainOptions | None = None,
    ground_config=None,
):
    """Metropolis samples of the fixed-energy configurational measure.

    The target density on box configurations is proportional to
    (1 - I/(eps N^2))_+ to the power DN/2 - 1; particle numbers with
    DN/2 <= 1 are refused because the exponent convention breaks down there.
    Returns (configurations, diagnostics); configurations are thinned
    retained states across all chains, chain-major.
    """
    opts = opts or ChainOptions()
    D = grid.dimension
    kappa = _exponent(N, D)
    if kappa <= 0:
        raise ConfigError(
            f"sampler needs D*N/2 - 1 > 0; got N={N}, D={D} (exponent {kappa})"
        )
    E = eps * N * N
    rng = np.random.default_rng(np.random.SeedSequence(opts.seed))
    chains = _BatchChains(pot, grid, N, E, np.full(opts.n_chains, kappa), opts, rng)
    chains.init_feasible(ground_config)

    kept = []
    I_series = np.empty((opts.sweeps, opts.n_chains))
    for sweep in range(opts.burn_in):
        chains.sweep(adapt=(sweep % opts.adapt_every == opts.adapt_every - 1))
    chains.accepted[:] = 0.0
    chains.proposed[:] = 0.0
    for sweep in range(opts.sweeps):
        chains.sweep(adapt=False)
        if sweep % opts.audit_every == opts.audit_every - 1:
            chains.audit()
        I_series[sweep] = chains.I
        if sweep % opts.thin == opts.thin - 1:
            for b in range(opts.n_chains):
                kept.append(ParticleConfiguration(chains.Q[b].copy()))
    rates = chains.acceptance_rate()
    diagnostics = {
        "acceptance_rate": rates.tolist(),
        "step_scale": chains.step.tolist(),
        "audit_failures": chains.audit_failures,
        "autocorrelation_time": [
            _autocorr_time(I_series[:, b]) for b in range(opts.n_chains)
        ],
        "n_retained": len(kept),
        "exponent": kappa,
    }
    # reorder chain-major for deterministic downstream streaming
    kept = [
        kept[s * opts.n_chains + b]
        for b in range(opts.n_chains)
        for s in range(len(kept) // opts.n_chains)
    ]
    return kept, diagnostics


def _autocorr_time(series: np.ndarray) -> float:
    x = series - series.mean()
    var = float(np.dot(x, x) / x.size)
    if var <= 0:
        return 1.0
    tau = 1.0
    for lag in range(1, min(x.size // 2, 500)):
        c = float(np.dot(x[:-lag], x[lag:]) / (x.size - lag)) / var
        if c <= 0:
            break
        tau += 2.0 * c
    return tau


def resample_momenta(
    config: ParticleConfiguration, eps: float, pot: PairPotential, rng
) -> np.ndarray:
    """Draw momenta uniformly on the kinetic sphere fixed by the positions.

    The radius is sqrt(2 (eps N^2 - I) / N), so the total rescaled energy
    lands on eps N^2 exactly.
    """
    N, D = config.n_particles, config.dimension
    I = interaction_hamiltonian(config, pot)
    E = eps * N * N
    if not I < E:
        raise InfeasibleEnergyError(f"configuration has I={I} >= E={E}")
    u = rng.standard_normal(N * D)
    u /= np.linalg.norm(u)
    radius = np.sqrt(2.0 * (E - I) / N)
    return (radius * u).reshape(N, D)


def position_histogram(configs, grid: Grid) -> DensityField:
    """Pooled bin-exact histogram of particle positions as a grid density."""
    counts = np.zeros(grid.n_nodes)
    total = 0
    for c in configs:
        q = c.positions if isinstance(c, ParticleConfiguration) else np.atleast_2d(c)
        idx = grid.cell_index(q)
        np.add.at(counts, idx, 1.0)
        total += q.shape[0]
    values = counts / (total * grid.weights)
    return DensityField(grid, values)


# -- law-of-large-numbers check -------------------------------------------------

def default_test_functions(grid: Grid):
    """Observables with closed-form predictions under a mean-field solution."""
    D = grid.dimension
    mid = 0.5 * (grid.bounds[:, 0] + grid.bounds[:, 1])

    def q_moment(axis, power):
        def fn(p, q):
            return q[:, axis] ** power

        def predict(sol):
            return float(
                np.sum(sol.rho.masses * sol.rho.grid.nodes[:, axis] ** power)
            )

        return fn, predict

    fns = [("one", lambda p, q: np.ones(q.shape[0]), lambda sol: 1.0)]
    for a in range(D):
        f, pr = q_moment(a, 1)
        fns.append((f"q{a}", f, pr))
        f2, pr2 = q_moment(a, 2)
        fns.append((f"q{a}^2", f2, pr2))
    fns.append(
        (
            "kinetic",
            lambda p, q: 0.5 * np.sum(p * p, axis=-1),
            lambda sol: 0.5 * D * sol.theta,
        )
    )

    def box_fn(p, q):
        return (q[:, 0] <= mid[0]).astype(float)

    def box_pr(sol):
        g = sol.rho.grid
        return float(np.sum(sol.rho.masses[g.nodes[:, 0] <= mid[0]]))

    fns.append(("lower_box", box_fn, box_pr))
    return fns


def lln_test(samples, solution, test_functions=None) -> dict:
    """Per-sample single-system averages of observables versus mean-field values.

    For each observable: the per-sample average over particles is computed,
    and the report carries the across-sample mean, spread, and prediction.
    The spread is the concentration band that must shrink with N.
    """
    fns = test_functions or default_test_functions(solution.rho.grid)
    rows = {}
    for name, fn, predict in fns:
        per_sample = []
        for c in samples:
            if c.momenta is None:
                raise ConfigError("lln_test needs samples with momenta")
            per_sample.append(float(np.mean(fn(c.momenta, c.positions))))
        arr = np.asarray(per_sample)
        rows[name] = {
            "mean": float(arr.mean()),
            "spread": float(arr.std(ddof=1)) if arr.size > 1 else 0.0,
            "prediction": float(predict(solution)),
            "n_samples": int(arr.size),
        }
        rows[name]["deviation"] = abs(rows[name]["mean"] - rows[name]["prediction"])
    return rows


# -- interaction entropy by thermodynamic integration ---------------------------

@dataclass(frozen=True)
class TiOptions:
    n_ladder: int = 32
    sweeps: int = 1200
    burn_in: int = 400
    n_replicates: int = 4
    n_splitting: int = 4096
    splitting_quantile: float = 0.10
    splitting_decor_sweeps: int = 6
    seed: int = 0
    chain: ChainOptions = field(default_factory=ChainOptions)


def _ladder(kappa: float, n_points: int) -> np.ndarray:
    """Exponent ladder: 0, a geometric ramp near 0, then linear up to kappa."""
    if kappa <= 0:
        return np.array([0.0])
    n_geo = max(n_points // 3, 4)
    geo = kappa * 0.1 * np.geomspace(1e-2, 1.0, n_geo)
    lin = np.linspace(kappa * 0.1, kappa, n_points - n_geo + 1)[1:]
    return np.concatenate([[0.0], geo, lin])


def _splitting_log_prob(N, E, pot, grid, n_samples, quantile, decor_sweeps, rng):
    """Multilevel-splitting estimate of ln P(I < E) under the flat product measure.

    Levels are set at the running quantile of the interaction energy; survivors
    are replicated and decorrelated by a Metropolis walk confined below the
    current level.  Collapses to the direct estimator when the event is not rare.
    """
    D = grid.dimension
    lo, hi = grid.bounds[:, 0], grid.bounds[:, 1]
    Q = lo + (hi - lo) * rng.random((n_samples, N, D))
    I = _interaction_batch(Q, pot)
    log_p = 0.0
    for _ in range(400):
        frac_ok = float(np.mean(I < E))
        if frac_ok >= quantile:
            if frac_ok == 0.0:
                raise ConvergenceError("splitting stalled: no mass below the target level")
            return log_p + np.log(frac_ok)
        L = float(np.quantile(I, quantile))
        if not np.isfinite(L):
            raise ConvergenceError("splitting stalled: non-finite level")
        L = max(L, E)  # never descend below the target
        keep = I <= L
        n_keep = int(keep.sum())
        if n_keep == 0:
            raise ConvergenceError("splitting stalled: empty level")
        log_p += np.log(float(np.mean(keep)))
        seeds_idx = rng.integers(0, n_keep, size=n_samples)
        Q = Q[keep][seeds_idx].copy()
        I = I[keep][seeds_idx].copy()
        # decorrelate under the hard cap I < L
        step = np.full(n_samples, 0.25 * float(np.max(hi - lo)))
        for _ in range(decor_sweeps):
            for i in range(N):
                qi = Q[:, i, :]
                qn = qi + step[:, None] * rng.standard_normal(qi.shape)
                inside = np.all((qn >= lo) & (qn <= hi), axis=-1)
                old_row = _pair_field(Q, qi, i, pot)
                new_row = _pair_field(Q, qn, i, pot)
                I_new = I + (new_row - old_row)
                accept = inside & (I_new < L)
                Q[accept, i, :] = qn[accept]
                I[accept] = I_new[accept]
        if np.all(I >= E) and L <= E:
            raise ConvergenceError("splitting stalled at the target level")
    raise ConvergenceError("splitting exceeded its level budget")


def estimate_interaction_entropy(
    N: int, eps: float, pot: PairPotential, grid: Grid, opts: TiOptions | None = None
):
    """Monte Carlo estimate of the interaction entropy per particle at energy eps.

    The entropy integral is split into a rare-event base term (the log
    probability that the flat measure puts interaction below the energy cap,
    estimated by multilevel splitting) plus a thermodynamic integration over
    the power of the integrand: the derivative of the log integral with
    respect to the exponent k is the mean of ln(1 - I/E) under the k-tilted
    measure, sampled by Metropolis chains on a ladder of exponents and
    integrated by Simpson's rule.  Independent replicates give the error bar.

    Returns (estimate, error_bar) for (1/N) of the log configurational integral.
    """
    opts = opts or TiOptions()
    D = grid.dimension
    kappa = _exponent(N, D)
    E = eps * N * N
    ks = _ladder(kappa, opts.n_ladder)
    n_k = ks.size
    seeds = np.random.SeedSequence(opts.seed).spawn(opts.n_replicates + 1)

    estimates = []
    for rep in range(opts.n_replicates):
        rng = np.random.default_rng(seeds[rep])
        base = _splitting_log_prob(
            N,
            E,
            pot,
            grid,
            opts.n_splitting,
            opts.splitting_quantile,
            opts.splitting_decor_sweeps,
            rng,
        )
        if kappa <= 0 or n_k < 2:
            estimates.append(base / N)
            continue
        chain_opts = replace(opts.chain, n_chains=n_k)
        chains = _BatchChains(pot, grid, N, E, ks, chain_opts, rng)
        chains.init_feasible()
        for sweep in range(opts.burn_in):
            chains.sweep(adapt=(sweep % chain_opts.adapt_every == chain_opts.adapt_every - 1))
        sums = np.zeros(n_k)
        for sweep in range(opts.sweeps):
            chains.sweep(adapt=False)
            if sweep % chain_opts.audit_every == chain_opts.audit_every - 1:
                chains.audit()
            sums += np.log(1.0 - chains.I / E)
        means = sums / opts.sweeps
        ladder_integral = float(simpson(means, x=ks))
        estimates.append((base + ladder_integral) / N)

    arr = np.asarray(estimates)
    err = float(arr.std(ddof=1) / np.sqrt(arr.size)) if arr.size > 1 else 0.0
    return float(arr.mean()), err


def kinetic_prefactor_per_particle(N: int, eps: float, grid: Grid) -> float:
    """(1/N) (ln of the momentum-integrated phase-space prefactor + N ln N).

    Exact at every N; as N grows it approaches the ideal-gas entropy per
    particle, and adding the interaction estimate gives a quantity
    comparable to the continuum total entropy.
    """
    D = grid.dimension
    vol = grid.total_volume
    DN = D * N
    log_sphere = np.log(2.0) + 0.5 * DN * np.log(np.pi) - gammaln(0.5 * DN)
    A = (
        -gammaln(N + 1.0)
        + log_sphere
        - np.log(2.0)
        + 0.5 * DN * np.log(2.0 / N)
        + (0.5 * DN - 1.0) * np.log(eps * N * N)
        + N * np.log(vol)
    )
    return (A + N * np.log(N)) / N


def finite_n_entropy(
    N: int, eps: float, pot: PairPotential, grid: Grid, opts: TiOptions | None = None
):
    """Estimate of the total entropy per particle (combinatorial term removed).

    Combines the exact momentum/Stirling prefactor with the Monte Carlo
    interaction entropy; comparable to the continuum entropy s(eps).
    Returns (estimate, error_bar).
    """
    est, err = estimate_interaction_entropy(N, eps, pot, grid, opts)
    return kinetic_prefactor_per_particle(N, eps, grid) + est, err


# -- inequality property suite ---------------------------------------------------

def jensen_superadditivity_check(
    N: int,
    n: int,
    eps: float,
    pot: PairPotential,
    grid: Grid,
    trials: int = 1000,
    seed: int = 0,
    rtol: float = 1e-12,
) -> dict:
    """Pointwise convexity inequalities on random split configurations.

    Verifies, per random configuration: the convex split of the empirical
    measure (as bin-exact histograms); the quadratic-form split bound, which
    needs a positive-semidefinite kernel and is skipped otherwise; and the
    positive-part product bound that combines the split with the
    arithmetic-geometric mean inequality.  Violations are counted; a sound
    implementation reports zero.
    """
    if not (1 <= n < N):
        raise ConfigError("need 1 <= n < N")
    if not pot.psd:
        return {"applicable": False, "reason": "kernel not flagged positive semidefinite"}
    rng = np.random.default_rng(seed)
    lo, hi = grid.bounds[:, 0], grid.bounds[:, 1]
    alpha = n / N
    viol_convex = viol_jensen = viol_amgm = 0
    for _ in range(trials):
        X = lo + (hi - lo) * rng.random((N, grid.dimension))
        Xa, Xb = X[:n], X[n:]
        ha = position_histogram([ParticleConfiguration(Xa)], grid).masses
        hb = position_histogram([ParticleConfiguration(Xb)], grid).masses
        hN = position_histogram([ParticleConfiguration(X)], grid).masses
        if np.max(np.abs(hN - (alpha * ha + (1 - alpha) * hb))) > rtol:
            viol_convex += 1
        bN = empirical_interaction_density(X, pot)
        ba = empirical_interaction_density(Xa, pot)
        bb = empirical_interaction_density(Xb, pot)
        scale = max(1.0, abs(bN), abs(ba), abs(bb))
        if bN > alpha * ba + (1 - alpha) * bb + rtol * scale:
            viol_jensen += 1
        lhs = max(1.0 - bN / eps, 0.0)
        rhs = max(1.0 - ba / eps, 0.0) ** alpha * max(1.0 - bb / eps, 0.0) ** (1 - alpha)
        if lhs < rhs - rtol * max(1.0, rhs):
            viol_amgm += 1
    return {
        "applicable": True,
        "trials": trials,
        "convex_split_violations": viol_convex,
        "jensen_violations": viol_jensen,
        "amgm_violations": viol_amgm,
        "all_pass": viol_convex == viol_jensen == viol_amgm == 0,
    }
