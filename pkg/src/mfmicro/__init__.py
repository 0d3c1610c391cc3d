"""Mean-field thermodynamics of fixed-energy particle ensembles on bounded domains.

The library solves the self-consistent one-body density problem of the
pair-interaction gas in the scaling regime where the energy grows with the
square of the particle number, and validates the continuum answers against
brute-force finite-N computations: ground-state chains, Metropolis sampling
of the fixed-energy configurational measure, and Monte Carlo entropy
estimates.
"""

__version__ = "0.1.0"

from .domain import (
    DensityField,
    Grid,
    build_grid,
    density_from_values,
    uniform_density,
    w1_distance,
)
from .errors import (
    ConfigError,
    ConvergenceError,
    GridMismatchError,
    InfeasibleEnergyError,
    MfmicroError,
    PotentialDomainError,
)
from .finite_n import (
    ChainOptions,
    GroundStateOptions,
    GroundStateRecord,
    ParticleConfiguration,
    TiOptions,
    estimate_interaction_entropy,
    finite_n_entropy,
    ground_state,
    interaction_hamiltonian,
    jensen_superadditivity_check,
    lln_test,
    monotonicity_report,
    position_histogram,
    resample_momenta,
    sample_configurations,
    smallest_feasible_n,
)
from .functionals import (
    MINUS_INF,
    EnergyBudget,
    PhaseDensity,
    bilinear_form,
    continuum_ground_energy,
    energy_of_f,
    h_function,
    interaction_entropy_density,
    is_minus_inf,
    maxwellian_value,
    perfect_gas_entropy,
    perfect_gas_t_potential,
    quasi_interaction_energy,
    relative_entropy,
    theta_of_rho,
)
from .meanfield import (
    MeanFieldSolution,
    ScanResult,
    SolverOptions,
    auxiliary_interaction_entropy,
    entropy_hfunction_identity,
    entropy_scan,
    legendre_check,
    maximize_interaction_entropy,
    solve_canonical,
    solve_microcanonical,
    verify_entropy_decompositions,
)
from .potentials import (
    HypothesisReport,
    KernelMatrix,
    PairPotential,
    amended_coulomb,
    assemble_kernel,
    bounded_smooth_potential,
    check_hypotheses,
    constant_potential,
    mollified_newton,
    shift_nonnegative,
    softened_coulomb,
    tabulated_from_csv,
    tabulated_potential,
    zero_potential,
)
