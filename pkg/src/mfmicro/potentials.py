"""Symmetric pair kernels, their dense grid matrices, and hypothesis checks.

Built-in kinds
--------------
zero                 U = 0
constant             U = c
bounded-smooth       Gaussian bump  amp * exp(-|q-q'|^2 / (2 length^2))
softened-coulomb     1 / (|q-q'| + delta), the 1D-safe repulsive default
amended-coulomb      1 / |q-q'| off-diagonal, a finite chosen value at q = q'
mollified-newton     attractive Newton kernel mollified by two normalized
                     ball indicators of radius r (closed form in D=3,
                     tabulated numerical convolution in D=2; not locally
                     integrable in D=1 and therefore rejected there)
custom               tabulated values on grid node pairs (CSV loadable)

All kernels can carry an additive nonnegativity shift, recorded in
``nonneg_shift`` so downstream energies can be reported both shifted and
unshifted.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import ellipe, ellipk

from .domain import Grid
from .errors import ConfigError, PotentialDomainError

__all__ = [
    "PairPotential",
    "KernelMatrix",
    "zero_potential",
    "constant_potential",
    "bounded_smooth_potential",
    "softened_coulomb",
    "amended_coulomb",
    "mollified_newton",
    "tabulated_potential",
    "tabulated_from_csv",
    "assemble_kernel",
    "check_hypotheses",
    "shift_nonnegative",
    "HypothesisReport",
]

_KINDS = (
    "zero",
    "constant",
    "bounded-smooth",
    "softened-coulomb",
    "amended-coulomb",
    "mollified-newton",
    "custom",
)


@dataclass(frozen=True)
class PairPotential:
    """A symmetric pair kernel U(q, q') plus metadata.

    ``nonneg_shift`` is the constant already added to the raw kernel;
    ``diagonal_convention`` is the finite value used at exact coincidence
    for kinds that are singular there.
    """

    kind: str
    params: dict = field(default_factory=dict)
    nonneg_shift: float = 0.0
    diagonal_convention: float | None = None
    # filled for kind == "custom"
    table: np.ndarray | None = None
    table_grid: Grid | None = None
    psd: bool = False

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigError(f"unknown potential kind {self.kind!r}")
        if self.kind == "custom":
            if self.table is None or self.table_grid is None:
                raise ConfigError("custom potential needs a table and its grid")
            t = np.asarray(self.table, dtype=float)
            object.__setattr__(self, "table", t)
            t.setflags(write=False)

    # -- metadata -----------------------------------------------------------

    @property
    def is_radial(self) -> bool:
        return self.kind != "custom"

    @property
    def singular_at_coincidence(self) -> bool:
        return self.kind == "amended-coulomb"

    @property
    def bounded(self) -> bool:
        return self.kind in (
            "zero",
            "constant",
            "bounded-smooth",
            "softened-coulomb",
            "mollified-newton",
            "custom",
        )

    @property
    def differentiable(self) -> bool:
        # differentiable off coincidence, good enough for descent directions
        return self.kind != "custom"

    # -- evaluation ---------------------------------------------------------

    def radial(self, r):
        """Kernel value as a function of pair distance (radial kinds only)."""
        r = np.asarray(r, dtype=float)
        s = self.nonneg_shift
        k = self.kind
        if k == "zero":
            return np.zeros_like(r) + s
        if k == "constant":
            return np.full_like(r, self.params["c"] + s)
        if k == "bounded-smooth":
            amp = self.params.get("amp", 1.0)
            ell = self.params.get("length", 0.25)
            return amp * np.exp(-(r * r) / (2.0 * ell * ell)) + s
        if k == "softened-coulomb":
            return 1.0 / (r + self.params["delta"]) + s
        if k == "amended-coulomb":
            u = self.params.get("u", 0.0)
            with np.errstate(divide="ignore"):
                out = np.where(r > 0, 1.0 / np.where(r > 0, r, 1.0), u + 0.0)
            return out + s
        if k == "mollified-newton":
            return -_ball_coulomb_ball(r, self.params["r"], self.params["dimension"]) + s
        raise PotentialDomainError("custom potentials are not radial")

    def radial_slope(self, r):
        """dU/dr for descent directions (radial kinds, r > 0)."""
        r = np.asarray(r, dtype=float)
        k = self.kind
        if k in ("zero", "constant"):
            return np.zeros_like(r)
        if k == "bounded-smooth":
            amp = self.params.get("amp", 1.0)
            ell = self.params.get("length", 0.25)
            return -amp * r / (ell * ell) * np.exp(-(r * r) / (2.0 * ell * ell))
        if k == "softened-coulomb":
            return -1.0 / (r + self.params["delta"]) ** 2
        if k == "amended-coulomb":
            return -1.0 / np.maximum(r, 1e-300) ** 2
        if k == "mollified-newton":
            return -_ball_coulomb_ball_slope(r, self.params["r"], self.params["dimension"])
        raise PotentialDomainError("no slope for custom potentials")

    def pair_values(self, qa: np.ndarray, qb: np.ndarray) -> np.ndarray:
        """U evaluated on broadcast position arrays of shape (..., D)."""
        qa = np.asarray(qa, dtype=float)
        qb = np.asarray(qb, dtype=float)
        if self.kind == "custom":
            D = self.table_grid.dimension
            ia = self.table_grid.cell_index(qa.reshape(-1, D)).reshape(qa.shape[:-1])
            ib = self.table_grid.cell_index(qb.reshape(-1, D)).reshape(qb.shape[:-1])
            ia, ib = np.broadcast_arrays(ia, ib)
            return self.table[ia, ib] + self.nonneg_shift
        r = np.linalg.norm(qa - qb, axis=-1)
        return self.radial(r)

    def diagonal_value(self, q: np.ndarray):
        """U at exact coincidence, honoring the diagonal convention."""
        if self.singular_at_coincidence:
            conv = self.diagonal_convention
            if conv is None:
                conv = self.params.get("u", 0.0)
            return float(conv) + self.nonneg_shift
        if self.kind == "custom":
            i = self.table_grid.cell_index(np.atleast_2d(q))[0]
            return float(self.table[i, i]) + self.nonneg_shift
        return float(self.radial(0.0))


def zero_potential() -> PairPotential:
    return PairPotential("zero", psd=True)


def constant_potential(c: float) -> PairPotential:
    return PairPotential("constant", {"c": float(c)}, psd=True)


def bounded_smooth_potential(amp: float = 1.0, length: float = 0.25) -> PairPotential:
    """Gaussian bump kernel; positive definite for any amp > 0."""
    if length <= 0:
        raise ConfigError("length must be positive")
    return PairPotential("bounded-smooth", {"amp": float(amp), "length": float(length)}, psd=amp > 0)


def softened_coulomb(delta: float = 0.1) -> PairPotential:
    """1/(r + delta); positive definite in every dimension (it is a positive
    mixture of exponential kernels), and 1D-safe unlike the bare Coulomb kernel."""
    if delta <= 0:
        raise ConfigError("delta must be positive")
    return PairPotential("softened-coulomb", {"delta": float(delta)}, psd=True)


def amended_coulomb(u: float = 0.0, dimension: int = 3) -> PairPotential:
    """Bare Coulomb 1/r with the finite value u assigned at coincidence.

    Square-integrability near coincidence holds only in D=3, so the kernel
    is rejected in lower dimensions.
    """
    if dimension != 3:
        raise PotentialDomainError(
            "amended-coulomb is locally square-integrable only in D=3"
        )
    return PairPotential(
        "amended-coulomb", {"u": float(u), "dimension": 3}, diagonal_convention=float(u), psd=True
    )


def mollified_newton(r: float, dimension: int = 3) -> PairPotential:
    """Attractive Newton kernel smeared by two normalized ball indicators."""
    if r <= 0:
        raise ConfigError("mollifier radius must be positive")
    if dimension == 1:
        raise PotentialDomainError(
            "the Newton kernel convolved with 1D ball indicators diverges; "
            "use softened-coulomb in D=1"
        )
    if dimension not in (2, 3):
        raise ConfigError("dimension must be 2 or 3")
    return PairPotential("mollified-newton", {"r": float(r), "dimension": dimension}, psd=False)


def tabulated_potential(grid: Grid, table: np.ndarray, psd: bool = False) -> PairPotential:
    t = np.asarray(table, dtype=float)
    if t.shape != (grid.n_nodes, grid.n_nodes):
        raise ConfigError("table shape must be (n_nodes, n_nodes)")
    if not np.all(np.isfinite(t)):
        raise PotentialDomainError("tabulated kernel has non-finite entries")
    return PairPotential("custom", {}, table=t, table_grid=grid, psd=psd)


def tabulated_from_csv(grid: Grid, path) -> PairPotential:
    """Load a custom kernel from rows of (node index i, node index j, value).

    Missing (i, j) entries default to the transposed value; fully missing
    pairs are an error.
    """
    n = grid.n_nodes
    t = np.full((n, n), np.nan)
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            i, j, v = int(row[0]), int(row[1]), float(row[2])
            t[i, j] = v
    missing = np.isnan(t)
    t[missing] = t.T[missing]
    if np.isnan(t).any():
        raise ConfigError("CSV table leaves node pairs undefined")
    return tabulated_potential(grid, t)


# -- mollified Newton helpers -------------------------------------------------

def _ball_coulomb_ball(s, a, dimension):
    """Coulomb energy of two unit-mass uniform balls of radius a at distance s."""
    s = np.asarray(s, dtype=float)
    if dimension == 3:
        far = s >= 2 * a
        out = np.empty_like(s)
        with np.errstate(divide="ignore"):
            out[far] = 1.0 / s[far]
        ss = s[~far]
        out[~far] = (
            192 * a**5 - 80 * a**3 * ss**2 + 30 * a**2 * ss**3 - ss**5
        ) / (160 * a**6)
        return out
    return _disk_table(a)(np.clip(s, 0.0, None))


def _ball_coulomb_ball_slope(s, a, dimension):
    s = np.asarray(s, dtype=float)
    if dimension == 3:
        far = s >= 2 * a
        out = np.empty_like(s)
        with np.errstate(divide="ignore"):
            out[far] = -1.0 / s[far] ** 2
        ss = s[~far]
        out[~far] = (-160 * a**3 * ss + 90 * a**2 * ss**2 - 5 * ss**4) / (160 * a**6)
        return out
    return _disk_table(a).derivative()(np.clip(s, 0.0, None))


_disk_cache: dict = {}


def _disk_potential(t, a):
    """In-plane potential of a unit-mass uniform disk of radius a (elliptic form)."""
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    inner = t <= a
    ti = t[inner]
    out[inner] = (4.0 / (np.pi * a)) * ellipe((ti / a) ** 2)
    to = t[~inner]
    m = (a / to) ** 2
    out[~inner] = (4.0 * to / (np.pi * a * a)) * (ellipe(m) - (1 - m) * ellipk(m))
    return out


def _disk_table(a):
    """Tabulated (disk * 1/|x| * disk) interaction as a radial interpolant.

    The in-plane disk potential is averaged over a second disk by midpoint
    quadrature in polar coordinates; beyond ten radii the table is spliced
    onto the matched multipole tail (1/s)(1 + C/s^2), C calibrated at the
    splice point (a flat disk keeps a quadrupole correction at all ranges).
    """
    key = round(a, 12)
    if key in _disk_cache:
        return _disk_cache[key]
    n_r, n_phi = 120, 240
    rr = (np.arange(n_r) + 0.5) * (a / n_r)
    ph = (np.arange(n_phi) + 0.5) * (2 * np.pi / n_phi)
    R, PH = np.meshgrid(rr, ph, indexing="ij")
    cell = (a / n_r) * (2 * np.pi / n_phi)
    area_w = (R * cell) / (np.pi * a * a)
    s_max = 10 * a
    s_grid = np.linspace(0.0, s_max, 401)
    vals = np.empty_like(s_grid)
    for i, s in enumerate(s_grid):
        d = np.sqrt(R * R + s * s - 2 * R * s * np.cos(PH))
        vals[i] = np.sum(_disk_potential(d, a) * area_w)
    itp = PchipInterpolator(s_grid, vals)
    tail_c = (vals[-1] * s_max - 1.0) * s_max**2

    def table(s):
        s = np.asarray(s, dtype=float)
        out = np.empty_like(s)
        near = s < s_max
        out[near] = itp(s[near])
        far = ~near
        with np.errstate(divide="ignore"):
            out[far] = (1.0 + tail_c / s[far] ** 2) / s[far]
        return out

    table.derivative = lambda: _DiskSlope(itp, s_max, tail_c)
    _disk_cache[key] = table
    return table


class _DiskSlope:
    def __init__(self, itp, s_max, tail_c):
        self._d = itp.derivative()
        self._s_max = s_max
        self._c = tail_c

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        out = np.empty_like(s)
        near = s < self._s_max
        out[near] = self._d(s[near])
        far = ~near
        out[far] = -1.0 / s[far] ** 2 - 3.0 * self._c / s[far] ** 4
        return out


# -- kernel matrices ----------------------------------------------------------

@dataclass(frozen=True)
class KernelMatrix:
    """Dense symmetric matrix of kernel values on grid node pairs."""

    grid: Grid
    potential: PairPotential
    entries: np.ndarray

    def __post_init__(self):
        self.entries.setflags(write=False)

    @property
    def n(self) -> int:
        return self.entries.shape[0]


def _subcell_offsets(grid: Grid) -> np.ndarray:
    """Four staggered points inside a cell, used to average singular kernels."""
    h = grid.spacing
    if grid.dimension == 1:
        f = np.array([[-0.375], [-0.125], [0.125], [0.375]])
    elif grid.dimension == 2:
        f = np.array([[-0.25, -0.25], [-0.25, 0.25], [0.25, -0.25], [0.25, 0.25]])
    else:
        # tetrahedral selection of octant midpoints
        f = np.array(
            [[0.25, 0.25, 0.25], [0.25, -0.25, -0.25], [-0.25, 0.25, -0.25], [-0.25, -0.25, 0.25]]
        )
    return f * h


def assemble_kernel(pot: PairPotential, grid: Grid) -> KernelMatrix:
    """Evaluate the kernel on all node pairs.

    Off-diagonal entries are midpoint values U(q_i, q_j).  For kernels
    singular at coincidence the diagonal is replaced by a 4-point sub-cell
    average of U over distinct in-cell point pairs, which is finite whenever
    the kernel is locally square integrable.
    """
    if pot.kind == "custom":
        if not _grids_match(pot.table_grid, grid):
            raise ConfigError("custom potential tabulated on a different grid")
        U = pot.table + pot.nonneg_shift
    else:
        q = grid.nodes
        U = pot.pair_values(q[:, None, :], q[None, :, :])
        if pot.singular_at_coincidence:
            offs = _subcell_offsets(grid)
            diag = np.zeros(grid.n_nodes)
            pairs = [(k, l) for k in range(4) for l in range(4) if k != l]
            for k, l in pairs:
                diag += pot.pair_values(q + offs[k], q + offs[l])
            np.fill_diagonal(U, diag / len(pairs))
        else:
            np.fill_diagonal(U, [pot.diagonal_value(qi) for qi in q])
    off = ~np.eye(grid.n_nodes, dtype=bool)
    if not np.all(np.isfinite(U[off])):
        raise PotentialDomainError("kernel matrix has non-finite off-diagonal entries")
    if not np.all(np.isfinite(np.diag(U))):
        raise PotentialDomainError("kernel diagonal is non-finite after sub-cell averaging")
    return KernelMatrix(grid, pot, np.ascontiguousarray(U))


def _grids_match(a: Grid, b: Grid) -> bool:
    return (
        a.dimension == b.dimension
        and a.cells_per_axis == b.cells_per_axis
        and np.array_equal(a.bounds, b.bounds)
    )


def shift_nonnegative(pot: PairPotential, grid: Grid) -> PairPotential:
    """Return the potential shifted so its minimum over grid pairs is zero.

    The shift is recorded in ``nonneg_shift``; an already-nonnegative kernel
    is returned unchanged (shift 0 added).
    """
    K = assemble_kernel(pot, grid)
    m = float(K.entries.min())
    if not np.isfinite(m):
        raise PotentialDomainError("kernel unbounded below on the grid")
    if m >= 0:
        return pot
    return replace(pot, nonneg_shift=pot.nonneg_shift - m)


# -- hypothesis report --------------------------------------------------------

@dataclass
class HypothesisReport:
    """Pass/fail/indeterminate verdicts for the structural kernel hypotheses.

    Verdicts are strings: "pass", "fail", or "indeterminate".  Symmetry and
    nonnegativity are decided exactly on the grid; local square
    integrability is probed by sub-cell quadrature at increasing refinement;
    the remaining items come from analytic knowledge of the kind.
    """

    symmetry: str
    nonnegative: str
    lower_semicontinuous: str
    sublevel_regular: str
    locally_square_integrable: str
    confinement: str
    continuous: str
    details: dict = field(default_factory=dict)

    def all_pass(self) -> bool:
        return all(
            v == "pass"
            for v in (
                self.symmetry,
                self.nonnegative,
                self.lower_semicontinuous,
                self.sublevel_regular,
                self.locally_square_integrable,
                self.confinement,
                self.continuous,
            )
        )


def check_hypotheses(pot: PairPotential, grid: Grid) -> HypothesisReport:
    """Report which structural hypotheses the kernel satisfies on this grid."""
    K = assemble_kernel(pot, grid).entries
    asym = float(np.max(np.abs(K - K.T)))
    sym = "pass" if asym == 0.0 else "fail"
    nonneg = "pass" if float(K.min()) >= 0.0 else "fail"

    kind = pot.kind
    analytic_continuous = kind in (
        "zero",
        "constant",
        "bounded-smooth",
        "softened-coulomb",
        "mollified-newton",
    )
    if analytic_continuous:
        lsc = "pass"
        cont = "pass"
        sublevel = "pass"
    elif kind == "amended-coulomb":
        lsc = "pass"  # +inf limit at coincidence dominates any finite diagonal value
        cont = "fail"
        sublevel = "pass"
    else:
        lsc = "indeterminate"
        cont = "indeterminate"
        sublevel = "indeterminate"  # not decidable from a finite table

    sq = _square_integrability_probe(pot, grid)
    conf = "pass"  # enforced by construction: samplers reject moves leaving the box

    return HypothesisReport(
        symmetry=sym,
        nonnegative=nonneg,
        lower_semicontinuous=lsc,
        sublevel_regular=sublevel,
        locally_square_integrable=sq["verdict"],
        confinement=conf,
        continuous=cont,
        details={"max_asymmetry": asym, "min_entry": float(K.min()), **sq},
    )


def _square_integrability_probe(pot: PairPotential, grid: Grid) -> dict:
    """Quadrature of U^2 over shrinking-cell balls, flagging a divergent trend."""
    if pot.kind == "custom":
        return {"verdict": "pass", "probe": "finite table"}
    if not pot.bounded and pot.kind == "amended-coulomb":
        # analytic: 1/r^2 integrable in 3D only; still run the probe for the record
        pass
    h = float(np.max(grid.spacing))
    q0 = grid.nodes[grid.n_nodes // 2]
    vals = []
    for n_sub in (8, 16, 32, 64):
        # midpoint quadrature of U(q0, .)^2 over the axis-aligned cube of side h
        axes = [
            q0[a] - h / 2 + (np.arange(n_sub) + 0.5) * h / n_sub
            for a in range(grid.dimension)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=-1)
        w = (h / n_sub) ** grid.dimension
        u = pot.pair_values(np.broadcast_to(q0, pts.shape), pts)
        vals.append(float(np.sum(u * u) * w))
    ratios = [vals[i + 1] / max(vals[i], 1e-300) for i in range(len(vals) - 1)]
    diverging = len(vals) >= 2 and vals[-1] > 10 * vals[0] and ratios[-1] > 1.5
    return {
        "verdict": "fail" if diverging else "pass",
        "probe": "sub-cell quadrature of U^2",
        "integral_sequence": vals,
    }
