"""Batch front-end: parse a config file, dispatch one job, write result files.

Config files are flat-section key-value text (TOML syntax), diff-able and
hashable.  Every output JSON carries the config hash, the effective seed and
the package version; CSV bodies are deterministic given (config, seed) and
never contain timestamps, so re-runs are byte-identical.

Exit codes: 0 success, 1 malformed config, 2 infeasible input,
3 non-convergence.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import __version__
from .domain import Grid, build_grid, w1_distance
from .errors import (
    ConfigError,
    ConvergenceError,
    InfeasibleEnergyError,
    MfmicroError,
    PotentialDomainError,
)
from .finite_n import (
    ChainOptions,
    GroundStateOptions,
    TiOptions,
    estimate_interaction_entropy,
    finite_n_entropy,
    ground_state,
    jensen_superadditivity_check,
    lln_test,
    monotonicity_report,
    position_histogram,
    resample_momenta,
    sample_configurations,
)
from .functionals import continuum_ground_energy
from .meanfield import (
    SolverOptions,
    entropy_hfunction_identity,
    entropy_scan,
    legendre_check,
    solve_canonical,
    solve_microcanonical,
    verify_entropy_decompositions,
)
from .potentials import (
    assemble_kernel,
    bounded_smooth_potential,
    amended_coulomb,
    check_hypotheses,
    constant_potential,
    mollified_newton,
    shift_nonnegative,
    softened_coulomb,
    tabulated_from_csv,
    zero_potential,
)

__all__ = ["JobConfig", "load_config", "run", "verify", "main"]

_MODES = (
    "solve-mc",
    "solve-can",
    "scan",
    "legendre",
    "ground-state",
    "sample",
    "entropy-n",
    "verify",
)


@dataclass
class JobConfig:
    """One batch job: domain + potential + mode + options."""

    grid: Grid
    potential: object
    mode: str
    params: dict
    seed: int
    solver: dict = field(default_factory=dict)
    mc: dict = field(default_factory=dict)
    config_hash: str = ""
    raw: dict = field(default_factory=dict)


def _fmt(x) -> str:
    """Floats rendered with 17 significant digits so they round-trip exactly."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _build_potential(section: dict, grid: Grid):
    kind = section.get("kind")
    if kind is None:
        raise ConfigError("potential section needs a 'kind'")
    if kind == "zero":
        pot = zero_potential()
    elif kind == "constant":
        pot = constant_potential(section["c"])
    elif kind == "bounded-smooth":
        pot = bounded_smooth_potential(section.get("amp", 1.0), section.get("length", 0.25))
    elif kind == "softened-coulomb":
        pot = softened_coulomb(section.get("delta", 0.1))
    elif kind == "amended-coulomb":
        pot = amended_coulomb(section.get("u", 0.0), grid.dimension)
    elif kind == "mollified-newton":
        pot = mollified_newton(section["r"], grid.dimension)
    elif kind == "custom":
        pot = tabulated_from_csv(grid, section["table"])
    else:
        raise ConfigError(f"unknown potential kind {kind!r}")
    if section.get("shift_nonnegative", False):
        pot = shift_nonnegative(pot, grid)
    return pot


def load_config(path) -> JobConfig:
    """Parse and validate a TOML job file; raises ConfigError with context."""
    raw_bytes = Path(path).read_bytes()
    try:
        data = tomllib.loads(raw_bytes.decode("utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    for key in ("domain", "potential", "job"):
        if key not in data:
            raise ConfigError(f"{path}: missing [{key}] section")
    dom = data["domain"]
    try:
        grid = build_grid(
            dom.get("dimension", 3), dom.get("bounds", [0.0, 1.0]), dom.get("cells", 8)
        )
    except ConfigError as exc:
        raise ConfigError(f"{path}: [domain] {exc}") from exc
    try:
        pot = _build_potential(data["potential"], grid)
    except (KeyError, ConfigError, PotentialDomainError) as exc:
        raise ConfigError(f"{path}: [potential] {exc}") from exc

    job = data["job"]
    mode = job.get("mode")
    if mode not in _MODES:
        raise ConfigError(f"{path}: [job] mode must be one of {_MODES}, got {mode!r}")
    params = {k: v for k, v in job.items() if k != "mode"}
    required = {
        "solve-mc": ("epsilon",),
        "solve-can": ("theta",),
        "scan": ("eps_min", "eps_max"),
        "legendre": ("theta", "eps_min", "eps_max"),
        "ground-state": (),
        "sample": ("epsilon", "n_particles"),
        "entropy-n": ("epsilon",),
        "verify": (),
    }[mode]
    missing = [k for k in required if k not in params]
    if missing:
        raise ConfigError(f"{path}: [job] mode {mode!r} needs parameters {missing}")
    seed = int(data.get("seed", 0))
    return JobConfig(
        grid=grid,
        potential=pot,
        mode=mode,
        params=params,
        seed=seed,
        solver=data.get("solver", {}),
        mc=data.get("mc", {}),
        config_hash=hashlib.sha256(raw_bytes).hexdigest(),
        raw=data,
    )


def _solver_options(cfg: JobConfig) -> SolverOptions:
    base = SolverOptions(seed=cfg.seed)
    allowed = {
        "damping",
        "fp_tol",
        "objective_tol",
        "max_iter",
        "n_starts",
        "start_scale",
        "tie_tol",
    }
    fields = {k: v for k, v in cfg.solver.items() if k in allowed}
    return replace(base, **fields)


def _chain_options(cfg: JobConfig) -> ChainOptions:
    base = ChainOptions(seed=cfg.seed)
    allowed = {
        "sweeps",
        "burn_in",
        "thin",
        "n_chains",
        "step0",
        "adapt_every",
        "audit_every",
        "feasibility_probes",
    }
    return replace(base, **{k: v for k, v in cfg.mc.items() if k in allowed})


def _ti_options(cfg: JobConfig) -> TiOptions:
    base = TiOptions(seed=cfg.seed, chain=_chain_options(cfg))
    allowed = {
        "n_ladder",
        "sweeps",
        "burn_in",
        "n_replicates",
        "n_splitting",
        "splitting_quantile",
        "splitting_decor_sweeps",
    }
    return replace(base, **{k: v for k, v in cfg.mc.items() if k in allowed})


def _write_csv(path: Path, header: str, rows, provenance: str = "") -> None:
    lines = [header]
    for row in rows:
        lines.append(",".join(_fmt(x) for x in row))
    if provenance:
        lines.append(f"# {provenance}")
    path.write_text("\n".join(lines) + "\n")


def _density_rows(rho):
    g = rho.grid
    for i in range(g.n_nodes):
        yield (*g.nodes[i], g.weights[i], rho.values[i])


def _solution_dict(sol) -> dict:
    return {
        "mode": sol.mode,
        "theta": sol.theta,
        "eps": sol.eps,
        "s_K": sol.s_K,
        "s_I": sol.s_I,
        "s": sol.s,
        "objective": sol.objective,
        "fixed_point_residual": sol.fixed_point_residual,
        "iterations": sol.iterations,
        "multistart_branch": sol.multistart_branch,
        "diagnostics": {k: _json_safe(v) for k, v in sol.diagnostics.items()},
    }


def _json_safe(v):
    if isinstance(v, (np.bool_, np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, dict):
        return {k: _json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_safe(x) for x in v]
    if isinstance(v, (str, int, float, bool)) or v is None:
        return v
    return str(v)


def run(config_path, out_dir=None, seed=None, threads=1) -> int:
    """Execute the configured job; write results.json and mode-specific CSVs."""
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    if seed is not None:
        cfg.seed = int(seed)
    out = Path(out_dir) if out_dir else Path.cwd()
    out.mkdir(parents=True, exist_ok=True)

    results = {
        "mode": cfg.mode,
        "config_hash": cfg.config_hash,
        "seed": cfg.seed,
        "version": __version__,
        "threads": threads,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    try:
        artifacts = _dispatch(cfg, out, results, threads)
    except InfeasibleEnergyError as exc:
        print(f"infeasible input: {exc}", file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        print(f"non-convergence: {exc}", file=sys.stderr)
        return 3
    except MfmicroError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    results["artifacts"] = artifacts
    (out / "results.json").write_text(json.dumps(results, indent=2, default=_json_safe))
    grid_doc = json.loads(cfg.grid.to_json())
    grid_doc["config_hash"] = cfg.config_hash
    (out / "grid.json").write_text(json.dumps(grid_doc))
    return 0


def _dispatch(cfg: JobConfig, out: Path, results: dict, threads: int):
    grid, pot, mode, p = cfg.grid, cfg.potential, cfg.mode, cfg.params
    K = assemble_kernel(pot, grid)
    sopts = _solver_options(cfg)
    artifacts = []
    provenance = f"config_hash={cfg.config_hash} seed={cfg.seed}"

    if mode == "solve-mc":
        sol = solve_microcanonical(float(p["epsilon"]), K, sopts)
        results["solution"] = _solution_dict(sol)
        results["density"] = sol.rho.values.tolist()
        _write_csv(
            out / "density.csv",
            ",".join([f"q{a}" for a in range(grid.dimension)] + ["weight", "rho"]),
            _density_rows(sol.rho),
            provenance,
        )
        artifacts.append("density.csv")

    elif mode == "solve-can":
        sol = solve_canonical(float(p["theta"]), K, sopts)
        results["solution"] = _solution_dict(sol)
        results["phi"] = sol.objective
        results["density"] = sol.rho.values.tolist()
        _write_csv(
            out / "density.csv",
            ",".join([f"q{a}" for a in range(grid.dimension)] + ["weight", "rho"]),
            _density_rows(sol.rho),
            provenance,
        )
        artifacts.append("density.csv")

    elif mode == "scan":
        scan = entropy_scan(
            float(p["eps_min"]),
            float(p["eps_max"]),
            int(p.get("steps", 16)),
            K,
            sopts,
            threads=threads,
        )
        rows = []
        for e, s in zip(scan.eps_values, scan.solutions):
            if s is None:
                continue
            rows.append(
                (e, s.theta, s.s_K, s.s_I, s.s, s.fixed_point_residual, scan.monotone)
            )
        _write_csv(out / "scan.csv", "epsilon,theta,s_K,s_I,s,residual,monotone_ok", rows, provenance)
        results["scan"] = {
            "monotone": scan.monotone,
            "concave": scan.concave,
            "failures": scan.failures,
            "n_points": int(scan.eps_values.size),
        }
        artifacts.append("scan.csv")

    elif mode == "legendre":
        scan = entropy_scan(
            float(p["eps_min"]),
            float(p["eps_max"]),
            int(p.get("steps", 64)),
            K,
            sopts,
            threads=threads,
        )
        report = legendre_check(float(p["theta"]), K, scan, sopts)
        results["legendre"] = report
        rows = [
            (e, s.theta, s.s_K, s.s_I, s.s, s.fixed_point_residual, scan.monotone)
            for e, s in zip(scan.eps_values, scan.solutions)
            if s is not None
        ]
        _write_csv(
            out / "scan.csv",
            "epsilon,theta,s_K,s_I,s,residual,monotone_ok",
            rows,
            provenance,
        )
        artifacts.append("scan.csv")

    elif mode == "ground-state":
        gopts = GroundStateOptions(
            n_restarts=int(p.get("restarts", 32)), seed=cfg.seed
        )
        records = [
            ground_state(N, pot, grid, gopts)
            for N in range(int(p.get("n_min", 2)), int(p.get("n_max", 6)) + 1)
        ]
        eps_g, _ = continuum_ground_energy(K, seed=cfg.seed)
        report = monotonicity_report(records, eps_g)
        rows = [
            (r.n_particles, r.best_value, r.pair_specific, r.quasi_pair_specific, r.restarts_used)
            for r in records
        ]
        _write_csv(
            out / "ground_state.csv",
            "N,interaction_min,pair_specific,quasi_pair_specific,restarts",
            rows,
            provenance,
        )
        results["ground_state"] = {
            "eps_g_continuum": eps_g,
            "monotonicity": {k: _json_safe(v) for k, v in report.items()},
        }
        artifacts.append("ground_state.csv")

    elif mode == "sample":
        copts = _chain_options(cfg)
        eps = float(p["epsilon"])
        N = int(p["n_particles"])
        sol = solve_microcanonical(eps, K, sopts)
        samples, diag = sample_configurations(N, eps, pot, grid, copts)
        rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 1)))
        for c in samples:
            c.momenta = resample_momenta(c, eps, pot, rng)
        hist = position_histogram(samples, grid)
        results["sample"] = {
            "diagnostics": _json_safe(diag),
            "w1_to_meanfield": w1_distance(hist, sol.rho),
            "lln": lln_test(samples, sol),
        }
        rows = []
        for s_idx, c in enumerate(samples):
            for i in range(c.n_particles):
                rows.append((s_idx, i, *c.positions[i], *c.momenta[i]))
        _write_csv(
            out / "samples.csv",
            ",".join(
                ["sample", "particle"]
                + [f"q{a}" for a in range(grid.dimension)]
                + [f"p{a}" for a in range(grid.dimension)]
            ),
            rows,
            provenance,
        )
        artifacts.append("samples.csv")

    elif mode == "entropy-n":
        topts = _ti_options(cfg)
        eps = float(p["epsilon"])
        rows = []
        for N in p.get("n_particles_list", [int(p.get("n_particles", 8))]):
            est, err = estimate_interaction_entropy(int(N), eps, pot, grid, topts)
            tot, terr = finite_n_entropy(int(N), eps, pot, grid, topts)
            rows.append((int(N), est, err, tot, terr))
        _write_csv(
            out / "entropy_n.csv",
            "N,s_I_estimate,s_I_error,s_total_estimate,s_total_error",
            rows,
            provenance,
        )
        results["entropy_n"] = [
            {"N": r[0], "s_I": r[1], "err": r[2], "s_total": r[3], "total_err": r[4]}
            for r in rows
        ]
        artifacts.append("entropy_n.csv")

    elif mode == "verify":
        results["verify"] = _verify_payload(cfg, K, sopts, p)
        (Path(out) / "verify.json").write_text(
            json.dumps(results["verify"], indent=2, default=_json_safe)
        )
        artifacts.append("verify.json")

    return artifacts


def _verify_payload(cfg: JobConfig, K, sopts, p) -> dict:
    """Aggregate the thermodynamic cross-checks into one pass/fail report."""
    grid, pot = cfg.grid, cfg.potential
    eps = float(p.get("epsilon", 2.0))
    theta = float(p.get("theta", 1.0))
    tol_closed = float(p.get("tol_closed_form", 1e-8))
    tol_numeric = float(p.get("tol_numeric", 1e-4))
    checks = {}

    sol = solve_microcanonical(eps, K, sopts)
    ident = entropy_hfunction_identity(sol)
    checks["entropy_hfunction_identity"] = {
        "gap": ident["gap"],
        "pass": ident["gap"] <= max(tol_numeric, 1e-6),
    }

    vp = verify_entropy_decompositions(eps, K, sopts)
    checks["entropy_decompositions"] = {
        "gap_total": vp["gap_total"],
        "gap_interaction": vp["gap_interaction"],
        "pass": max(vp["gap_total"], vp["gap_interaction"]) <= tol_numeric,
    }

    eps_g = vp["eps_g"]
    scan = entropy_scan(
        max(eps_g * 1.02 + 1e-6, eps_g + 0.05 * (eps - eps_g)),
        max(2.5 * theta + eps_g + 1.0, eps),
        int(p.get("steps", 48)),
        K,
        sopts,
    )
    leg = legendre_check(theta, K, scan, sopts)
    checks["legendre"] = {
        "gap": leg["gap"],
        "eps_star": leg["eps_star"],
        "widen_scan": leg["widen_scan"],
        "pass": leg["gap"] <= tol_numeric and not leg["widen_scan"],
    }

    gopts = GroundStateOptions(n_restarts=int(p.get("restarts", 16)), seed=cfg.seed)
    records = [ground_state(N, pot, grid, gopts) for N in (2, 3, 4, 5)]
    mono = monotonicity_report(records, eps_g)
    checks["ground_state_monotonicity"] = {
        "pass": mono["all_pass"],
        "rows": mono["rows"],
    }

    jens = jensen_superadditivity_check(
        8, 3, eps, pot, grid, trials=int(p.get("trials", 200)), seed=cfg.seed
    )
    checks["jensen_amgm"] = {
        "pass": (not jens.get("applicable", False)) or jens["all_pass"],
        "detail": jens,
    }

    hyp = check_hypotheses(pot, grid)
    checks["hypotheses"] = {
        "pass": hyp.symmetry == "pass" and hyp.nonnegative == "pass",
        "report": {
            "symmetry": hyp.symmetry,
            "nonnegative": hyp.nonnegative,
            "lower_semicontinuous": hyp.lower_semicontinuous,
            "sublevel_regular": hyp.sublevel_regular,
            "locally_square_integrable": hyp.locally_square_integrable,
            "confinement": hyp.confinement,
            "continuous": hyp.continuous,
        },
    }

    checks["all_pass"] = all(
        c["pass"] for c in checks.values() if isinstance(c, dict) and "pass" in c
    )
    return checks


def verify(config_path, out_dir=None, seed=None) -> int:
    """Run the cross-check aggregation for the configured system."""
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    if seed is not None:
        cfg.seed = int(seed)
    cfg.mode = "verify"
    out = Path(out_dir) if out_dir else Path.cwd()
    out.mkdir(parents=True, exist_ok=True)
    results = {
        "mode": "verify",
        "config_hash": cfg.config_hash,
        "seed": cfg.seed,
        "version": __version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    try:
        K = assemble_kernel(cfg.potential, cfg.grid)
        payload = _verify_payload(cfg, K, _solver_options(cfg), cfg.params)
    except InfeasibleEnergyError as exc:
        print(f"infeasible input: {exc}", file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        print(f"non-convergence: {exc}", file=sys.stderr)
        return 3
    results["verify"] = payload
    (out / "verify.json").write_text(json.dumps(payload, indent=2, default=_json_safe))
    (out / "results.json").write_text(json.dumps(results, indent=2, default=_json_safe))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mfmicro",
        description="Batch solver for mean-field fixed-energy thermodynamics",
    )
    parser.add_argument("--config", required=True, help="job file (TOML)")
    parser.add_argument("--seed", type=int, default=None, help="override config seed")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument(
        "--verify", action="store_true", help="run the cross-check suite instead of the job"
    )
    args = parser.parse_args(argv)
    if args.verify:
        return verify(args.config, args.out, args.seed)
    return run(args.config, args.out, args.seed, args.threads)


if __name__ == "__main__":
    sys.exit(main())
