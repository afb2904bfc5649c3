"""Batch experiment drivers: the refinement/efficiency study and the
greedy + online-enrichment study.  Both write CSV tables plus a manifest
carrying every resolved default and the config digest.
"""

import time
from pathlib import Path

import numpy as np

from . import problems
from .data import as_parameter
from .enrich import MarkingStrategy, enrich_online, greedy_offline
from .model import DetailedModel
from .reduction import reconstruct, save_bases, load_bases, assemble_reduced
from .swipdg import default_sigma

__all__ = ["build_problem", "ladder_models", "run_convergence_study", "run_enrichment_study", "run_greedy"]


def build_problem(cfg, base_dir="."):
    if cfg.problem_type == "academic":
        return problems.academic()
    if cfg.problem_type == "channel":
        return problems.channel(cfg.contrast)
    if cfg.problem_type == "permeability_file":
        domain = cfg.domain if cfg.domain is not None else (0.0, 0.0, 5.0, 1.0)
        return problems.from_permeability_file(
            Path(base_dir) / cfg.permeability_file, cfg.permeability_layout, domain)
    raise ValueError(f"unknown problem type {cfg.problem_type!r}")


def _model(cfg, problem, coarse, fine):
    return DetailedModel(problem, coarse, fine, k=cfg.k, sigma=cfg.sigma,
                         theta_sym=cfg.theta_sym, mu_bar=cfg.mu_bar, mu_hat=cfg.mu_hat)


def ladder_models(cfg, problem):
    """Models along the refinement ladder: each level doubles the fine grid
    (or the coarse grid, when refine_coarse is set) 2^level times."""
    for level in cfg.ladder_levels:
        s = 2 ** level
        if cfg.refine_coarse:
            coarse = (cfg.coarse_dims[0] * s, cfg.coarse_dims[1] * s)
            fine = cfg.fine_per_coarse
        else:
            coarse = cfg.coarse_dims
            fine = (cfg.fine_per_coarse[0] * s, cfg.fine_per_coarse[1] * s)
        yield _model(cfg, problem, coarse, fine)


def _fmt(x):
    return f"{x:.12e}"


def _eoc_row(values_per_step):
    """Average experimental order over the ladder (h halves per step)."""
    v = np.asarray(values_per_step)
    if np.any(v <= 0):
        return None
    return float(np.mean(np.log2(v[:-1] / v[1:])))


def _write_manifest(out_dir, cfg, extra):
    lines = [f"config_digest: {cfg.digest()}", f"timestamp: {time.strftime('%Y-%m-%dT%H:%M:%S')}"]
    lines += [f"{k}: {v}" for k, v in extra.items()]
    lines += ["", "[resolved config]", cfg.resolved_text()]
    (Path(out_dir) / "manifest.txt").write_text("\n".join(lines))


def run_convergence_study(cfg, out_dir=None, base_dir="."):
    """Solve/estimate along the ladder and tabulate errors, components,
    the bound and its efficiency, with a final average-order row."""
    out_dir = Path(out_dir if out_dir is not None else cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    problem = build_problem(cfg, base_dir)
    mu = as_parameter(cfg.mu)
    rows = []
    for model in ladder_models(cfg, problem):
        p = model.solve(mu)
        rep = model.estimate(p, mu)
        err = model.error(p, mu)
        rows.append({
            "n_triangles": model.grid.n_triangles,
            "n_coarse": model.grid.n_coarse,
            "error": err,
            "eta_nc": rep.eta_nc,
            "eta_r": rep.eta_r,
            "eta_df": rep.eta_df,
            "eta": rep.eta,
            "efficiency": rep.eta / err if err > 0 else np.inf,
        })
    cols = ["error", "eta_nc", "eta_r", "eta_df", "eta"]
    lines = ["n_triangles,n_coarse," + ",".join(cols) + ",efficiency"]
    for r in rows:
        lines.append(f"{r['n_triangles']},{r['n_coarse']},"
                     + ",".join(_fmt(r[c]) for c in cols) + f",{_fmt(r['efficiency'])}")
    if len(rows) > 1:
        eocs = [_eoc_row([r[c] for r in rows]) for c in cols]
        lines.append("EOC,," + ",".join("" if e is None else f"{e:.4f}" for e in eocs) + ",")
    (out_dir / "convergence.csv").write_text("\n".join(lines) + "\n")
    sigma = cfg.sigma if cfg.sigma is not None else default_sigma(cfg.k)
    _write_manifest(out_dir, cfg, {"study": "convergence", "sigma": sigma, "mu": mu})
    return rows


def _online_parameters(cfg, problem):
    if cfg.online_parameters is not None:
        return [as_parameter(m) for m in cfg.online_parameters]
    rng = np.random.default_rng(cfg.seed)
    return problem.parameter_space.sample_uniform(cfg.n_online_parameters, rng)


def run_greedy(cfg, out_dir=None, base_dir="."):
    """Offline phase only: greedy bases, exported with their manifest."""
    out_dir = Path(out_dir if out_dir is not None else cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    problem = build_problem(cfg, base_dir)
    model = _model(cfg, problem, cfg.coarse_dims, cfg.fine_per_coarse)
    bases, rsys, log = greedy_offline(model, cfg.training_set, cfg.delta_greedy,
                                      cfg.n_greedy, cfg.k_H, cfg.basis_variant, cfg.gs_tol)
    save_bases(out_dir / "bases", model.grid, bases, model.mu_bar)
    lines = ["iteration,max_eta,mu_star"]
    for n, eta, mu_star in log.records:
        lines.append(f"{n},{_fmt(eta)},{mu_star[0]!r}")
    (out_dir / "greedy.csv").write_text("\n".join(lines) + "\n")
    _write_manifest(out_dir, cfg, {
        "study": "greedy", "sigma": model.sigma,
        "termination": log.termination,
        "basis_sizes": " ".join(str(b.size) for b in bases),
    })
    return model, bases, rsys, log


def run_enrichment_study(cfg, out_dir=None, base_dir=".", threads=1):
    """Greedy (or loaded) bases followed by sequential online enrichment over
    the online parameter set; writes per-parameter logs, the final
    basis-size map and a manifest with all resolved defaults."""
    out_dir = Path(out_dir if out_dir is not None else cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    problem = build_problem(cfg, base_dir)
    model = _model(cfg, problem, cfg.coarse_dims, cfg.fine_per_coarse)
    if cfg.bases_dir:
        bases = load_bases(Path(base_dir) / cfg.bases_dir, model.space, model.mu_bar)
        rsys = assemble_reduced(model.system, bases)
    else:
        bases, rsys, _ = greedy_offline(model, cfg.training_set, cfg.delta_greedy,
                                        cfg.n_greedy, cfg.k_H, cfg.basis_variant, cfg.gs_tol)
    online = _online_parameters(cfg, problem)

    delta = cfg.delta_online
    if delta is None:
        ceiling = max(model.estimate(model.solve(mu), mu).eta for mu in online)
        delta = cfg.calibration_factor * ceiling

    strategy = MarkingStrategy(cfg.strategy, theta_doerfler=cfg.theta_doerfler,
                               n_age=cfg.n_age, theta_uniform=cfg.theta_uniform)
    logs = []
    for i, mu in enumerate(online):
        _, bases, rsys, log = enrich_online(model, mu, bases, rsys, delta,
                                            cfg.n_online, strategy, cfg.gs_tol, threads)
        logs.append(log)
        (out_dir / f"enrichment_{i:02d}.csv").write_text(log.to_csv(param_index=i))

    Nx, Ny = model.grid.coarse_dims
    sizes = np.array([b.size for b in bases]).reshape(Ny, Nx)
    size_lines = [",".join(str(v) for v in row) for row in sizes]
    (out_dir / "basis_sizes.csv").write_text("\n".join(size_lines) + "\n")
    save_bases(out_dir / "bases", model.grid, bases, model.mu_bar)
    _write_manifest(out_dir, cfg, {
        "study": "online", "sigma": model.sigma,
        "delta_online": delta, "seed": cfg.seed,
        "online_parameters": " ".join(repr(m[0]) for m in online),
        "total_basis_size": int(sizes.sum()),
        "steps": " ".join(str(l.n_steps) for l in logs),
    })
    return model, bases, logs, delta
