"""Offline greedy basis generation, marking strategies and the adaptive
online-enrichment loop that grows subdomain bases with restricted solutions
of oversampled local problems.
"""

import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .data import as_parameter
from .grid import oversampling_patch
from .reduction import (
    assemble_reduced,
    extend_basis,
    initialize_bases,
    reconstruct,
    solve_reduced,
    update_reduced,
)
from .swipdg import CoercivityError, assemble_patch

__all__ = [
    "MarkingStrategy",
    "EnrichmentLog",
    "GreedyLog",
    "mark",
    "greedy_offline",
    "enrich_online",
    "solve_oversampled",
]


@dataclass
class MarkingStrategy:
    """Subdomain selection rule with per-subdomain age counters.

    Variants: ``uniform`` (everything), ``doerfler_age`` (smallest indicator
    mass prefix plus overaged subdomains) and ``uniform_doerfler_age``
    (uniform far above the tolerance, then doerfler_age).
    """

    variant: str = "uniform"
    theta_doerfler: float = 1.0 / 3.0
    n_age: int = 4
    theta_uniform: float = 10.0
    ages: np.ndarray = None

    def __post_init__(self):
        if self.variant not in ("uniform", "doerfler_age", "uniform_doerfler_age"):
            raise ValueError(f"unknown marking variant {self.variant!r}")
        if not 0.0 < self.theta_doerfler <= 1.0:
            raise ValueError("doerfler fraction must lie in (0, 1]")

    def _ensure_ages(self, n):
        if self.ages is None or len(self.ages) != n:
            self.ages = np.zeros(n, dtype=int)


def _doerfler_prefix(squared, theta):
    """Minimal prefix of descending squared indicators holding theta of the mass."""
    total = squared.sum()
    if total <= 0.0:
        return np.array([], dtype=int)
    order = np.lexsort((np.arange(len(squared)), -squared))
    cum = np.cumsum(squared[order])
    k = int(np.searchsorted(cum, theta * total * (1.0 - 1e-13))) + 1
    return order[:k]


def mark(indicators, strategy, global_eta=None, delta_online=None):
    """Select subdomains for enrichment and update the age counters.

    Marked subdomains get age 0, unmarked ones age + 1.  Returns the marked
    ids in ascending order.
    """
    ind = np.asarray(indicators, dtype=float)
    n = len(ind)
    strategy._ensure_ages(n)
    variant = strategy.variant
    if variant == "uniform_doerfler_age":
        if global_eta is None or delta_online is None:
            raise ValueError("uniform_doerfler_age needs the current eta and the online tolerance")
        variant = "uniform" if global_eta > strategy.theta_uniform * delta_online else "doerfler_age"
    if variant == "uniform":
        marked = np.arange(n)
    else:
        prefix = _doerfler_prefix(ind ** 2, strategy.theta_doerfler)
        aged = np.flatnonzero(strategy.ages > strategy.n_age)
        marked = np.union1d(prefix, aged)
    unmarked = np.setdiff1d(np.arange(n), marked, assume_unique=False)
    strategy.ages[marked] = 0
    strategy.ages[unmarked] += 1
    return marked


@dataclass
class GreedyLog:
    records: list = field(default_factory=list)  # (iteration, max_eta, mu_star)
    termination: str = ""


@dataclass
class EnrichmentLog:
    """Per-step history of one online-enrichment run."""

    parameter: tuple
    records: list = field(default_factory=list)
    termination: str = ""

    def add(self, step, eta, marked, sizes, accepted):
        self.records.append({
            "step": step,
            "eta": float(eta),
            "marked": list(int(T) for T in marked),
            "sizes": list(int(s) for s in sizes),
            "accepted": int(accepted),
        })

    @property
    def n_steps(self):
        return max(r["step"] for r in self.records) if self.records else 0

    def to_csv(self, param_index=0):
        buf = io.StringIO()
        buf.write("param_index,step,eta,n_marked,total_basis_size\n")
        for r in self.records:
            buf.write(f"{param_index},{r['step']},{r['eta']:.12e},{len(r['marked'])},{sum(r['sizes'])}\n")
        return buf.getvalue()


def solve_oversampled(model, mu, patch, p_fine):
    """Local SWIPDG solve on an oversampled patch with p_fine as Dirichlet data.

    The data enters weakly through the face penalty/coupling terms on the
    patch boundary (exactly the global face terms with the exterior trial
    values substituted); the domain boundary keeps homogeneous data.  Returns
    a global-length vector carrying the patch solution.
    """
    mu = as_parameter(mu)
    A, rhs, dofs = assemble_patch(model.space, model.system, patch, p_fine, mu)
    x = spla.splu(A.tocsc()).solve(rhs)
    res = np.linalg.norm(A @ x - rhs)
    ref = max(np.linalg.norm(rhs), 1e-300)
    if not np.isfinite(res) or res > 1e-10 * ref:
        raise CoercivityError(f"patch solve residual {res / ref:.2e} exceeds 1e-10")
    out = np.zeros(model.space.n_dofs)
    out[dofs] = x
    return out


def _training_etas(model, rsys, bases, training):
    etas = []
    for mu in training:
        coeffs = solve_reduced(rsys, model.lam, mu)
        etas.append(model.estimate(reconstruct(model.space, bases, coeffs), mu).eta)
    return np.array(etas)


def greedy_offline(model, training, delta_greedy, n_greedy, k_H=1,
                   basis_variant="tensor", gs_tol=1e-10):
    """Greedy snapshot collection over a training set.

    Bases start from the coarse shape functions of order up to k_H; while the
    worst estimated training error exceeds delta_greedy (and fewer than
    n_greedy snapshots were taken), the detailed problem is solved at the
    worst parameter and its restrictions extend every subdomain basis.

    Returns (bases, reduced system, GreedyLog).
    """
    training = [as_parameter(mu) for mu in training]
    if n_greedy > 0 and not training:
        raise ValueError("greedy needs a nonempty training set")
    products = model.local_products()
    bases = initialize_bases(model.space, k_H, products, basis_variant, gs_tol)
    rsys = assemble_reduced(model.system, bases)
    log = GreedyLog()
    n = 0
    while n < n_greedy:
        etas = _training_etas(model, rsys, bases, training)
        worst = int(np.argmax(etas))  # argmax takes the lowest index on ties
        if etas[worst] <= delta_greedy:
            log.termination = "tolerance"
            break
        mu_star = training[worst]
        log.records.append((n, float(etas[worst]), mu_star))
        snapshot = model.solve(mu_star)
        for T, basis in enumerate(bases):
            bases[T], _ = extend_basis(basis, snapshot[basis.dof_slice], products[T], gs_tol)
        rsys = assemble_reduced(model.system, bases)
        n += 1
    else:
        log.termination = "max_iterations" if n_greedy > 0 else "initialization_only"
    return bases, rsys, log


def enrich_online(model, mu, bases, rsys, delta_online, n_online, strategy,
                  gs_tol=1e-10, threads=1):
    """Adaptive online enrichment for one parameter (solve, estimate, mark,
    locally correct, update, repeat).

    Marked subdomains are corrected by oversampled patch solves with the
    current reduced solution as Dirichlet data; each accepted restriction
    extends its subdomain basis, and only the touched reduced blocks are
    refreshed.  Returns (reduced coefficients, bases, reduced system, log).
    """
    mu = as_parameter(mu)
    products = model.local_products()
    log = EnrichmentLog(parameter=mu)
    coeffs = solve_reduced(rsys, model.lam, mu)
    p_fine = reconstruct(model.space, bases, coeffs)
    report = model.estimate(p_fine, mu)
    log.add(0, report.eta, [], [b.size for b in bases], 0)
    n = 0
    while report.eta > delta_online and n < n_online:
        marked = mark(report.indicators, strategy, report.eta, delta_online)
        patches = {int(T): sorted(oversampling_patch(model.grid, T)) for T in marked}
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                locals_ = dict(zip(patches, pool.map(
                    lambda T: solve_oversampled(model, mu, patches[T], p_fine), patches)))
        else:
            locals_ = {T: solve_oversampled(model, mu, patches[T], p_fine) for T in patches}
        changed, accepted = [], 0
        for T in sorted(patches):  # deterministic application order
            basis = bases[T]
            bases[T], ok = extend_basis(basis, locals_[T][basis.dof_slice], products[T], gs_tol)
            if ok:
                changed.append(T)
                accepted += 1
        if changed:
            update_reduced(rsys, model.system, bases, changed)
        coeffs = solve_reduced(rsys, model.lam, mu)
        p_fine = reconstruct(model.space, bases, coeffs)
        report = model.estimate(p_fine, mu)
        n += 1
        log.add(n, report.eta, marked, [b.size for b in bases], accepted)
    log.termination = "tolerance" if report.eta <= delta_online else "max_iterations"
    return coeffs, bases, rsys, log
