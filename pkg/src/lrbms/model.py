"""Bundles one discretized problem instance: grid, DG space, assembled system
and estimator context, plus true-error evaluation against the exact solution
or a doubled-resolution reference solve.
"""

import numpy as np

from . import swipdg
from .data import as_parameter
from .estimate import estimate
from .grid import build_two_level_grid
from .quadrature import triangle_rule
from .reduction import local_products

__all__ = ["DetailedModel"]


class DetailedModel:
    """Discretization of a problem on one two-level grid.

    Holds the assembled SWIPDG system plus the estimator parameters (the norm
    parameter mu_bar, the flux weight parameter mu_hat and the finite sample
    used for the residual constant); detailed solves are cached per parameter.
    """

    def __init__(self, problem, coarse_dims, fine_per_coarse, k=1, sigma=None,
                 theta_sym=1, mu_bar=None, mu_hat=None, c_sample=None):
        self.problem = problem
        self.grid = build_two_level_grid(problem.domain, coarse_dims, fine_per_coarse)
        self.lam, self.kappa, self.force = problem.data_on(self.grid)
        self.space = swipdg.DGSpace(self.grid, k)
        self.sigma = swipdg.default_sigma(k) if sigma is None else float(sigma)
        self.system = swipdg.assemble(self.space, self.lam, self.kappa, self.force,
                                      self.sigma, theta_sym)
        box = problem.parameter_space
        self.mu_bar = as_parameter(mu_bar if mu_bar is not None else [b[1] for b in box.bounds])
        self.mu_hat = as_parameter(mu_hat if mu_hat is not None else self.mu_bar)
        self.c_sample = [as_parameter(m) for m in (c_sample if c_sample is not None else box.vertices())]
        self._solutions = {}
        self._products = None
        self._reference = None

    def solve(self, mu, method="direct"):
        key = as_parameter(mu)
        if key not in self._solutions:
            self._solutions[key] = swipdg.solve_detailed(self.system, key, method=method)
        return self._solutions[key]

    def estimate(self, p, mu):
        """Estimator report for any DG vector (detailed solution or reconstructed
        reduced representative) at the given parameter."""
        return estimate(self.space, self.system, p, as_parameter(mu),
                        self.mu_bar, self.mu_hat, self.c_sample)

    def local_products(self):
        if self._products is None:
            self._products = local_products(self.space, self.lam, self.kappa,
                                            self.sigma, self.mu_bar)
        return self._products

    def energy_norm(self, q, mu=None, scope=None):
        return swipdg.energy_norm(self.space, self.lam, self.kappa, q,
                                  as_parameter(mu) if mu is not None else self.mu_bar, scope)

    # -- true errors ---------------------------------------------------------

    def exact_error_per_coarse(self, p, mu_bar=None):
        """Per-coarse energy errors against the problem's exact solution."""
        if self.problem.exact_gradient is None:
            raise ValueError(f"problem {self.problem.name!r} has no exact solution")
        mu_bar = as_parameter(mu_bar) if mu_bar is not None else self.mu_bar
        grid, space = self.grid, self.space
        ref_pts, ref_w = triangle_rule(5)
        qp = space.v0[:, None, :] + np.einsum("tij,qj->tqi", space.jac, ref_pts)
        tris = np.arange(grid.n_triangles)
        gh = np.einsum("tl,tqld->tqd", p.reshape(-1, space.n_local), space.basis_grad_at(tris, qp))
        d = self.problem.exact_gradient(qp[..., 0], qp[..., 1]) - gh
        kd = self.kappa.apply(tris[:, None], d)
        lam_vals = self.lam.at(qp, tris[:, None], mu_bar)
        w = ref_w[None, :] * grid.tri_area[:, None]
        per_tri = np.einsum("tq,tqd,tqd->t", w * lam_vals, d, kd)
        per_T = np.bincount(grid.tri_coarse, weights=per_tri, minlength=grid.n_coarse)
        return np.sqrt(np.maximum(per_T, 0.0))

    def exact_error(self, p, mu_bar=None):
        return float(np.sqrt(np.sum(self.exact_error_per_coarse(p, mu_bar) ** 2)))

    def reference_model(self):
        """Same problem on the grid with doubled fine resolution (lazy)."""
        if self._reference is None:
            nx, ny = self.grid.fine_per_coarse
            self._reference = DetailedModel(
                self.problem, self.grid.coarse_dims, (2 * nx, 2 * ny),
                k=self.space.k, sigma=self.sigma, mu_bar=self.mu_bar,
                mu_hat=self.mu_hat, c_sample=self.c_sample,
            )
        return self._reference

    def prolong(self, p):
        """Exact interpolation of a DG vector into the reference model's space."""
        ref = self.reference_model()
        nodes = ref.space.node_points()
        owners = self.grid.locate_triangle(nodes.mean(axis=1))
        vals = self.space.evaluate(p, owners, nodes)
        coeffs = np.linalg.solve(ref.space.node_matrix(), vals[..., None])
        return coeffs.ravel()

    def reference_error_per_coarse(self, p, mu, mu_bar=None):
        """Per-coarse energy errors against a doubled-resolution solve at mu."""
        ref = self.reference_model()
        mu_bar = as_parameter(mu_bar) if mu_bar is not None else self.mu_bar
        diff = ref.solve(mu) - self.prolong(p)
        return swipdg.energy_seminorm_per_coarse(ref.space, ref.lam, ref.kappa, diff, mu_bar)

    def reference_error(self, p, mu, mu_bar=None):
        return float(np.sqrt(np.sum(self.reference_error_per_coarse(p, mu, mu_bar) ** 2)))

    def error_per_coarse(self, p, mu, mu_bar=None):
        """Exact-solution errors where available (smooth problem at mu = 1),
        doubled-resolution reference errors otherwise."""
        mu = as_parameter(mu)
        if self.problem.exact_gradient is not None and mu == (1.0,):
            return self.exact_error_per_coarse(p, mu_bar)
        return self.reference_error_per_coarse(p, mu, mu_bar)

    def error(self, p, mu, mu_bar=None):
        return float(np.sqrt(np.sum(self.error_per_coarse(p, mu, mu_bar) ** 2)))
