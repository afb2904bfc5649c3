"""Symmetric weighted interior-penalty DG discretization on the two-level grid.

Assembles the parametric bilinear form as one sparse matrix per affine
component (volume, coupling and penalty terms), the load vector, and solves
the detailed problem.  Dirichlet values are imposed weakly through the
boundary face terms; no degrees of freedom are eliminated.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .quadrature import edge_rule, triangle_rule

__all__ = [
    "DGSpace",
    "AssembledSystem",
    "CoercivityError",
    "assemble",
    "assemble_local_product",
    "assemble_patch",
    "solve_detailed",
    "energy_norm",
    "energy_seminorm_per_coarse",
]


class CoercivityError(RuntimeError):
    """Raised when the system matrix cannot be factorized / solved accurately."""


def default_sigma(k):
    """Degree-dependent penalty factor; large enough for coercivity on the
    structured criss grids and calibrated against the tabulated estimator
    components of the smooth reference problem."""
    return 12.0 * k * k


def _monomial_exponents(k):
    return [(d - b, b) for d in range(k + 1) for b in range(d + 1)]


class DGSpace:
    """Discontinuous space of per-triangle polynomials of total degree <= k.

    The local basis consists of the P_k monomials on the reference triangle,
    mapped through the affine triangle map.  Degrees of freedom are blocked
    per triangle; since triangles are numbered per coarse element, the dofs
    of a coarse element form one contiguous range.
    """

    def __init__(self, grid, k=1):
        if k < 1:
            raise ValueError("polynomial order must be at least 1")
        self.grid = grid
        self.k = int(k)
        self.exponents = np.array(_monomial_exponents(self.k))
        self.n_local = len(self.exponents)
        self.n_dofs = grid.n_triangles * self.n_local

        v = grid.vertices[grid.triangles]
        self.v0 = v[:, 0]
        jac = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]], axis=-1)
        self.jac = jac
        det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
        inv = np.empty_like(jac)
        inv[:, 0, 0] = jac[:, 1, 1] / det
        inv[:, 1, 1] = jac[:, 0, 0] / det
        inv[:, 0, 1] = -jac[:, 0, 1] / det
        inv[:, 1, 0] = -jac[:, 1, 0] / det
        self.jac_inv = inv

    def coarse_dof_range(self, T):
        tris = self.grid.coarse_tris[T]
        return slice(tris[0] * self.n_local, (tris[-1] + 1) * self.n_local)

    def coarse_dofs(self, T):
        r = self.coarse_dof_range(T)
        return np.arange(r.start, r.stop)

    def dofs_of_tris(self, tris):
        return (np.asarray(tris)[:, None] * self.n_local + np.arange(self.n_local)).ravel()

    def reference_coords(self, tris, points):
        """Reference coordinates of points, shaped (n, n_q, 2), in triangles (n,)."""
        d = points - self.v0[tris][:, None, :]
        return np.einsum("tij,tqj->tqi", self.jac_inv[tris], d)

    def _monomials(self, xhat):
        a = self.exponents[:, 0]
        b = self.exponents[:, 1]
        return xhat[..., None, 0] ** a * xhat[..., None, 1] ** b

    def _monomial_grads(self, xhat):
        a = self.exponents[:, 0]
        b = self.exponents[:, 1]
        x = xhat[..., None, 0]
        y = xhat[..., None, 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            gx = np.where(a > 0, a * np.where(a > 0, x, 1.0) ** np.maximum(a - 1, 0) * y ** b, 0.0)
            gy = np.where(b > 0, b * x ** a * np.where(b > 0, y, 1.0) ** np.maximum(b - 1, 0), 0.0)
        return np.stack([gx, gy], axis=-1)

    def basis_at(self, tris, points):
        """Basis values at physical points; points has shape tris.shape + (nq, 2)."""
        return self._monomials(self.reference_coords(tris, points))

    def basis_grad_at(self, tris, points):
        gref = self._monomial_grads(self.reference_coords(tris, points))
        return np.einsum("...ji,...lj->...li", self.jac_inv[tris][..., None, :, :], gref)

    def evaluate(self, q, tris, points):
        coeffs = q.reshape(-1, self.n_local)[tris]
        return np.einsum("...l,...ql->...q", coeffs, self.basis_at(tris, points))

    def gradients(self, q):
        """Broken gradient of a DG vector at triangle centroids, (n_tri, 2); exact for k = 1."""
        cen = self.grid.centroids()[:, None, :]
        g = self.basis_grad_at(np.arange(self.grid.n_triangles), cen)[:, 0]
        coeffs = q.reshape(-1, self.n_local)
        return np.einsum("tl,tld->td", coeffs, g)

    def interpolate(self, func):
        """Per-triangle vertex/node interpolation of a closure f(x, y) into the space."""
        nodes = self.node_points()
        vals = func(nodes[..., 0], nodes[..., 1])
        return np.linalg.solve(self.node_matrix(), vals[..., None]).ravel()

    def node_points(self):
        """Interpolation nodes per triangle, (n_tri, n_local, 2); the vertices for k = 1."""
        if self.k == 1:
            return self.grid.vertices[self.grid.triangles].astype(float)
        ref = np.array([(a / self.k, b / self.k) for a, b in _monomial_exponents(self.k)])
        return self.v0[:, None, :] + np.einsum("tij,qj->tqi", self.jac, ref)

    def node_matrix(self):
        """Local monomial-to-node value matrices, (n_tri, n_local, n_local)."""
        tris = np.arange(self.grid.n_triangles)
        return self._monomials(self.reference_coords(tris, self.node_points()))


class _FaceData:
    """Precomputed per-face geometry: quad points, traces, normal fluxes, weights."""

    def __init__(self, space, kappa, quad_degree):
        grid = space.grid
        s, w = edge_rule(quad_degree)
        a = grid.vertices[grid.face_vertices[:, 0]]
        b = grid.vertices[grid.face_vertices[:, 1]]
        self.quad_points = a[:, None, :] + s[None, :, None] * (b - a)[:, None, :]
        self.weights = w[None, :] * grid.face_length[:, None]
        self.tm = grid.face_tris[:, 0]
        self.tp = grid.face_tris[:, 1]
        self.inner = np.flatnonzero(~grid.face_boundary)
        self.boundary = np.flatnonzero(grid.face_boundary)
        n = grid.face_normal

        self.trace_m = space.basis_at(self.tm, self.quad_points)
        grad_m = space.basis_grad_at(self.tm, self.quad_points)
        self.kgn_m = (kappa.apply(self.tm[:, None, None], grad_m) * n[:, None, None, :]).sum(-1)
        delta_m = kappa.normal_diffusion(self.tm, n)

        tp_safe = np.where(self.tp >= 0, self.tp, self.tm)
        trace_p = space.basis_at(tp_safe, self.quad_points)
        grad_p = space.basis_grad_at(tp_safe, self.quad_points)
        kgn_p = (kappa.apply(tp_safe[:, None, None], grad_p) * n[:, None, None, :]).sum(-1)
        delta_p = kappa.normal_diffusion(tp_safe, n)
        bnd = grid.face_boundary
        trace_p[bnd] = 0.0
        kgn_p[bnd] = 0.0
        self.trace_p = trace_p
        self.kgn_p = kgn_p
        self.tp_safe = tp_safe

        # SWIPDG weights and penalty weight from the normal diffusion on each side
        self.omega_m = np.where(bnd, 1.0, delta_p / (delta_m + delta_p))
        self.omega_p = np.where(bnd, 0.0, delta_m / (delta_m + delta_p))
        self.sigma_eps = np.where(bnd, delta_m, delta_m * delta_p / (delta_m + delta_p))
        self.delta_m = delta_m
        self.delta_p = np.where(bnd, 0.0, delta_p)
        self.inv_h = 1.0 / grid.face_length


@dataclass
class AssembledSystem:
    """Per-component operators B_xi, load vector, and assembly context.

    ``matrix(mu)`` forms the theta-weighted combination; all components share
    a single sparsity pattern.
    """

    space: DGSpace
    lam: object
    kappa: object
    force: object
    components: list
    load: np.ndarray
    sigma: float
    theta_sym: int
    face_data: _FaceData

    def matrix(self, mu):
        th = self.lam.thetas(mu)
        m = th[0] * self.components[0]
        for w, B in zip(th[1:], self.components[1:]):
            m = m + w * B
        return m

    @property
    def n_dofs(self):
        return self.space.n_dofs


def _lambda_on_faces(lam, fd, xi=None, mu=None):
    """Component (or theta-combined) scalar on both sides of every face."""
    if xi is not None:
        lm = lam.component_at(xi, fd.quad_points, fd.tm[:, None])
        lp = lam.component_at(xi, fd.quad_points, fd.tp_safe[:, None])
    else:
        lm = lam.at(fd.quad_points, fd.tm[:, None], mu)
        lp = lam.at(fd.quad_points, fd.tp_safe[:, None], mu)
    return lm, lp


def _face_block(fd, idx, lam_m, lam_p, sigma, theta_sym, include_coupling, include_penalty, two_sided):
    """Face contribution blocks for the given face ids.

    Returns (n_face, m, m) with m = 2 n_local for two-sided (inner) faces and
    m = n_local for boundary faces.
    """
    w = fd.weights[idx]
    if two_sided:
        jump = np.concatenate([fd.trace_m[idx], -fd.trace_p[idx]], axis=2)
        flux = np.concatenate(
            [fd.omega_m[idx, None, None] * lam_m[:, :, None] * fd.kgn_m[idx],
             fd.omega_p[idx, None, None] * lam_p[:, :, None] * fd.kgn_p[idx]],
            axis=2,
        )
    else:
        jump = fd.trace_m[idx]
        flux = lam_m[:, :, None] * fd.kgn_m[idx]
    block = np.zeros((len(idx), jump.shape[2], jump.shape[2]))
    if include_coupling:
        bc = -np.einsum("fq,fqj,fqi->fij", w, flux, jump)
        block += bc + theta_sym * bc.transpose(0, 2, 1)
    if include_penalty:
        lam_mean = fd.omega_m[idx, None] * lam_m + fd.omega_p[idx, None] * lam_p
        pen = sigma * fd.inv_h[idx, None] * fd.sigma_eps[idx, None] * lam_mean
        block += np.einsum("fq,fqj,fqi->fij", w * pen, jump, jump)
    return block


def _scatter(blocks, dof_rows, n_dofs):
    rows = np.broadcast_to(dof_rows[:, :, None], blocks.shape).ravel()
    cols = np.broadcast_to(dof_rows[:, None, :], blocks.shape).ravel()
    return sp.coo_matrix((blocks.ravel(), (rows, cols)), shape=(n_dofs, n_dofs))


def _assemble_matrix(space, lam, kappa, sigma, theta_sym, fd, xi=None, mu=None,
                     include_coupling=True, include_penalty=True):
    """One component (xi) or one theta-combined (mu) SWIPDG matrix."""
    grid = space.grid
    nloc = space.n_local

    ref_pts, ref_w = triangle_rule(2 * space.k)
    qp = space.v0[:, None, :] + np.einsum("tij,qj->tqi", space.jac, ref_pts)
    grads = space.basis_grad_at(np.arange(grid.n_triangles), qp)
    kgrads = kappa.apply(np.arange(grid.n_triangles)[:, None, None], grads)
    if xi is not None:
        lam_vol = lam.component_at(xi, qp, np.arange(grid.n_triangles)[:, None])
    else:
        lam_vol = lam.at(qp, np.arange(grid.n_triangles)[:, None], mu)
    wvol = ref_w[None, :] * grid.tri_area[:, None]
    vol_blocks = np.einsum("tq,tqid,tqjd->tij", wvol * lam_vol, grads, kgrads)
    tri_dofs = np.arange(grid.n_triangles)[:, None] * nloc + np.arange(nloc)[None, :]
    mat = _scatter(vol_blocks, tri_dofs, space.n_dofs)

    lam_m, lam_p = _lambda_on_faces(lam, fd, xi=xi, mu=mu)

    idx = fd.inner
    if len(idx):
        blocks = _face_block(fd, idx, lam_m[idx], lam_p[idx], sigma, theta_sym,
                             include_coupling, include_penalty, two_sided=True)
        dofs = np.concatenate([tri_dofs[fd.tm[idx]], tri_dofs[fd.tp[idx]]], axis=1)
        mat += _scatter(blocks, dofs, space.n_dofs)

    idx = fd.boundary
    if len(idx):
        blocks = _face_block(fd, idx, lam_m[idx], lam_p[idx], sigma, theta_sym,
                             include_coupling, include_penalty, two_sided=False)
        mat += _scatter(blocks, tri_dofs[fd.tm[idx]], space.n_dofs)

    return mat.tocsr()


def _load_vector(space, force):
    grid = space.grid
    ref_pts, ref_w = triangle_rule(2 * space.k + 2)
    qp = space.v0[:, None, :] + np.einsum("tij,qj->tqi", space.jac, ref_pts)
    fvals = force.at(qp, np.arange(grid.n_triangles)[:, None])
    basis = space.basis_at(np.arange(grid.n_triangles), qp)
    w = ref_w[None, :] * grid.tri_area[:, None]
    return np.einsum("tq,tql->tl", w * fvals, basis).ravel()


def assemble(space, lam, kappa, force, sigma, theta_sym=1):
    """Assemble the SWIPDG system as per-component matrices plus load vector.

    Parameters
    ----------
    space : DGSpace
    lam : AffineParametricScalar
    kappa : DiffusionTensor
    force : ForceField
    sigma : float
        Penalty factor, must be >= 1.
    theta_sym : int
        Symmetry switch of the interior-penalty family (-1, 0, 1); 1 gives
        the symmetric weighted scheme used everywhere by default.
    """
    if sigma < 1.0:
        raise ValueError(f"penalty factor must be >= 1, got {sigma}")
    if theta_sym not in (-1, 0, 1):
        raise ValueError(f"symmetry switch must be one of -1, 0, 1, got {theta_sym}")
    fd = _FaceData(space, kappa, 2 * space.k + 1)
    if not (np.all(fd.delta_m > 0.0) and np.all(fd.delta_p[~space.grid.face_boundary] > 0.0)):
        raise ValueError("normal diffusion must be positive on every face side")
    components = [
        _assemble_matrix(space, lam, kappa, sigma, theta_sym, fd, xi=xi)
        for xi in range(lam.n_components)
    ]
    load = _load_vector(space, force)
    return AssembledSystem(space, lam, kappa, force, components, load, float(sigma), int(theta_sym), fd)


def assemble_local_product(space, lam, kappa, sigma, mu):
    """Volume plus penalty matrix at a fixed parameter (no coupling terms).

    Restricted to the dofs of one coarse element this is the local inner
    product used to orthonormalize reduced bases.
    """
    fd = _FaceData(space, kappa, 2 * space.k + 1)
    return _assemble_matrix(space, lam, kappa, sigma, 1, fd, mu=mu, include_coupling=False)


def assemble_volume(space, lam, kappa, mu):
    """Volume (broken stiffness) matrix at a fixed parameter, no face terms."""
    fd = _FaceData(space, kappa, 2 * space.k + 1)
    return _assemble_matrix(space, lam, kappa, 1.0, 1, fd, mu=mu,
                            include_coupling=False, include_penalty=False)


def solve_detailed(sys, mu, method="direct", rtol=1e-10):
    """Solve B(mu) p = L to a relative residual of at most ``rtol``.

    ``method`` may be "direct" (sparse LU) or "cg" (diagonally preconditioned
    conjugate gradients); both are held to the same residual contract.
    """
    B = sys.matrix(mu).tocsc()
    L = sys.load
    try:
        if method == "direct":
            p = spla.splu(B).solve(L)
        elif method == "cg":
            M = sp.diags(1.0 / B.diagonal())
            p, info = spla.cg(B, L, rtol=rtol * 1e-3, atol=0.0, M=M, maxiter=20 * B.shape[0])
            if info != 0:
                raise CoercivityError(f"cg did not converge (info={info}); try a larger penalty factor")
        else:
            raise ValueError(f"unknown solver method {method!r}")
    except RuntimeError as exc:
        raise CoercivityError(f"factorization failed ({exc}); try a larger penalty factor") from exc
    res = np.linalg.norm(B @ p - L)
    ref = max(np.linalg.norm(L), 1e-300)
    if not np.isfinite(res) or res > rtol * ref:
        raise CoercivityError(
            f"solver residual {res / ref:.2e} exceeds {rtol:.1e}; try a larger penalty factor"
        )
    return p


def energy_seminorm_per_coarse(space, lam, kappa, q, mu):
    """Per-coarse-element broken energy seminorms (volume terms only)."""
    grid = space.grid
    ref_pts, ref_w = triangle_rule(2 * space.k)
    qp = space.v0[:, None, :] + np.einsum("tij,qj->tqi", space.jac, ref_pts)
    tris = np.arange(grid.n_triangles)
    grads = space.basis_grad_at(tris, qp)
    coeffs = q.reshape(-1, space.n_local)
    gq = np.einsum("tl,tqld->tqd", coeffs, grads)
    kgq = kappa.apply(tris[:, None], gq)
    lam_vol = lam.at(qp, tris[:, None], mu)
    w = ref_w[None, :] * grid.tri_area[:, None]
    per_tri = np.einsum("tq,tqd,tqd->t", w * lam_vol, gq, kgq)
    per_T = np.bincount(grid.tri_coarse, weights=per_tri, minlength=grid.n_coarse)
    return np.sqrt(np.maximum(per_T, 0.0))


def energy_norm(space, lam, kappa, q, mu, scope=None):
    """Energy seminorm of a DG vector, globally or on one coarse element."""
    per_T = energy_seminorm_per_coarse(space, lam, kappa, q, mu)
    if scope is None:
        return float(np.sqrt(np.sum(per_T ** 2)))
    return float(per_T[int(scope)])


def patch_index_sets(space, patch):
    """Dof indices of a coarse patch and of the exterior triangle layer around it."""
    grid = space.grid
    patch = sorted(int(T) for T in patch)
    if not patch:
        raise ValueError("patch must contain at least one coarse element")
    in_patch = np.zeros(grid.n_coarse, dtype=bool)
    in_patch[patch] = True
    tri_in = in_patch[grid.tri_coarse]
    tm, tp = grid.face_tris[:, 0], grid.face_tris[:, 1]
    inner = tp >= 0
    cross = inner & (tri_in[tm] != tri_in[np.where(inner, tp, 0)])
    ext = np.unique(np.where(tri_in[tm], tp, tm)[cross])
    patch_tris = np.concatenate([grid.coarse_tris[T] for T in patch])
    return space.dofs_of_tris(patch_tris), space.dofs_of_tris(ext), patch_tris


def assemble_patch(space, sys, patch, dirichlet_data, mu):
    """SWIPDG system restricted to a coarse patch with weak Dirichlet data.

    The patch keeps the global face terms; on faces crossing the patch
    boundary the exterior trial values are substituted from
    ``dirichlet_data`` (a global dof vector, used on one exterior triangle
    layer), which moves their penalty/coupling contributions to the right
    hand side.  Faces on the domain boundary keep homogeneous data.

    Returns (matrix, rhs, patch dof indices).
    """
    dofs_p, dofs_e, _ = patch_index_sets(space, patch)
    B = sys.matrix(mu).tocsr()
    A = B[dofs_p][:, dofs_p].tocsc()
    rhs = sys.load[dofs_p].copy()
    if dirichlet_data is not None and len(dofs_e):
        rhs -= B[dofs_p][:, dofs_e] @ np.asarray(dirichlet_data)[dofs_e]
    return A, rhs, dofs_p
