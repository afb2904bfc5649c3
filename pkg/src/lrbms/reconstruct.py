"""Conforming reconstructions of a DG function: the Oswald interpolant (vertex
averaging) and the lowest-order Raviart-Thomas diffusive flux built from the
face terms of the DG scheme.
"""

from dataclasses import dataclass

import numpy as np

__all__ = ["FluxField", "oswald_interpolate", "reconstruct_flux", "divergence", "divergences"]


@dataclass(frozen=True)
class FluxField:
    """Lowest-order Raviart-Thomas vector field on the fine triangulation.

    ``face_dofs[e]`` is the integrated normal flux over face e with respect to
    the face normal n_e; the normal component is single-valued per face by
    representation, so the field is H(div)-conforming and its divergence is
    constant on every triangle.
    """

    grid: object
    face_dofs: np.ndarray  # (n_face,)

    def at(self, tris, points):
        """Field values at physical points, points shaped (n, n_q, 2) for triangles (n,)."""
        grid = self.grid
        tris = np.asarray(tris)
        opp = _opposite_vertices(grid)[tris]  # (n, 3, 2)
        signed = (grid.tri_face_signs[tris] * self.face_dofs[grid.tri_faces[tris]])  # (n, 3)
        area = grid.tri_area[tris]
        d = points[:, :, None, :] - opp[:, None, :, :]  # (n, n_q, 3, 2)
        return np.einsum("nf,nqfd->nqd", signed / (2.0 * area)[:, None], d)

    def divergences(self):
        return divergences(self)


def _opposite_vertices(grid):
    """Vertex opposite each face of each triangle, (n_tri, 3, 2)."""
    tri_v = grid.triangles  # (n_tri, 3)
    face_v = grid.face_vertices[grid.tri_faces]  # (n_tri, 3, 2)
    opp_id = np.empty(grid.tri_faces.shape, dtype=int)
    for k in range(3):
        fv = face_v[:, k, :]
        mask = (tri_v != fv[:, :1]) & (tri_v != fv[:, 1:2])
        opp_id[:, k] = tri_v[np.arange(tri_v.shape[0]), mask.argmax(axis=1)]
    return grid.vertices[opp_id]


def _vertex_adjacency(grid):
    boundary = np.zeros(grid.vertices.shape[0], dtype=bool)
    boundary[grid.face_vertices[grid.face_boundary].ravel()] = True
    return boundary


def oswald_interpolate(space, q):
    """Conforming interpolant of a piecewise-linear DG vector.

    At interior mesh vertices the value is the arithmetic mean of all
    adjacent triangles' values, at boundary vertices zero; the result is
    returned as a DG vector and is continuous with zero boundary trace.
    """
    if space.k != 1:
        raise ValueError("Oswald interpolation is implemented for order k = 1 only")
    grid = space.grid
    node_vals = np.einsum("tkl,tl->tk", space.node_matrix(), q.reshape(-1, space.n_local))

    sums = np.zeros(grid.vertices.shape[0])
    counts = np.zeros(grid.vertices.shape[0])
    np.add.at(sums, grid.triangles, node_vals)
    np.add.at(counts, grid.triangles, 1.0)
    avg = sums / np.maximum(counts, 1.0)
    avg[_vertex_adjacency(grid)] = 0.0

    new_nodes = avg[grid.triangles]
    coeffs = np.linalg.solve(space.node_matrix(), new_nodes[..., None])
    return coeffs.ravel()


def reconstruct_flux(space, sys, p, mu, order=0):
    """Diffusive flux reconstruction of a DG vector in the RT space of order 0.

    Every face dof carries the integrated numerical flux of the scheme,
    i.e. the face moment of -mean(lambda kappa grad p) . n_e plus the penalty
    sigma_e(mu) [p]; together these make the reconstruction locally
    conservative for solutions of the scheme.
    """
    if order != 0:
        raise NotImplementedError("only the lowest-order flux reconstruction is implemented")
    fd = sys.face_data
    grid = space.grid
    coeffs = p.reshape(-1, space.n_local)
    pm = np.einsum("fl,fql->fq", coeffs[fd.tm], fd.trace_m)
    pp = np.einsum("fl,fql->fq", coeffs[fd.tp_safe], fd.trace_p)  # traces already zeroed on boundary
    gm = np.einsum("fl,fql->fq", coeffs[fd.tm], fd.kgn_m)
    gp = np.einsum("fl,fql->fq", coeffs[fd.tp_safe], fd.kgn_p)

    lam = sys.lam
    lam_m = lam.at(fd.quad_points, fd.tm[:, None], mu)
    lam_p = lam.at(fd.quad_points, fd.tp_safe[:, None], mu)
    lam_p = np.where(grid.face_boundary[:, None], 0.0, np.broadcast_to(lam_p, pm.shape))

    mean_flux = fd.omega_m[:, None] * lam_m * gm + fd.omega_p[:, None] * lam_p * gp
    jump = pm - pp
    lam_mean = fd.omega_m[:, None] * lam_m + fd.omega_p[:, None] * lam_p
    penalty = sys.sigma * fd.inv_h[:, None] * fd.sigma_eps[:, None] * lam_mean * jump
    dofs = np.einsum("fq,fq->f", fd.weights, -mean_flux + penalty)
    return FluxField(grid=grid, face_dofs=dofs)


def divergences(flux):
    """Constant divergence of the RT field on every triangle, (n_tri,)."""
    grid = flux.grid
    signed = grid.tri_face_signs * flux.face_dofs[grid.tri_faces]
    return signed.sum(axis=1) / grid.tri_area


def divergence(flux, t):
    """Constant divergence of the RT field on one triangle."""
    grid = flux.grid
    t = int(t)
    if not 0 <= t < grid.n_triangles:
        raise ValueError(f"triangle id {t} out of range")
    return float(divergences(flux)[t])
