"""Per-subdomain reduced bases and the block-sparse reduced system.

Each coarse element carries an ordered, hierarchical basis of fine-grid DG
vectors, orthonormal with respect to the local energy product (volume plus
face penalty at the fixed norm parameter).  The reduced system is assembled
from restrictions of the global sparse component matrices, so extending one
basis only touches its own blocks and the coupling blocks of its neighbors.
"""

import hashlib
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .swipdg import assemble_local_product

__all__ = [
    "LocalReducedBasis",
    "ReducedSystem",
    "local_products",
    "initialize_bases",
    "extend_basis",
    "assemble_reduced",
    "update_reduced",
    "solve_reduced",
    "reconstruct",
    "save_bases",
    "load_bases",
]


@dataclass(frozen=True)
class LocalReducedBasis:
    """Ordered basis of one subdomain, as columns over the local dof range."""

    T: int
    dof_slice: slice
    vectors: np.ndarray  # (n_local_dofs, N_T)

    @property
    def size(self):
        return self.vectors.shape[1]

    def gram(self, product):
        return self.vectors.T @ (product @ self.vectors)


def local_products(space, lam, kappa, sigma, mu_bar):
    """Local orthonormalization products: volume + penalty matrix at mu_bar,
    restricted to each coarse element's dof range."""
    P = assemble_local_product(space, lam, kappa, sigma, mu_bar).tocsr()
    out = []
    for T in range(space.grid.n_coarse):
        sl = space.coarse_dof_range(T)
        out.append(P[sl.start:sl.stop, sl.start:sl.stop].tocsr())
    return out


def _orthonormalize(V, v, product, tol_rel):
    """Two-pass Gram-Schmidt of v against the columns of V in the given product."""
    norm0 = np.sqrt(max(v @ (product @ v), 0.0))
    if norm0 == 0.0:
        return None
    w = v.copy()
    for _ in range(2):
        if V.shape[1]:
            w = w - V @ (V.T @ (product @ w))
    norm1 = np.sqrt(max(w @ (product @ w), 0.0))
    if norm1 <= tol_rel * norm0:
        return None
    return w / norm1


def extend_basis(basis, v, product, tol_rel=1e-10):
    """Orthonormalize v against the basis and append it if independent.

    Returns (basis, accepted); existing vectors are never modified, so bases
    stay hierarchical.  A locally dependent (or zero) vector is rejected, not
    an error.
    """
    v = np.asarray(v, dtype=float)
    if v.shape[0] != basis.vectors.shape[0]:
        raise ValueError("extension vector does not match the subdomain dof range")
    w = _orthonormalize(basis.vectors, v, product, tol_rel)
    if w is None:
        return basis, False
    return replace(basis, vectors=np.column_stack([basis.vectors, w])), True


def _coarse_monomials(k_H, variant):
    if k_H < 0:
        raise ValueError("coarse order must be nonnegative")
    if variant == "tensor":
        exps = [(a, b) for b in range(k_H + 1) for a in range(k_H + 1)]
    elif variant == "simplicial":
        exps = [(d - b, b) for d in range(k_H + 1) for b in range(d + 1)]
    else:
        raise ValueError(f"unknown coarse basis variant {variant!r}")
    exps.sort(key=lambda ab: (ab[0] + ab[1], ab[1]))  # constant first
    return exps


def initialize_bases(space, k_H, products, variant="tensor", tol_rel=1e-10):
    """Initialize every subdomain basis with the coarse shape functions.

    The tensor variant spans {x^a y^b : a, b <= k_H} (4 functions for
    k_H = 1), the simplicial variant the total-degree monomials; both start
    with the constant, orthonormalized in the local product.
    """
    candidates = [
        space.interpolate(lambda x, y, a=a, b=b: np.asarray(x, dtype=float) ** a * np.asarray(y, dtype=float) ** b)
        for a, b in _coarse_monomials(k_H, variant)
    ]
    bases = []
    for T in range(space.grid.n_coarse):
        sl = space.coarse_dof_range(T)
        basis = LocalReducedBasis(T=T, dof_slice=sl, vectors=np.empty((sl.stop - sl.start, 0)))
        for cand in candidates:
            basis, _ = extend_basis(basis, cand[sl], products[T], tol_rel)
        bases.append(basis)
    return bases


class ReducedSystem:
    """Block-sparse reduced operator: per-component local and coupling blocks.

    ``blocks[xi][(T, S)]`` projects the (T, S) dof block of component xi onto
    the subdomain bases; coupling blocks exist only for coarse neighbors.
    """

    def __init__(self, n_components, neighbors):
        self.n_components = n_components
        self.neighbors = neighbors
        self.blocks = [dict() for _ in range(n_components)]
        self.loads = {}
        self.sizes = {}

    @property
    def n_total(self):
        return sum(self.sizes.values())

    def offsets(self):
        n_coarse = len(self.sizes)
        off = np.zeros(n_coarse + 1, dtype=int)
        for T in range(n_coarse):
            off[T + 1] = off[T] + self.sizes[T]
        return off

    def matrix(self, thetas, dense=None):
        """theta-weighted reduced matrix, dense for small systems else CSR."""
        off = self.offsets()
        N = off[-1]
        if dense is None:
            dense = N <= 2000
        if dense:
            M = np.zeros((N, N))
            for th, comp in zip(thetas, self.blocks):
                for (T, S), blk in comp.items():
                    M[off[T]:off[T + 1], off[S]:off[S + 1]] += th * blk
            return M
        rows, cols, vals = [], [], []
        for th, comp in zip(thetas, self.blocks):
            for (T, S), blk in comp.items():
                r, c = np.nonzero(np.ones_like(blk))
                rows.append(r + off[T])
                cols.append(c + off[S])
                vals.append(th * blk.ravel())
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N, N)
        )

    def rhs(self):
        off = self.offsets()
        out = np.zeros(off[-1])
        for T, l in self.loads.items():
            out[off[T]:off[T + 1]] = l
        return out


def _project_blocks(rsys, sys, bases, Ts):
    """Recompute the local block, load and neighbor coupling blocks of the given Ts."""
    space = sys.space
    for xi, B in enumerate(sys.components):
        B = B.tocsr()
        for T in Ts:
            VT = bases[T].vectors
            slT = bases[T].dof_slice
            rsys.blocks[xi][(T, T)] = VT.T @ (B[slT.start:slT.stop, slT.start:slT.stop] @ VT)
            for S in rsys.neighbors[T]:
                VS = bases[S].vectors
                slS = bases[S].dof_slice
                rsys.blocks[xi][(T, S)] = VT.T @ (B[slT.start:slT.stop, slS.start:slS.stop] @ VS)
                rsys.blocks[xi][(S, T)] = VS.T @ (B[slS.start:slS.stop, slT.start:slT.stop] @ VT)
    for T in Ts:
        rsys.loads[T] = bases[T].vectors.T @ sys.load[bases[T].dof_slice]
        rsys.sizes[T] = bases[T].size


def assemble_reduced(sys, bases):
    """Project the detailed component operators onto the subdomain bases."""
    n_coarse = sys.space.grid.n_coarse
    if len(bases) != n_coarse:
        raise ValueError(f"need one basis per coarse element ({n_coarse}), got {len(bases)}")
    rsys = ReducedSystem(len(sys.components), sys.space.grid.coarse_neighbors)
    _project_blocks(rsys, sys, bases, range(n_coarse))
    return rsys


def update_reduced(rsys, sys, bases, changed):
    """Refresh only the blocks affected by extended subdomain bases."""
    _project_blocks(rsys, sys, bases, sorted(set(int(T) for T in changed)))
    return rsys


class SingularReducedSystem(RuntimeError):
    pass


def solve_reduced(rsys, lam, mu, rtol=1e-12, method="auto"):
    """Solve the theta-weighted reduced system to a relative residual <= rtol.

    Small systems go through a dense direct solve, larger ones through
    block-Jacobi preconditioned CG on the block-sparse matrix; ``method``
    ("auto", "dense", "sparse") overrides the size-based choice.
    """
    thetas = lam.thetas(mu)
    N = rsys.n_total
    rhs = rsys.rhs()
    off = rsys.offsets()
    dense = N <= 2000 if method == "auto" else method == "dense"
    M = rsys.matrix(thetas, dense=dense)
    try:
        if dense:
            coeffs = np.linalg.solve(M, rhs)
        else:
            inv_blocks = [
                np.linalg.inv(sum(th * comp[(T, T)] for th, comp in zip(thetas, rsys.blocks)))
                for T in range(len(rsys.sizes))
            ]

            def precond(x):
                out = np.empty_like(x)
                for T, inv in enumerate(inv_blocks):
                    out[off[T]:off[T + 1]] = inv @ x[off[T]:off[T + 1]]
                return out

            coeffs, info = spla.cg(M, rhs, rtol=rtol * 1e-2, atol=0.0,
                                   M=spla.LinearOperator(M.shape, matvec=precond),
                                   maxiter=50 * N)
            if info != 0:
                coeffs = spla.spsolve(M.tocsc(), rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularReducedSystem(_singular_message(rsys, thetas)) from exc
    res = np.linalg.norm((M @ coeffs) - rhs)
    ref = max(np.linalg.norm(rhs), 1e-300)
    if not np.isfinite(res) or res > rtol * ref:
        raise SingularReducedSystem(_singular_message(rsys, thetas))
    return coeffs


def _singular_message(rsys, thetas):
    worst, worst_cond = -1, -1.0
    for T in range(len(rsys.sizes)):
        blk = sum(th * comp[(T, T)] for th, comp in zip(thetas, rsys.blocks))
        cond = np.linalg.cond(blk)
        if cond > worst_cond:
            worst, worst_cond = T, cond
    return f"reduced system is singular; worst-conditioned subdomain block T={worst} (cond {worst_cond:.2e})"


def reconstruct(space, bases, coeffs):
    """Fine-grid representative sum_T sum_i c_i^T phi_i^T of reduced coefficients."""
    coeffs = np.asarray(coeffs, dtype=float)
    expected = sum(b.size for b in bases)
    if coeffs.shape[0] != expected:
        raise ValueError(f"coefficient layout mismatch: expected {expected}, got {coeffs.shape[0]}")
    out = np.zeros(space.n_dofs)
    pos = 0
    for b in bases:
        out[b.dof_slice] = b.vectors @ coeffs[pos:pos + b.size]
        pos += b.size
    return out


def split_coefficients(rsys, coeffs):
    off = rsys.offsets()
    return [coeffs[off[T]:off[T + 1]] for T in range(len(rsys.sizes))]


def grid_fingerprint(grid):
    key = repr((grid.domain, grid.coarse_dims, grid.fine_per_coarse)).encode()
    return hashlib.sha256(key).hexdigest()[:16]


def save_bases(directory, grid, bases, mu_bar):
    """Write per-subdomain basis matrices plus a manifest (grid hash, mu_bar, sizes)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lines = [
        f"grid_hash: {grid_fingerprint(grid)}",
        f"mu_bar: {' '.join(repr(v) for v in mu_bar)}",
        f"n_subdomains: {len(bases)}",
        "sizes: " + " ".join(str(b.size) for b in bases),
    ]
    (directory / "manifest.txt").write_text("\n".join(lines) + "\n")
    for b in bases:
        np.save(directory / f"basis_{b.T:04d}.npy", b.vectors)


def load_bases(directory, space, mu_bar=None):
    """Load bases written by :func:`save_bases`, verifying the manifest."""
    directory = Path(directory)
    manifest = {}
    for line in (directory / "manifest.txt").read_text().splitlines():
        key, _, value = line.partition(":")
        manifest[key.strip()] = value.strip()
    if manifest.get("grid_hash") != grid_fingerprint(space.grid):
        raise ValueError("basis directory was written for a different grid")
    if mu_bar is not None:
        stored = tuple(float(v) for v in manifest["mu_bar"].split())
        if stored != tuple(mu_bar):
            raise ValueError(f"basis directory was orthonormalized at mu_bar={stored}, not {tuple(mu_bar)}")
    bases = []
    for T in range(int(manifest["n_subdomains"])):
        vectors = np.load(directory / f"basis_{T:04d}.npy")
        bases.append(LocalReducedBasis(T=T, dof_slice=space.coarse_dof_range(T), vectors=vectors))
    return bases
