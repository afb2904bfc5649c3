"""Parametric data functions: the affinely decomposed scalar mobility, the
piecewise-constant SPD diffusion tensor, the force field, the parameter box
and the norm-equivalence constants between parameters.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ParameterSpace",
    "AffineParametricScalar",
    "DiffusionTensor",
    "ForceField",
    "equivalence_constants",
    "theta_ratio_constants",
    "min_eigenvalue_over_parameters",
    "min_eigenvalues_per_coarse",
    "ingest_permeability",
]


def as_parameter(mu):
    """Canonical parameter representation: a tuple of floats."""
    if np.isscalar(mu):
        return (float(mu),)
    return tuple(float(v) for v in np.atleast_1d(mu))


@dataclass(frozen=True)
class ParameterSpace:
    """Box-shaped parameter domain with named sample lists."""

    bounds: tuple  # ((low, high), ...) per component
    training: tuple = ()
    online: tuple = ()

    def __post_init__(self):
        for lo, hi in self.bounds:
            if lo > hi:
                raise ValueError(f"empty parameter interval ({lo}, {hi})")

    @property
    def dim(self):
        return len(self.bounds)

    def contains(self, mu):
        mu = as_parameter(mu)
        return len(mu) == self.dim and all(
            lo - 1e-14 <= v <= hi + 1e-14 for v, (lo, hi) in zip(mu, self.bounds)
        )

    def vertices(self):
        """All corners of the parameter box."""
        corners = [()]
        for lo, hi in self.bounds:
            corners = [c + (v,) for c in corners for v in ((lo,) if lo == hi else (lo, hi))]
        return [as_parameter(c) for c in corners]

    def sample_uniform(self, n, rng):
        lo = np.array([b[0] for b in self.bounds])
        hi = np.array([b[1] for b in self.bounds])
        return [as_parameter(lo + (hi - lo) * rng.random(self.dim)) for _ in range(n)]


class _Component:
    """One non-parametric scalar component, analytic or constant per fine cell."""

    def __init__(self, spec):
        if callable(spec):
            self.func, self.values = spec, None
        else:
            self.func, self.values = None, np.asarray(spec, dtype=float)

    def at(self, points, cells):
        """Values at physical points owned by the given fine cells."""
        if self.func is not None:
            pts = np.asarray(points)
            return np.asarray(self.func(pts[..., 0], pts[..., 1]), dtype=float)
        return self.values[cells]

    def cell_values(self, grid):
        """Representative per-cell values (centroid evaluation for analytic data)."""
        if self.values is not None:
            return self.values
        cen = grid.centroids()
        return np.asarray(self.func(cen[:, 0], cen[:, 1]), dtype=float)


class AffineParametricScalar:
    """Scalar field lambda(x; mu) = sum_xi theta_xi(mu) * lambda_xi(x).

    Components are either closures ``f(x, y)`` on the domain or per-fine-cell
    constant arrays; coefficients are closures on the parameter tuple.  When a
    grid and a parameter box are supplied, strict positivity is checked over
    all fine cells at every box vertex.
    """

    def __init__(self, components, coefficients, grid=None, parameter_box=None):
        if len(components) != len(coefficients):
            raise ValueError("need one coefficient per component")
        self.components = [_Component(c) for c in components]
        self.coefficients = list(coefficients)
        if grid is not None and parameter_box is not None:
            self.check_positive(grid, parameter_box)

    @property
    def n_components(self):
        return len(self.components)

    def thetas(self, mu):
        mu = as_parameter(mu)
        return np.array([float(th(mu)) for th in self.coefficients])

    def at(self, points, cells, mu):
        th = self.thetas(mu)
        out = th[0] * self.components[0].at(points, cells)
        for w, comp in zip(th[1:], self.components[1:]):
            out = out + w * comp.at(points, cells)
        return out

    def component_at(self, xi, points, cells):
        return self.components[xi].at(points, cells)

    def cell_values(self, grid, mu):
        th = self.thetas(mu)
        out = th[0] * self.components[0].cell_values(grid)
        for w, comp in zip(th[1:], self.components[1:]):
            out = out + w * comp.cell_values(grid)
        return out

    def check_positive(self, grid, parameter_box):
        for mu in parameter_box.vertices():
            vals = self.cell_values(grid, mu)
            if not np.all(vals > 0.0):
                raise ValueError(f"scalar data function is nonpositive at parameter {mu}")


def constant_scalar(value=1.0):
    """Nonparametric strictly positive scalar, as a one-component decomposition."""
    return AffineParametricScalar([lambda x, y, v=float(value): np.full_like(np.asarray(x, dtype=float), v)],
                                  [lambda mu: 1.0])


class DiffusionTensor:
    """Symmetric positive definite 2x2 tensor, constant on every fine cell."""

    def __init__(self, cell_tensors):
        k = np.asarray(cell_tensors, dtype=float)
        if k.ndim == 3 and k.shape[1:] == (2, 2):
            self.k11, self.k22, self.k12 = k[:, 0, 0], k[:, 1, 1], k[:, 0, 1]
            if not np.allclose(k[:, 0, 1], k[:, 1, 0]):
                raise ValueError("diffusion tensor must be symmetric")
        elif k.ndim == 2 and k.shape[1] == 3:
            self.k11, self.k22, self.k12 = k[:, 0], k[:, 1], k[:, 2]
        else:
            raise ValueError("expected (n, 2, 2) tensors or (n, 3) packed entries")
        tr = 0.5 * (self.k11 + self.k22)
        det = self.k11 * self.k22 - self.k12 ** 2
        disc = np.sqrt(np.maximum(tr ** 2 - det, 0.0))
        self.eig_min = tr - disc
        self.eig_max = tr + disc
        if not np.all(self.eig_min > 0.0):
            raise ValueError("diffusion tensor must be positive definite on every cell")

    @classmethod
    def identity(cls, grid):
        n = grid.n_triangles
        return cls(np.column_stack([np.ones(n), np.ones(n), np.zeros(n)]))

    @classmethod
    def isotropic(cls, values):
        v = np.asarray(values, dtype=float)
        return cls(np.column_stack([v, v, np.zeros_like(v)]))

    @property
    def n_cells(self):
        return self.k11.shape[0]

    def matrices(self, cells=None):
        """Dense (n, 2, 2) tensors, optionally restricted to the given cells."""
        k11, k22, k12 = self.k11, self.k22, self.k12
        if cells is not None:
            k11, k22, k12 = k11[cells], k22[cells], k12[cells]
        out = np.empty(k11.shape + (2, 2))
        out[..., 0, 0], out[..., 1, 1] = k11, k22
        out[..., 0, 1] = out[..., 1, 0] = k12
        return out

    def apply(self, cells, vectors):
        """kappa|_cell @ vector, broadcasting over leading axes."""
        vx, vy = vectors[..., 0], vectors[..., 1]
        return np.stack(
            [self.k11[cells] * vx + self.k12[cells] * vy,
             self.k12[cells] * vx + self.k22[cells] * vy],
            axis=-1,
        )

    def normal_diffusion(self, cells, normals):
        """delta = n . kappa n per (cell, normal) pair."""
        nx, ny = normals[..., 0], normals[..., 1]
        return self.k11[cells] * nx ** 2 + 2.0 * self.k12[cells] * nx * ny + self.k22[cells] * ny ** 2


@dataclass(frozen=True)
class ForceField:
    """Scalar source term, an analytic closure or constant per fine cell."""

    spec: object
    quadrature_degree: int = 4
    _component: _Component = field(init=False, repr=False, default=None)

    def __post_init__(self):
        object.__setattr__(self, "_component", _Component(self.spec))

    def at(self, points, cells):
        vals = self._component.at(points, cells)
        if not np.all(np.isfinite(vals)):
            raise ValueError("force field is not finite on the domain")
        return vals


def equivalence_constants(lam, mu, mu_ref, grid):
    """Tightest cellwise constants with alpha * lam(mu_ref) <= lam(mu) <= gamma * lam(mu_ref).

    Per-cell-constant components are compared cell by cell, analytic ones at
    cell centroids.  Both values are positive and alpha <= gamma.
    """
    v = lam.cell_values(grid, mu)
    v_ref = lam.cell_values(grid, mu_ref)
    if np.any(v <= 0.0) or np.any(v_ref <= 0.0):
        raise ValueError("scalar data function must be strictly positive at both parameters")
    ratio = v / v_ref
    return float(ratio.min()), float(ratio.max())


def theta_ratio_constants(lam, mu, mu_ref):
    """Coefficient-ratio bounds min/max theta_xi(mu)/theta_xi(mu_ref).

    Valid only for decompositions with strictly positive coefficients; for
    componentwise nonnegative data they bound the cellwise constants from
    outside.
    """
    th = lam.thetas(mu)
    th_ref = lam.thetas(mu_ref)
    if np.any(th <= 0.0) or np.any(th_ref <= 0.0):
        raise ValueError("coefficient-ratio constants need strictly positive coefficients")
    ratio = th / th_ref
    return float(ratio.min()), float(ratio.max())


def _cell_eig_min(lam, kappa, grid, mu, cells):
    return lam.cell_values(grid, mu)[cells] * kappa.eig_min[cells]


def min_eigenvalue_over_parameters(lam, kappa, grid, sample, scope):
    """Smallest eigenvalue of lam(mu) * kappa over the fine cells of one coarse element.

    The minimum over the parameter domain is taken over the given finite
    sample (nonempty), matching how the residual-estimator constant is built.
    """
    sample = list(sample)
    if not sample:
        raise ValueError("parameter sample must not be empty")
    cells = grid.coarse_tris[int(scope)]
    return min(float(_cell_eig_min(lam, kappa, grid, mu, cells).min()) for mu in sample)


def min_eigenvalues_per_coarse(lam, kappa, grid, sample):
    """Vectorized variant of :func:`min_eigenvalue_over_parameters` for all coarse elements."""
    sample = list(sample)
    if not sample:
        raise ValueError("parameter sample must not be empty")
    per_cell = np.full(grid.n_triangles, np.inf)
    for mu in sample:
        per_cell = np.minimum(per_cell, lam.cell_values(grid, mu) * kappa.eig_min)
    out = np.empty(grid.n_coarse)
    for T, cells in enumerate(grid.coarse_tris):
        out[T] = per_cell[cells].min()
    return out


def ingest_permeability(path, grid, layout):
    """Read an isotropic permeability field from a plain-text scalar file.

    The file holds ``cols * rows`` whitespace-separated positive scalars,
    row-major from the bottom-left cell of the domain; each fine triangle
    picks the value of the file cell containing its centroid.
    """
    cols, rows = (int(v) for v in layout)
    values = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            for token in line.split():
                try:
                    v = float(token)
                except ValueError:
                    raise ValueError(f"{path}:{lineno}: non-numeric token {token!r}") from None
                if not v > 0.0:
                    raise ValueError(f"{path}:{lineno}: nonpositive permeability value {v!r}")
                values.append(v)
    if len(values) != cols * rows:
        raise ValueError(
            f"{path}: expected {cols * rows} values for layout {cols}x{rows}, found {len(values)}"
        )
    field_vals = np.array(values).reshape(rows, cols)

    x0, y0, x1, y1 = grid.domain
    cen = grid.centroids()
    ci = np.clip(((cen[:, 0] - x0) / (x1 - x0) * cols).astype(int), 0, cols - 1)
    cj = np.clip(((cen[:, 1] - y0) / (y1 - y0) * rows).astype(int), 0, rows - 1)
    return DiffusionTensor.isotropic(field_vals[cj, ci])
