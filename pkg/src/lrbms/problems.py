"""Built-in problem definitions: the smooth academic example on [-1, 1]^2 and
a desk-scale heterogeneous channel problem on [0, 5] x [0, 1] with a
parameter-toggled high-conductivity segment.
"""

import numpy as np

from .data import (
    AffineParametricScalar,
    DiffusionTensor,
    ForceField,
    ParameterSpace,
    ingest_permeability,
)

__all__ = ["Problem", "academic", "channel", "from_permeability_file"]


class Problem:
    """Domain, parametric data functions and (optional) exact solution.

    The data functions may depend on the fine grid (per-cell fields), so they
    are built per grid via :meth:`data_on`.
    """

    def __init__(self, name, domain, parameter_space, lam_builder, kappa_builder,
                 force, exact_solution=None, exact_gradient=None):
        self.name = name
        self.domain = domain
        self.parameter_space = parameter_space
        self._lam_builder = lam_builder
        self._kappa_builder = kappa_builder
        self.force = force
        self.exact_solution = exact_solution
        self.exact_gradient = exact_gradient

    def data_on(self, grid):
        """(lam, kappa, force) realized on the given grid, positivity-checked."""
        lam = self._lam_builder(grid)
        lam.check_positive(grid, self.parameter_space)
        return lam, self._kappa_builder(grid), self.force


def academic():
    """Smooth single-parameter diffusion problem on [-1, 1]^2.

    The diffusion is lambda(mu) * id with
    lambda(x, y; mu) = 1 + (1 - mu) cos(pi x / 2) cos(pi y / 2) over
    mu in [0.1, 1]; for mu = 1 the exact solution is
    cos(pi x / 2) cos(pi y / 2).
    """

    def bump(x, y):
        return np.cos(0.5 * np.pi * x) * np.cos(0.5 * np.pi * y)

    def force(x, y):
        return 0.5 * np.pi ** 2 * bump(x, y)

    def exact_gradient(x, y):
        gx = -0.5 * np.pi * np.sin(0.5 * np.pi * x) * np.cos(0.5 * np.pi * y)
        gy = -0.5 * np.pi * np.cos(0.5 * np.pi * x) * np.sin(0.5 * np.pi * y)
        return np.stack([gx, gy], axis=-1)

    space = ParameterSpace(bounds=((0.1, 1.0),))
    lam_builder = lambda grid: AffineParametricScalar(
        [lambda x, y: np.ones_like(np.asarray(x, dtype=float)), bump],
        [lambda mu: 1.0, lambda mu: 1.0 - mu[0]],
    )
    return Problem(
        name="academic",
        domain=(-1.0, -1.0, 1.0, 1.0),
        parameter_space=space,
        lam_builder=lam_builder,
        kappa_builder=DiffusionTensor.identity,
        force=ForceField(force),
        exact_solution=bump,
        exact_gradient=exact_gradient,
    )


_CHANNEL_Y = (0.475, 0.525)
_SEGMENT_X = (2.5, 4.0)


def channel(contrast=1e3):
    """Heterogeneous channel problem on [0, 5] x [0, 1].

    The permeability is 1 outside a horizontal channel of the given contrast;
    the parameter scales the mobility on a segment of the channel so that
    mu = 1 keeps the segment conductive and mu = 0.1 shuts it down to
    background level.  One source and two sinks drive the flow.
    """
    lam_seg = (1.0 / contrast - 1.0) / 0.9

    def in_channel(x, y):
        return (y >= _CHANNEL_Y[0]) & (y <= _CHANNEL_Y[1])

    def in_segment(x, y):
        return in_channel(x, y) & (x >= _SEGMENT_X[0]) & (x <= _SEGMENT_X[1])

    def kappa_builder(grid):
        cen = grid.centroids()
        vals = np.where(in_channel(cen[:, 0], cen[:, 1]), contrast, 1.0)
        return DiffusionTensor.isotropic(vals)

    def lam_builder(grid):
        cen = grid.centroids()
        lam_c = np.where(in_segment(cen[:, 0], cen[:, 1]), lam_seg, 0.0)
        return AffineParametricScalar(
            [lambda x, y: np.ones_like(np.asarray(x, dtype=float)), lam_c],
            [lambda mu: 1.0, lambda mu: 1.0 - mu[0]],
        )

    def force(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        src = (x >= 0.95) & (x <= 1.10) & (y >= 0.30) & (y <= 0.45)
        sink1 = (x >= 3.00) & (x <= 3.15) & (y >= 0.75) & (y <= 0.90)
        sink2 = (x >= 4.25) & (x <= 4.40) & (y >= 0.25) & (y <= 0.40)
        return 2e3 * src - 1e3 * (sink1 | sink2)

    return Problem(
        name="channel",
        domain=(0.0, 0.0, 5.0, 1.0),
        parameter_space=ParameterSpace(bounds=((0.1, 1.0),)),
        lam_builder=lam_builder,
        kappa_builder=kappa_builder,
        force=ForceField(force),
    )


def from_permeability_file(path, layout, domain=(0.0, 0.0, 5.0, 1.0)):
    """Nonparametric problem with an isotropic permeability read from a file."""
    return Problem(
        name="permeability_file",
        domain=tuple(float(v) for v in domain),
        parameter_space=ParameterSpace(bounds=((1.0, 1.0),)),
        lam_builder=lambda grid: AffineParametricScalar(
            [lambda x, y: np.ones_like(np.asarray(x, dtype=float))], [lambda mu: 1.0]
        ),
        kappa_builder=lambda grid: ingest_permeability(path, grid, layout),
        force=ForceField(lambda x, y: np.ones_like(np.asarray(x, dtype=float))),
    )
