"""Two-level SWIPDG solver with a conservative-flux a-posteriori error
estimator and a localized reduced-basis layer with adaptive online enrichment.
"""

from .data import (
    AffineParametricScalar,
    DiffusionTensor,
    ForceField,
    ParameterSpace,
    equivalence_constants,
    ingest_permeability,
    min_eigenvalue_over_parameters,
)
from .enrich import EnrichmentLog, MarkingStrategy, enrich_online, greedy_offline, mark, solve_oversampled
from .estimate import EstimatorReport, estimate, eta_df, eta_nc, eta_r, eta_total, local_indicators
from .grid import TwoLevelGrid, build_two_level_grid, oversampling_patch
from .model import DetailedModel
from .problems import academic, channel, from_permeability_file
from .reconstruct import FluxField, divergence, oswald_interpolate, reconstruct_flux
from .reduction import (
    LocalReducedBasis,
    ReducedSystem,
    assemble_reduced,
    extend_basis,
    initialize_bases,
    reconstruct,
    solve_reduced,
)
from .swipdg import AssembledSystem, CoercivityError, DGSpace, assemble, assemble_patch, energy_norm, solve_detailed

__version__ = "0.1.0"
