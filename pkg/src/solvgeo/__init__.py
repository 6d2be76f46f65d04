"""Left-invariant geometry of Lie groups from structure constants.

Ricci curvature and moment maps, stratum labels beta, nilsolitons, rank-one
Einstein extensions and a discrete modified Helmholtz solver.
"""

from .lie import LieAlgebra, load_algebra, parse_algebra
from .curvature import ricci, scalar_curvature
from .beta import beta_label, einstein_nilradical_criterion
from .soliton import nilsoliton_flow, nilsoliton_from_nice, soliton_residual
from .extension import einstein_extension, einstein_residual, rank_one_invariants
from .helmholtz import build_torus_grid, helmholtz_decompose

__version__ = "0.1.0"
