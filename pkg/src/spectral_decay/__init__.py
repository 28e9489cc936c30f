"""Functions of sums of non-Hermitian matrices by resolvent perturbation series.

The main entry points are re-exported here; see the submodules for details.
"""

from .bch import (
    BchParams,
    TransformPair,
    WPath,
    assemble_full_u,
    integrate_w_exact,
    integrate_w_series,
    integrate_w_truncated,
    parabolic_coords,
    second_order_residual,
    theta_zero_u,
)
from .linalg import (
    BiorthogonalSystem,
    KaonBasis,
    eig_biorthogonal,
    eigenvalues_2x2,
    expm,
    kaon_reciprocal,
)
from .propagator import (
    PerturbationProblem,
    TruncationReport,
    kaon_second_order,
    propagator_element,
    propagator_matrix,
)
from .residues import (
    Contour,
    PoleConfiguration,
    contour_resolvent,
    residue_exp_kernel,
    residue_sum,
    series_convergence_bound,
)

__version__ = "0.1.0"
