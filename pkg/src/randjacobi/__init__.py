"""Spectral measures of Jacobi operators with random potentials.

Finite Jacobi matrices, their fundamental solutions and spectral measures,
and seeded Monte Carlo checks of almost-sure spectral statements.
"""

from .eigensolve import EigenDecomposition, eigendecompose, eigenvalues, sturm_count
from .errors import (
    ConfigError,
    ConvergenceFailure,
    CoverageError,
    InvalidSpec,
    JacobiError,
    LengthMismatch,
    NonPositiveOffDiagonal,
    NotContained,
    NullAtom,
    RangeError,
    ZeroVector,
)
from .experiments import (
    ExperimentConfig,
    carleman_partial_sums,
    run_atom_probability,
    run_collision,
    run_counterexample,
    run_equivalence,
    run_experiment,
    run_sum_equivalence,
)
from .measures import (
    AtomicMeasure,
    MatrixMeasure,
    RNMatrix,
    absolutely_continuous,
    check_semiinfinite_relation,
    equivalent,
    g_factor,
    matrix_measure,
    relation_reports,
    rn_matrix,
    site_measure,
    spectral_measure,
)
from .operator import (
    IndexInterval,
    JacobiOperator,
    apply,
    basis_vector,
    build_operator,
    free_operator,
    submatrix,
)
from .polynomials import (
    SolutionPair,
    evaluate_poly_at_operator,
    fundamental_solutions,
    reconstruct_delta,
    s_polynomial_zeros,
    solutions_at_eigenvalues,
    wronskian,
)
from .randomness import (
    DistributionSpec,
    PotentialModel,
    SeededSampler,
    cantor_cdf,
    sample_potential,
    sample_value,
)

__version__ = "0.1.0"
