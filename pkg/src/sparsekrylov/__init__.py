"""Matrix-free solvers for sparse-solution linear discrete ill-posed problems.

Restarted flexible Krylov methods with iterative refinement (plain and
solution-corrected restarts), the reweighted / hybrid / flexible baselines,
an inner-outer reweighting scheme, FISTA, and automatic selection of the
regularization parameter by the discrepancy principle.
"""

from .operators import (
    DenseOperator,
    IdentityOperator,
    LinearOperator,
    apply,
    apply_adjoint,
    make_gaussian_blur_1d,
    make_gaussian_blur_2d,
    make_tomography,
)
from .problems import (
    TestProblem,
    add_noise,
    blur2d_problem,
    ct_problem,
    relative_error,
    shepp_logan,
    spectra_problem,
    spectra_signal,
    star_field,
)
from .projected import (
    ProjectedProblem,
    discrepancy_lambda,
    economic_qr,
    optimal_lambda,
    projected_residual_norm,
    solve_projected,
)
from .krylov import (
    BreakdownError,
    CorrectedRestartDegenerate,
    FlexibleArnoldiState,
    FlexibleGolubKahanState,
    corrected_restart,
    fa_init,
    fa_step,
    fgk_init,
    fgk_step,
    plain_restart,
)
from .regularization import (
    RegOperator,
    WeightVector,
    apply_priorconditioner,
    apply_weighted_reg,
    irn_weights,
)
from .solvers import (
    ALL_METHODS,
    RunHistory,
    SolverConfig,
    functional_T,
    restart_criterion,
    solve,
    solve_cir,
    solve_fista,
    solve_flexible,
    solve_hybrid_flexible,
    solve_hybrid_standard,
    solve_ir,
    solve_irn_inner_outer,
    solve_irw,
)

__version__ = "0.1.0"
