"""Wagner-style discrete Gaussian sampling and solving for SIS lattices."""

from .errors import (
    BadDimensions,
    BlockSumMismatch,
    BudgetExceeded,
    DimensionMismatch,
    Infeasible,
    InfeasibleSchedule,
    InsufficientInputs,
    InsufficientSamples,
    NonInvertiblePivot,
    NotInLattice,
    PreconditionViolated,
    RankDeficient,
    WagnerSisError,
    WidthTooSmall,
)
from .zqlin import (
    SisInstance,
    Solution,
    lambda1_inf_bruteforce,
    matvec_mod,
    permute_solution_back,
    random_instance,
    systematic_form,
)
from .dgauss import (
    GaussParam,
    SimilarityBudget,
    empirical_similarity,
    eta_qary_bound,
    eta_zn_bound,
    lambda1_inf_lower_bound,
    min_entropy_bound,
    pmf_bruteforce,
    rho_bruteforce,
    sample_z,
    sample_zn,
    tail_bound_linf,
)
from .chain import StagedVector, StageDescriptor, build_chain, coset_label, dglift, lift_integer
from .wagner import (
    MODE_HEURISTIC,
    MODE_NAIVE,
    MODE_PROVABLE,
    RunStats,
    Schedule,
    bucket_and_combine,
    certify_smoothing,
    choose_heuristic_params,
    choose_naive_params,
    choose_provable_params,
    gaussian_wagner,
    naive_wagner,
)
from .solvers import SolveReport, solve_sis_inf, solve_sis_l2, verify
from .estimator import CostQuery, CostReport, dilithium_presets, estimate, min_weight

__version__ = "0.1.0"
