"""Constant-modulus DOA estimation via rank-constrained Hankel-Toeplitz recovery.

The pipeline: synthesize or load snapshots (``model``), solve the structured
recovery problem with ADMM (``solver``), pull angles/moduli/phases out of the
recovered Toeplitz parameter (``retrieval``), and benchmark against Root-MUSIC
(``baselines``) through the Monte Carlo harness (``harness``) or the CLI
(``cli``).
"""

from ._accel import HAS_NUMBA, numba_enabled
from .baselines import CovarianceEstimate, root_music, sample_covariance
from .harness import ExperimentSpec, MetricsRow, run_experiment, tightness_trials
from .model import (
    ArrayGeometry,
    Observation,
    Scenario,
    SourceEnsemble,
    add_noise,
    apply_mask,
    load_scenario,
    make_observation,
    random_ensemble,
    save_scenario,
    steering_matrix,
    steering_vector,
    synthesize,
    toeplitz_truth,
)
from .retrieval import (
    EstimationResult,
    estimate_parameters,
    match_rmse,
    matched_differences,
    recover_phases,
    resolved,
    vandermonde_decompose,
)
from .solver import (
    AdaptConfig,
    ProblemSpec,
    SolveReport,
    SolverConfig,
    SolverState,
    build_problem,
    solve,
)
from .structured import (
    assemble_block,
    hankel_adjoint,
    hankel_lift,
    psd_rank_project,
    toeplitz_adjoint,
    toeplitz_lift,
    weight_diagonals,
)

__version__ = "0.1.0"
