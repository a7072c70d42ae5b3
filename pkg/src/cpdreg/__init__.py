"""Nonrigid point-set registration by coherent point drift with an eigenbasis M-step."""

from .correspondence import Correspondence, GmmParams, enforce_row_constraint, estimated_targets, posterior
from .degradations import (
    DegradedPair,
    GroundTruth,
    add_noise,
    add_outliers,
    occlude,
    synth_deform,
    synthetic_cloud,
)
from .errors import CPDRegError, NumericError, ParameterError
from .kernel import GramKernel, SpectralBasis, build_gram, eigendecompose, lowrank_reconstruction_error
from .metrics import BenchRecord, rmse, run_benchmark
from .pointset import NormalizationRecord, load_points, normalize_pair, write_points
from .registration import RegistrationConfig, RegistrationResult, init_sigma2, register
from .solvers import (
    SolverVariant,
    apply_transform,
    apply_transform_lowrank,
    solve_cpd_baseline,
    solve_fast,
    solve_fast_lowrank,
    update_sigma2,
)
from .timing import TimingBreakdown

__version__ = "0.1.0"
