"""Cost-driven state representation learning for linear quadratic Gaussian control."""

from .control_eval import Policy, evaluate_analytic, evaluate_rollout, plan
from .diagnostics import latent_errors, pe_curve, procrustes_align, quadform_lb_mc
from .estimator import CostDrivenLQG
from .exceptions import (
    ArgumentError,
    CorelError,
    InstabilityError,
    InsufficientDataError,
    NonConvergenceError,
    ObservabilityError,
    PlanningError,
    RefusalError,
)
from .latent_id import LatentModel, cosysid, learn_cost, sysid_explicit
from .lqg import LqgModel, check_assumptions, normalize_model, optimal_average_cost, solve_dare
from .pipeline import RunConfig, RunRecord, load_model, reference_model_path, run_corel, run_sweep
from .repr_learn import discover_rank, factor_psd, quadratic_regress
from .simulate import Trajectory, build_histories, rollout_excite

__version__ = "0.1.0"
