"""perfpred: stochastic optimization when deploying a model changes the data.

The library models decision-dependent data distributions over finite
supports (``shiftmaps``), trains against them with greedy or lazy deployment
schedules (``optim``), measures how close an iterate is to performative
stationarity (``sps_measure``), and checks the ingredients of the analysis
numerically (``diagnostics``).  ``datasets`` covers synthetic generation and
CSV ingestion; the ``perfpred`` CLI drives config-based sweeps.
"""

from .datasets import (
    BaseDataset,
    CsvSchema,
    Sample,
    SyntheticSpec,
    gen_synthetic,
    load_csv,
    relabel,
    save_csv,
    split,
)
from .diagnostics import (
    DescentReport,
    SensitivityReport,
    descent_check,
    estimate_loss_lipschitz,
    estimate_sigma,
    estimate_smoothness,
    sensitivity_check,
    w1_discrete,
)
from .models import (
    LinearSigmoidModel,
    MlpBceModel,
    MlpLayout,
    accuracy,
)
from .numkit import RngStream, Vec, as_vec, fd_gradient, rng_fork
from .optim import (
    Constant,
    Greedy,
    InvSqrtT,
    Lazy,
    LazyInvSqrtT,
    RunConfig,
    Trajectory,
    TrajectoryPoint,
    run_exact_gradient,
    run_greedy,
    run_lazy,
    schedule_gamma,
)
from .shiftmaps import (
    BestResponseShiftMap,
    LocationShiftMap,
    decoupled_grad_exact,
    decoupled_grad_mc,
    decoupled_risk_exact,
    draw_minibatch,
    sps_measure,
    support,
)

__version__ = "0.1.0"

__all__ = [
    "BaseDataset", "CsvSchema", "Sample", "SyntheticSpec",
    "gen_synthetic", "load_csv", "relabel", "save_csv", "split",
    "DescentReport", "SensitivityReport", "descent_check",
    "estimate_loss_lipschitz", "estimate_sigma", "estimate_smoothness",
    "sensitivity_check", "w1_discrete",
    "LinearSigmoidModel", "MlpBceModel", "MlpLayout", "accuracy",
    "RngStream", "Vec", "as_vec", "fd_gradient", "rng_fork",
    "Constant", "Greedy", "InvSqrtT", "Lazy", "LazyInvSqrtT",
    "RunConfig", "Trajectory", "TrajectoryPoint",
    "run_exact_gradient", "run_greedy", "run_lazy", "schedule_gamma",
    "BestResponseShiftMap", "LocationShiftMap",
    "decoupled_grad_exact", "decoupled_grad_mc", "decoupled_risk_exact",
    "draw_minibatch", "sps_measure", "support",
]
