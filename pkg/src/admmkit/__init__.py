"""ADMM solvers for graph-guided fused lasso and a convergence benchmark.

Two families of solvers for ``min (1/n) sum_i loss_i(x) + psi(y)`` subject
to ``A x + B y = c``: gradient-averaging stochastic rules whose ergodic
averages converge at the batch O(1/T) rate at single-sample cost, plus the
classic stochastic (decaying-stepsize) and full-gradient baselines they
are measured against. The bench module reproduces objective-versus-passes
comparisons and checks the convergence bounds empirically.
"""

from .exceptions import (
    AdmmKitError,
    ConfigError,
    DegenerateProblemError,
    DimensionError,
    NumericalError,
    ParseError,
    TuningError,
)
from .linalg import (
    MAX_DENSE_DIM,
    CachedSpdSolver,
    SparseMat,
    SpectralCache,
    build_spd_solver,
    power_iter_bound,
    spmv,
    sym_eig,
)
from .problems import (
    LOGISTIC,
    SQUARE,
    LossSpec,
    Problem,
    Sample,
    SmoothnessInfo,
    estimate_L,
    full_objective,
    loss_value_grad,
    prox_l1,
)
from .updaters import (
    METHODS,
    SWEEP_METHODS,
    GradientMemory,
    RdaState,
    UpdaterSpec,
)
from .engine import (
    BoundReport,
    RunResult,
    RunTrace,
    dual_update,
    run,
    solve_reference,
    theorem_bound_report,
    y_update,
)
from .graphs import (
    FeatureGraph,
    chain_graph,
    correlation_graph,
    penalty_matrix,
    random_graph,
)
from .dataio import RunConfig, parse_config, parse_libsvm, split_train_test
from .bench import (
    SweepResult,
    TuneProtocol,
    emit_svg,
    run_sweep,
    synthetic_benchmark,
    tune_stepsize,
)
from .estimators import GraphFusedLassoClassifier, GraphFusedLassoRegressor

__version__ = "0.1.0"

__all__ = [
    "AdmmKitError", "ConfigError", "DegenerateProblemError", "DimensionError",
    "NumericalError", "ParseError", "TuningError",
    "MAX_DENSE_DIM", "CachedSpdSolver", "SparseMat", "SpectralCache",
    "build_spd_solver", "power_iter_bound", "spmv", "sym_eig",
    "LOGISTIC", "SQUARE", "LossSpec", "Problem", "Sample", "SmoothnessInfo",
    "estimate_L", "full_objective", "loss_value_grad", "prox_l1",
    "METHODS", "SWEEP_METHODS", "GradientMemory", "RdaState", "UpdaterSpec",
    "BoundReport", "RunResult", "RunTrace", "dual_update", "run",
    "solve_reference", "theorem_bound_report", "y_update",
    "FeatureGraph", "chain_graph", "correlation_graph", "penalty_matrix",
    "random_graph",
    "RunConfig", "parse_config", "parse_libsvm", "split_train_test",
    "SweepResult", "TuneProtocol", "emit_svg", "run_sweep",
    "synthetic_benchmark", "tune_stepsize",
    "GraphFusedLassoClassifier", "GraphFusedLassoRegressor",
]
