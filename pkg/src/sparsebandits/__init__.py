"""Sparse contextual bandit simulation library."""

__version__ = "0.1.0"

from .links import LINEAR, LOGISTIC, Link, get_link  # noqa: F401
from .estimator import (  # noqa: F401
    LassoProblem,
    LassoSolution,
    OnlineLinearLasso,
    fit_lasso,
    lambda_schedule,
    neg_log_likelihood,
    nll_gradient,
    soft_threshold,
)
from .contexts import (  # noqa: F401
    ContextSet,
    DistributionSpec,
    ModelSpec,
    best_arm,
    expected_reward,
    make_elliptical_spec,
    make_model,
    make_parameter,
    sample_context_features,
    sample_context_set,
    sample_reward,
)
from .policies import (  # noqa: F401
    DRLassoBandit,
    ForcedSampleLassoBandit,
    OraclePolicy,
    Policy,
    RandomPolicy,
    SALassoBandit,
    default_lambda0,
    forced_sample_times,
)
from .diagnostics import (  # noqa: F401
    BalancedCovReport,
    BernsteinReport,
    ConcentrationReport,
    ConeSample,
    GramEstimate,
    OracleInequalityReport,
    check_bernstein_adapted,
    check_matrix_concentration,
    check_oracle_inequality,
    compatibility_constant,
    estimate_balanced_covariance_constant,
    oracle_bound,
)
from .harness import (  # noqa: F401
    ExperimentConfig,
    RegretTrace,
    run_experiment,
    summarize,
    write_results,
)
