"""Preliminary-test and Stein-type almost unbiased Liu estimators for logistic regression."""

__version__ = "0.1.0"

from .errors import (
    ConfigurationError,
    DomainError,
    IngestionError,
    InputError,
    NonConvergenceError,
    NumericalError,
    PretestLiuError,
    SeparationError,
    ShapeError,
    SingularityError,
)
from .glm_core import Dataset, FittedModel, fit_mle, log_likelihood, predict_probabilities
from .restriction import LinearRestriction, TestResult, fit_rmle, wald_statistic
from .estimators import (
    KINDS,
    SHRINKAGE_KINDS,
    EstimatorResult,
    LiuOperator,
    build_liu_operator,
    d_optimum,
    estimate_all,
)
from .chi2_kernels import NoncentralChi2
from .asymptotics import (
    AsymptoticScenario,
    asymptotic_bias,
    asymptotic_covariance,
    asymptotic_quadratic_bias,
    asymptotic_risk,
    risk_curve,
    validate_against_oracle,
)
from .montecarlo import SimConfig, SimResult, run_simulation
from .heartcv import CvConfig, CvResult, load_dataset, run_cv
