"""Monotonicity-constrained proportional odds regression.

Ordinal predictors enter the cumulative logit model as dummy blocks whose
coefficients can be restricted to a monotone (isotonic or antitonic)
pattern. The package provides the constrained and unconstrained maximum
likelihood fits, a confidence-interval based classification of each
predictor's direction, a Bonferroni monotonicity test, strategies that
combine them, and a Monte Carlo harness comparing the strategies by MSE.
"""

__version__ = "0.1.0"

from .constraints import (  # noqa: F401
    ConstraintSet,
    Direction,
    build_constraints,
    is_feasible,
    monotone_project,
)
from .design import (  # noqa: F401
    CategoricalPredictor,
    DesignMatrix,
    ModelSchema,
    ParameterLayout,
    build_design,
    parameter_layout,
)
from .direction import (  # noqa: F401
    DirectionState,
    Label,
    MdcConfig,
    classify_at_level,
    mdc_step1,
    mdc_step2,
    mdc_step3,
)
from .errors import OrdmonoError  # noqa: F401
from .fitting import (  # noqa: F401
    FitResult,
    fit_constrained,
    fit_unconstrained,
    predictor_ci_bounds,
    wald_ci,
)
from .likelihood import (  # noqa: F401
    LikelihoodEvaluation,
    ParameterVector,
    category_probs,
    evaluate,
    loglik,
)
from .montest import MonotonicityTestResult, all_predictor_tests, monotonicity_test  # noqa: F401
from .simulate import (  # noqa: F401
    MseReport,
    NormalDist,
    ScenarioSpec,
    generate_dataset,
    run_study,
)
from .strategies import Strategy, StrategyConfig, StrategyOutcome, run_strategy  # noqa: F401
