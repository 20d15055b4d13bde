"""Bonferroni monotonicity test for one ordinal predictor.

Tests whether the predictor's coefficients are compatible with a single
monotonic direction (the null) by building each category's confidence
interval at the individual level 1 - alpha_star / (q - 1), so the set of
intervals holds jointly with confidence at least 1 - alpha_star. The null
is rejected only when the pairwise indicators separate in both directions
at once.
"""

from __future__ import annotations

from dataclasses import dataclass

from .direction import PairIndicator, pair_indicators
from .errors import InputError
from .fitting import FitResult

DEFAULT_ALPHA_STAR = 0.05


@dataclass(frozen=True)
class MonotonicityTestResult:
    predictor: str
    alpha_star: float
    b_level: float
    reject: bool
    witness: tuple[PairIndicator, PairIndicator] | None

    @property
    def decision(self) -> str:
        return "reject" if self.reject else "not_reject"


def monotonicity_test(
    fit: FitResult, predictor: str, alpha_star: float = DEFAULT_ALPHA_STAR
) -> MonotonicityTestResult:
    """Test H0: the predictor's coefficients are isotonic or antitonic.

    Rejection needs both a +1 and a -1 pairwise indicator at the
    Bonferroni-adjusted level; with q = 2 there is a single interval and
    the test can never reject. On rejection, `witness` carries the first
    conflicting pair of indicators.
    """
    if not (0.0 < alpha_star < 1.0):
        raise InputError(f"alpha_star must be in (0, 1), got {alpha_star}")
    pred = next(
        (p for p in fit.layout.schema.ordinal_predictors if p.name == predictor), None
    )
    if pred is None:
        raise InputError(f"{predictor!r} is not an ordinal predictor of the model")
    b_level = 1.0 - alpha_star / (pred.n_levels - 1)
    indicators = pair_indicators(fit, predictor, b_level)
    values = {ind.value for ind in indicators}
    reject = {-1, 1} <= values
    witness = None
    if reject:
        up = next(ind for ind in indicators if ind.value == 1)
        down = next(ind for ind in indicators if ind.value == -1)
        witness = (up, down)
    return MonotonicityTestResult(
        predictor=predictor,
        alpha_star=alpha_star,
        b_level=b_level,
        reject=reject,
        witness=witness,
    )


def all_predictor_tests(
    fit: FitResult, alpha_star: float = DEFAULT_ALPHA_STAR
) -> list[MonotonicityTestResult]:
    """Run the monotonicity test on every ordinal predictor."""
    return [
        monotonicity_test(fit, p.name, alpha_star)
        for p in fit.layout.schema.ordinal_predictors
    ]
