"""The four estimation approaches.

umle            unconstrained fit only.
cmle            full direction classification (steps 1-3), then one
                constrained fit under the winning assignment.
cmle_bonferroni monotonicity test first; predictors whose test rejects are
                left unconstrained (kept at nominal scale) and the
                classification runs over the survivors.
cmle_filtered   step 1 acts as a filter: predictors labeled 'none' are left
                unconstrained and excluded from steps 2-3; only 'both'
                predictors are relaxed and enumerated.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping

from .constraints import Direction, build_constraints
from .design import DesignMatrix
from .direction import (
    DirectionState,
    Label,
    MdcConfig,
    mdc_step1,
    mdc_step2,
    mdc_step3,
)
from .fitting import FitResult, fit_constrained, fit_unconstrained
from .montest import (
    DEFAULT_ALPHA_STAR,
    MonotonicityTestResult,
    monotonicity_test,
)


class Strategy(str, enum.Enum):
    UMLE = "umle"
    CMLE = "cmle"
    CMLE_BONFERRONI = "cmle_bonferroni"
    CMLE_FILTERED = "cmle_filtered"


@dataclass(frozen=True)
class StrategyConfig:
    strategy: Strategy = Strategy.CMLE
    mdc: MdcConfig = field(default_factory=MdcConfig)
    alpha_star: float = DEFAULT_ALPHA_STAR
    # per-predictor overrides of the test level, by predictor name
    alpha_star_overrides: Mapping[str, float] = field(default_factory=dict)

    def alpha_for(self, predictor: str) -> float:
        return self.alpha_star_overrides.get(predictor, self.alpha_star)


@dataclass
class StrategyOutcome:
    """Final fit plus the full decision trace that produced it."""

    strategy: Strategy
    fit: FitResult
    umle: FitResult
    assignment: dict[str, Direction] | None = None
    state_step1: DirectionState | None = None
    state_step2: DirectionState | None = None
    state_final: DirectionState | None = None
    tests: list[MonotonicityTestResult] | None = None


def run_strategy(
    design: DesignMatrix,
    config: StrategyConfig,
    umle: FitResult | None = None,
) -> StrategyOutcome:
    """Run one estimation approach end to end.

    A precomputed unconstrained fit may be passed so several strategies on
    the same dataset share it.
    """
    schema = design.schema
    if umle is None:
        umle = fit_unconstrained(design)
    strategy = Strategy(config.strategy)
    if strategy is Strategy.UMLE:
        return StrategyOutcome(strategy=strategy, fit=umle, umle=umle)

    tests: list[MonotonicityTestResult] | None = None
    state1 = mdc_step1(umle, config.mdc)
    if strategy is Strategy.CMLE_BONFERRONI:
        tests = [
            monotonicity_test(umle, p.name, config.alpha_for(p.name))
            for p in schema.ordinal_predictors
        ]
        state1.excluded = frozenset(t.predictor for t in tests if t.reject)
    elif strategy is Strategy.CMLE_FILTERED:
        state1.excluded = frozenset(
            name for name, lab in state1.labels().items() if lab is Label.NONE
        )

    state2 = mdc_step2(umle, state1, config.mdc)
    tag = strategy.value
    assignment, fit3, state_final = mdc_step3(
        design, state2, schema, config.mdc, umle=umle, strategy_tag=tag
    )
    if fit3 is None:
        cs = build_constraints(schema, assignment)
        fit3 = fit_constrained(design, cs, strategy_tag=tag, umle=umle)
    return StrategyOutcome(
        strategy=strategy,
        fit=fit3,
        umle=umle,
        assignment=assignment,
        state_step1=state1,
        state_step2=state2,
        state_final=state_final,
        tests=tests,
    )


def run_all_strategies(
    design: DesignMatrix,
    strategies: tuple[Strategy, ...],
    mdc: MdcConfig,
    alpha_star: float = DEFAULT_ALPHA_STAR,
) -> dict[Strategy, StrategyOutcome]:
    """Run several strategies on one dataset, sharing the unconstrained fit."""
    umle = fit_unconstrained(design)
    out: dict[Strategy, StrategyOutcome] = {}
    for s in strategies:
        cfg = StrategyConfig(strategy=s, mdc=mdc, alpha_star=alpha_star)
        out[s] = run_strategy(design, cfg, umle=umle)
    return out
