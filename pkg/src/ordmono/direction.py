"""Monotonicity direction classification for ordinal predictors.

Each predictor's direction is read off pairwise comparisons of Wald
confidence intervals from an unconstrained fit: a pair of categories
separates upward (+1) when the higher category's interval lies fully above
the lower one's, downward (-1) in the opposite case, and overlaps count 0.
The distinct indicator values classify the predictor as isotonic,
antitonic, compatible with both directions, or with none.

The three-step procedure: classify everything at an initial confidence
level; walk the level down (for 'both') or up (for 'none') per predictor
until a direction emerges or a tolerance bound is hit; exhaustively fit
the remaining direction combinations and keep the best likelihood.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field

import numpy as np

from .constraints import Direction, build_constraints
from .design import DesignMatrix, ModelSchema
from .errors import CombinationCapExceededError
from .fitting import FitResult, fit_constrained, predictor_ci_bounds


class Label(str, enum.Enum):
    ISOTONIC = "isotonic"
    ANTITONIC = "antitonic"
    BOTH = "both"
    NONE = "none"


_RESOLVED = (Label.ISOTONIC, Label.ANTITONIC)

_LABEL_TO_DIRECTION = {
    Label.ISOTONIC: Direction.ISOTONIC,
    Label.ANTITONIC: Direction.ANTITONIC,
}


@dataclass(frozen=True)
class PairIndicator:
    """Relative position of the CIs of categories p > p_prime (1-based)."""

    predictor: str
    p: int
    p_prime: int
    value: int


@dataclass(frozen=True)
class MdcConfig:
    """Confidence levels driving the classification walk.

    c_initial is the step-1 level; step-2 walks run from there down to
    c_lower_tol (for 'both') or up to c_upper_tol (for 'none') in `step`
    increments. max_step3 bounds how many unresolved predictors step 3
    will enumerate (2**max_step3 fits).
    """

    c_initial: float = 0.90
    c_lower_tol: float = 0.85
    c_upper_tol: float = 0.999
    step: float = 0.01
    max_step3: int = 12

    def __post_init__(self):
        if not (0.0 < self.c_lower_tol < self.c_initial < self.c_upper_tol < 1.0):
            raise ValueError(
                "need 0 < c_lower_tol < c_initial < c_upper_tol < 1, got "
                f"{self.c_lower_tol}, {self.c_initial}, {self.c_upper_tol}"
            )
        if self.step <= 0.0:
            raise ValueError("step must be positive")


@dataclass(frozen=True)
class PredictorDecision:
    label: Label
    decided_at: float
    decided_in_step: int


@dataclass(frozen=True)
class FlipEvent:
    """A transient both<->none change seen during a step-2 walk (not acted on)."""

    predictor: str
    level: float
    from_label: Label
    to_label: Label


@dataclass(frozen=True)
class Step3Candidate:
    directions: tuple[tuple[str, Direction], ...]
    loglik: float


@dataclass(frozen=True)
class Step3Trace:
    candidates: tuple[Step3Candidate, ...]
    chosen: int

    @property
    def n_fits(self) -> int:
        return len(self.candidates)


@dataclass
class DirectionState:
    """Per-predictor labels plus the full decision trace."""

    decisions: dict[str, PredictorDecision]
    excluded: frozenset[str] = frozenset()
    flips: tuple[FlipEvent, ...] = ()
    levels_tried: dict[str, tuple[tuple[float, Label], ...]] = field(default_factory=dict)
    step3: Step3Trace | None = None

    def labels(self) -> dict[str, Label]:
        return {name: d.label for name, d in self.decisions.items()}

    def unresolved(self) -> list[str]:
        return [
            name
            for name, d in self.decisions.items()
            if d.label not in _RESOLVED and name not in self.excluded
        ]

    def all_resolved(self) -> bool:
        return not self.unresolved()

    def copy(self) -> "DirectionState":
        return DirectionState(
            decisions=dict(self.decisions),
            excluded=self.excluded,
            flips=self.flips,
            levels_tried=dict(self.levels_tried),
            step3=self.step3,
        )

    def direction_assignment(self) -> dict[str, Direction]:
        """Directions for constraint building; unresolved or excluded
        predictors map to unconstrained."""
        out: dict[str, Direction] = {}
        for name, d in self.decisions.items():
            if name in self.excluded or d.label not in _RESOLVED:
                out[name] = Direction.UNCONSTRAINED
            else:
                out[name] = _LABEL_TO_DIRECTION[d.label]
        return out


def indicators_from_bounds(predictor: str, bounds: np.ndarray) -> list[PairIndicator]:
    """All q(q-1)/2 pairwise indicators from per-category CI bounds.

    `bounds` has one (lower, upper) row per category, the baseline row
    being [0, 0]. Comparisons are non-strict; a full-above tie counts +1.
    """
    q = bounds.shape[0]
    out: list[PairIndicator] = []
    for p in range(2, q + 1):
        lo_p, up_p = bounds[p - 1]
        for p_prime in range(1, p):
            lo_q, up_q = bounds[p_prime - 1]
            if lo_p >= up_q:
                value = 1
            elif up_p <= lo_q:
                value = -1
            else:
                value = 0
            out.append(PairIndicator(predictor, p, p_prime, value))
    return out


def label_from_indicators(indicators: list[PairIndicator]) -> Label:
    values = {ind.value for ind in indicators}
    if {-1, 1} <= values:
        return Label.NONE
    if values == {0}:
        return Label.BOTH
    if 1 in values:
        return Label.ISOTONIC
    return Label.ANTITONIC


def pair_indicators(fit: FitResult, predictor: str, level: float) -> list[PairIndicator]:
    bounds = predictor_ci_bounds(fit, predictor, level)
    return indicators_from_bounds(predictor, bounds)


def classify_at_level(fit: FitResult, predictor: str, level: float) -> Label:
    """Four-outcome direction classification at one confidence level."""
    return label_from_indicators(pair_indicators(fit, predictor, level))


def mdc_step1(fit: FitResult, config: MdcConfig) -> DirectionState:
    """Classify every ordinal predictor at the initial confidence level."""
    decisions: dict[str, PredictorDecision] = {}
    levels: dict[str, tuple[tuple[float, Label], ...]] = {}
    for pred in fit.layout.schema.ordinal_predictors:
        label = classify_at_level(fit, pred.name, config.c_initial)
        decisions[pred.name] = PredictorDecision(label, config.c_initial, 1)
        levels[pred.name] = ((config.c_initial, label),)
    return DirectionState(decisions=decisions, levels_tried=levels)


def _walk_levels(c0: float, bound: float, step: float, descending: bool) -> list[float]:
    levels: list[float] = []
    i = 1
    while True:
        x = round(c0 - i * step, 10) if descending else round(c0 + i * step, 10)
        past = (x <= bound + 1e-12) if descending else (x >= bound - 1e-12)
        if past:
            break
        levels.append(x)
        i += 1
    levels.append(round(bound, 10))
    return levels


def mdc_step2(fit: FitResult, state: DirectionState, config: MdcConfig) -> DirectionState:
    """Relax the confidence level per predictor until a direction emerges.

    'both' predictors walk down to c_lower_tol, 'none' predictors walk up
    to c_upper_tol; each stops at its first isotonic/antitonic label.
    Transient both<->none changes along the walk are logged, never acted
    on. Excluded predictors are skipped entirely.
    """
    state = state.copy()
    flips = list(state.flips)
    for pred in fit.layout.schema.ordinal_predictors:
        name = pred.name
        if name in state.excluded:
            continue
        start_label = state.decisions[name].label
        if start_label in _RESOLVED:
            continue
        descending = start_label is Label.BOTH
        bound = config.c_lower_tol if descending else config.c_upper_tol
        trace = list(state.levels_tried.get(name, ()))
        decided = False
        last_level = state.decisions[name].decided_at
        for level in _walk_levels(config.c_initial, bound, config.step, descending):
            label = classify_at_level(fit, name, level)
            trace.append((level, label))
            last_level = level
            if label in _RESOLVED:
                state.decisions[name] = PredictorDecision(label, level, 2)
                decided = True
                break
            if label is not start_label:
                flips.append(FlipEvent(name, level, start_label, label))
        if not decided:
            state.decisions[name] = PredictorDecision(start_label, last_level, 2)
        state.levels_tried[name] = tuple(trace)
    state.flips = tuple(flips)
    return state


def mdc_step3(
    design: DesignMatrix,
    state: DirectionState,
    schema: ModelSchema,
    config: MdcConfig,
    umle: FitResult | None = None,
    strategy_tag: str = "cmle",
) -> tuple[dict[str, Direction], FitResult | None, DirectionState]:
    """Exhaustive direction search over the still-unresolved predictors.

    Fits one constrained model per combination of directions for the
    unresolved predictors (resolved ones keep their labels, excluded ones
    stay unconstrained) and keeps the highest log-likelihood; ties keep
    the earlier combination in isotonic-first enumeration order. With no
    unresolved predictors this is an identity pass that fits nothing.
    """
    state = state.copy()
    unresolved = [
        p.name for p in schema.ordinal_predictors if p.name in state.unresolved()
    ]
    base = state.direction_assignment()
    if not unresolved:
        return base, None, state
    if len(unresolved) > config.max_step3:
        raise CombinationCapExceededError(
            f"{len(unresolved)} unresolved predictors exceed the step-3 cap of "
            f"{config.max_step3} (would need {2 ** len(unresolved)} fits)"
        )
    best_fit: FitResult | None = None
    best_assignment: dict[str, Direction] | None = None
    best_index = -1
    candidates: list[Step3Candidate] = []
    for idx, combo in enumerate(
        itertools.product((Direction.ISOTONIC, Direction.ANTITONIC), repeat=len(unresolved))
    ):
        assignment = dict(base)
        assignment.update(zip(unresolved, combo))
        cs = build_constraints(schema, assignment)
        fit = fit_constrained(design, cs, strategy_tag=strategy_tag, umle=umle)
        candidates.append(Step3Candidate(tuple(zip(unresolved, combo)), fit.loglik))
        if best_fit is None or fit.loglik > best_fit.loglik:
            best_fit, best_assignment, best_index = fit, assignment, idx
    state.step3 = Step3Trace(tuple(candidates), best_index)
    for name in unresolved:
        chosen = best_assignment[name]
        label = Label.ISOTONIC if chosen is Direction.ISOTONIC else Label.ANTITONIC
        prev = state.decisions[name]
        state.decisions[name] = PredictorDecision(label, prev.decided_at, 3)
    return best_assignment, best_fit, state
