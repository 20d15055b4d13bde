"""Synthetic data generation and replicated strategy comparison.

A scenario fixes the schema, the generating parameters, the category
distributions of the categorical predictors, and normal distributions for
the numeric ones. Replicate r of a scenario with seed s draws from a
Philox counter-based stream keyed by (s, r), so replicates are independent
and reproducible regardless of execution order.
"""

from __future__ import annotations

from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .design import DesignMatrix, ModelSchema, _assemble, parameter_layout
from .direction import MdcConfig
from .errors import InputError, NumericError, TooManyFailuresError
from .likelihood import ParameterVector, category_prob_matrix
from .montest import DEFAULT_ALPHA_STAR, all_predictor_tests
from .strategies import Strategy, StrategyConfig, run_strategy
from .fitting import fit_unconstrained

ALL_STRATEGIES = (
    Strategy.UMLE,
    Strategy.CMLE,
    Strategy.CMLE_BONFERRONI,
    Strategy.CMLE_FILTERED,
)
MAX_FAILURE_FRACTION = 0.05


@dataclass(frozen=True)
class NormalDist:
    mean: float
    variance: float

    def __post_init__(self):
        if self.variance <= 0:
            raise InputError(f"variance must be positive, got {self.variance}")


@dataclass(frozen=True)
class ScenarioSpec:
    """Everything needed to simulate and refit one scenario."""

    name: str
    schema: ModelSchema
    true_params: ParameterVector
    category_probs: Mapping[str, tuple[float, ...]]
    numeric_dists: Mapping[str, NormalDist]
    n: int
    replicates: int
    seed: int
    strategies: tuple[Strategy, ...] = ALL_STRATEGIES
    mdc: MdcConfig = field(default_factory=MdcConfig)
    alpha_star: float = DEFAULT_ALPHA_STAR

    def __post_init__(self):
        if self.n < 1 or self.replicates < 1:
            raise InputError("n and replicates must be at least 1")
        layout = parameter_layout(self.schema)
        if self.true_params.alpha.size != layout.n_alpha:
            raise InputError(
                f"scenario declares {self.true_params.alpha.size} intercepts, "
                f"model needs {layout.n_alpha}"
            )
        if self.true_params.beta.size != layout.n_beta:
            raise InputError(
                f"scenario declares {self.true_params.beta.size} coefficients, "
                f"model needs {layout.n_beta}"
            )
        for pred in self.schema.ordinal_predictors + self.schema.nominal_predictors:
            probs = self.category_probs.get(pred.name)
            if probs is None:
                raise InputError(f"no category probabilities for predictor {pred.name!r}")
            if len(probs) != pred.n_levels:
                raise InputError(
                    f"predictor {pred.name!r} has {pred.n_levels} levels but "
                    f"{len(probs)} probabilities"
                )
            if abs(sum(probs) - 1.0) > 1e-12:
                raise InputError(f"probabilities for {pred.name!r} do not sum to 1")
        for name in self.schema.numeric_predictors:
            if name not in self.numeric_dists:
                raise InputError(f"no distribution for numeric predictor {name!r}")

    @classmethod
    def from_dict(cls, d: Mapping) -> "ScenarioSpec":
        schema = ModelSchema.from_dict(d["schema"])
        tp = d["true_params"]
        beta_parts: list[float] = []
        for pred in schema.ordinal_predictors + schema.nominal_predictors:
            vals = tp["beta"][pred.name]
            beta_parts.extend(float(v) for v in vals)
        for name in schema.numeric_predictors:
            beta_parts.append(float(tp["beta"][name]))
        params = ParameterVector(
            np.asarray([float(a) for a in tp["alpha"]]), np.asarray(beta_parts)
        )
        dists = {
            name: NormalDist(float(v["mean"]), float(v["variance"]))
            for name, v in d.get("numeric_dists", {}).items()
        }
        probs = {
            name: tuple(float(p) for p in v)
            for name, v in d.get("category_probs", {}).items()
        }
        mdc_cfg = MdcConfig(**d["mdc"]) if "mdc" in d else MdcConfig()
        strategies = tuple(
            Strategy(s) for s in d.get("strategies", [s.value for s in ALL_STRATEGIES])
        )
        return cls(
            name=str(d.get("name", "scenario")),
            schema=schema,
            true_params=params,
            category_probs=probs,
            numeric_dists=dists,
            n=int(d["n"]),
            replicates=int(d["replicates"]),
            seed=int(d["seed"]),
            strategies=strategies,
            mdc=mdc_cfg,
            alpha_star=float(d.get("alpha_star", DEFAULT_ALPHA_STAR)),
        )

    def with_overrides(self, **kwargs) -> "ScenarioSpec":
        """Copy of the scenario with some fields replaced."""
        base = {
            "name": self.name,
            "schema": self.schema,
            "true_params": self.true_params,
            "category_probs": self.category_probs,
            "numeric_dists": self.numeric_dists,
            "n": self.n,
            "replicates": self.replicates,
            "seed": self.seed,
            "strategies": self.strategies,
            "mdc": self.mdc,
            "alpha_star": self.alpha_star,
        }
        base.update(kwargs)
        return ScenarioSpec(**base)

    def to_dict(self) -> dict:
        layout = parameter_layout(self.schema)
        beta: dict[str, object] = {}
        for pred in self.schema.ordinal_predictors + self.schema.nominal_predictors:
            start, stop = _block_in_beta(layout, pred.name)
            beta[pred.name] = [float(v) for v in self.true_params.beta[start:stop]]
        offset = self.schema.n_ordinal_coefs + sum(
            p.n_levels - 1 for p in self.schema.nominal_predictors
        )
        for i, name in enumerate(self.schema.numeric_predictors):
            beta[name] = float(self.true_params.beta[offset + i])
        return {
            "name": self.name,
            "schema": self.schema.to_dict(),
            "true_params": {
                "alpha": [float(a) for a in self.true_params.alpha],
                "beta": beta,
            },
            "category_probs": {k: list(v) for k, v in self.category_probs.items()},
            "numeric_dists": {
                k: {"mean": v.mean, "variance": v.variance}
                for k, v in self.numeric_dists.items()
            },
            "n": self.n,
            "replicates": self.replicates,
            "seed": self.seed,
            "strategies": [s.value for s in self.strategies],
            "mdc": {
                "c_initial": self.mdc.c_initial,
                "c_lower_tol": self.mdc.c_lower_tol,
                "c_upper_tol": self.mdc.c_upper_tol,
                "step": self.mdc.step,
                "max_step3": self.mdc.max_step3,
            },
            "alpha_star": self.alpha_star,
        }


def _block_in_beta(layout, name: str) -> tuple[int, int]:
    entries = layout.beta_entries()
    idx = [i for i, e in enumerate(entries) if e.name == name]
    return idx[0], idx[-1] + 1


def _replicate_rng(seed: int, replicate_index: int) -> np.random.Generator:
    key = np.array([seed, replicate_index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def generate_records(spec: ScenarioSpec, replicate_index: int) -> list[dict]:
    """Raw records for one replicate, deterministic in (seed, replicate_index)."""
    rng = _replicate_rng(spec.seed, replicate_index)
    n = spec.n
    schema = spec.schema
    cols: dict[str, list] = {}
    X_parts: list[np.ndarray] = []
    for pred in schema.ordinal_predictors + schema.nominal_predictors:
        probs = np.asarray(spec.category_probs[pred.name])
        draws = np.searchsorted(np.cumsum(probs), rng.random(n), side="right")
        draws = np.minimum(draws, pred.n_levels - 1)
        cols[pred.name] = [pred.levels[i] for i in draws]
        block = np.zeros((n, pred.n_levels - 1))
        hot = draws > 0
        block[np.nonzero(hot)[0], draws[hot] - 1] = 1.0
        X_parts.append(block)
    for name in schema.numeric_predictors:
        dist = spec.numeric_dists[name]
        vals = rng.normal(dist.mean, np.sqrt(dist.variance), n)
        cols[name] = vals.tolist()
        X_parts.append(vals[:, None])
    X = np.hstack(X_parts) if X_parts else np.zeros((n, 0))
    pi = category_prob_matrix(spec.true_params, X)
    y_idx = np.sum(np.cumsum(pi, axis=1) < rng.random(n)[:, None], axis=1)
    y_idx = np.minimum(y_idx, schema.k - 1)
    cols[schema.response_name] = [schema.response_levels[i] for i in y_idx]
    names = list(cols)
    return [{name: cols[name][i] for name in names} for i in range(n)]


def generate_dataset(spec: ScenarioSpec, replicate_index: int) -> DesignMatrix:
    """Encoded dataset for one replicate.

    Unlike build_design, degenerate draws (a category with zero
    observations) are not rejected here; they surface later as fit
    failures counted by run_study.
    """
    return _assemble(spec.schema, generate_records(spec, replicate_index))


@dataclass(frozen=True)
class ParamSummary:
    label: str
    truth: float
    mean: float
    variance: float
    bias_sq: float
    mse: float


@dataclass
class MseReport:
    """Replicate aggregates: moments per parameter per strategy, direction
    label counts per classification stage, and monotonicity-test rejections."""

    scenario: str
    n: int
    replicates_requested: int
    replicates_used: int
    failures: tuple[tuple[int, str], ...]
    strategies: tuple[str, ...]
    param_labels: tuple[str, ...]
    truth: tuple[float, ...]
    summaries: dict[str, tuple[ParamSummary, ...]]
    label_counts: dict[str, dict[str, dict[str, dict[str, int]]]]
    test_reject_counts: dict[str, int]
    alpha_star: float

    def summary_for(self, strategy: str | Strategy) -> tuple[ParamSummary, ...]:
        return self.summaries[Strategy(strategy).value]

    def group_indices(self, group: str) -> list[int]:
        """Parameter indices for 'intercepts' or a predictor name."""
        out = []
        for i, lab in enumerate(self.param_labels):
            if group == "intercepts" and lab.startswith("alpha_"):
                out.append(i)
            elif lab == group or lab.startswith(f"{group}["):
                out.append(i)
        if not out:
            raise InputError(f"unknown parameter group {group!r}")
        return out

    def group_mse(self, strategy: str | Strategy, group: str) -> float:
        s = self.summary_for(strategy)
        idx = self.group_indices(group)
        return float(np.mean([s[i].mse for i in idx]))

    def mse_reduction(self, strategy: str | Strategy, group: str,
                      baseline: str | Strategy = Strategy.UMLE) -> float:
        """1 - (group-average MSE of strategy) / (group-average MSE of baseline)."""
        return 1.0 - self.group_mse(strategy, group) / self.group_mse(baseline, group)

    def group_bias_sq(self, strategy: str | Strategy, group: str) -> float:
        s = self.summary_for(strategy)
        idx = self.group_indices(group)
        return float(np.sum([s[i].bias_sq for i in idx]))

    def label_rate(self, strategy: str | Strategy, stage: str, predictor: str,
                   label: str) -> float:
        counts = self.label_counts[Strategy(strategy).value][stage][predictor]
        return counts.get(label, 0) / self.replicates_used

    def test_reject_rate(self, predictor: str) -> float:
        return self.test_reject_counts[predictor] / self.replicates_used


def _final_label(outcome) -> dict[str, str]:
    state = outcome.state_final
    out = {}
    for name, direction in state.direction_assignment().items():
        if name in state.excluded:
            out[name] = "none"
        else:
            out[name] = direction.value
    return out


def _run_replicate(spec: ScenarioSpec, index: int) -> dict:
    try:
        design = generate_dataset(spec, index)
        umle = fit_unconstrained(design)
        tests = all_predictor_tests(umle, spec.alpha_star)
        estimates: dict[str, np.ndarray] = {}
        labels: dict[str, dict[str, dict[str, str]]] = {}
        for strategy in spec.strategies:
            cfg = StrategyConfig(strategy=strategy, mdc=spec.mdc, alpha_star=spec.alpha_star)
            outcome = run_strategy(design, cfg, umle=umle)
            if not outcome.fit.converged:
                raise NumericError(
                    f"{strategy.value} fit failed its stationarity check"
                )
            estimates[strategy.value] = outcome.fit.params.as_array()
            if outcome.state_step1 is not None:
                labels[strategy.value] = {
                    "step1": {k: v.value for k, v in outcome.state_step1.labels().items()},
                    "step2": {k: v.value for k, v in outcome.state_step2.labels().items()},
                    "final": _final_label(outcome),
                }
        return {
            "index": index,
            "ok": True,
            "estimates": estimates,
            "labels": labels,
            "rejected": {t.predictor: t.reject for t in tests},
        }
    except (NumericError, InputError) as exc:
        return {"index": index, "ok": False, "reason": f"{type(exc).__name__}: {exc}"}


def _worker(args: tuple[ScenarioSpec, int]) -> dict:
    return _run_replicate(*args)


def run_study(
    spec: ScenarioSpec,
    strategies: Sequence[Strategy] | None = None,
    n_jobs: int = 1,
) -> MseReport:
    """Fit every strategy on every replicate and aggregate the MSE decomposition.

    Failed replicates (nonconvergence, separation, degenerate draws) are
    recorded with their reason and excluded from every strategy's
    aggregates, keeping the comparison paired. More than 5% failures is an
    error.
    """
    if strategies is not None:
        spec = spec.with_overrides(strategies=tuple(Strategy(s) for s in strategies))
    results = _map_replicates(spec, n_jobs)
    failures = tuple(
        (r["index"], r["reason"]) for r in results if not r["ok"]
    )
    if len(failures) > MAX_FAILURE_FRACTION * spec.replicates:
        raise TooManyFailuresError(
            f"{len(failures)} of {spec.replicates} replicates failed "
            f"(first: {failures[0][1]})"
        )
    used = [r for r in results if r["ok"]]
    layout = parameter_layout(spec.schema)
    truth = spec.true_params.as_array()
    labels = tuple(layout.labels())

    summaries: dict[str, tuple[ParamSummary, ...]] = {}
    for strategy in spec.strategies:
        est = np.vstack([r["estimates"][strategy.value] for r in used])
        mean = est.mean(axis=0)
        variance = est.var(axis=0)  # population divisor: exact decomposition
        bias_sq = (mean - truth) ** 2
        mse = np.mean((est - truth) ** 2, axis=0)
        summaries[strategy.value] = tuple(
            ParamSummary(labels[i], float(truth[i]), float(mean[i]),
                         float(variance[i]), float(bias_sq[i]), float(mse[i]))
            for i in range(truth.size)
        )

    op_names = [p.name for p in spec.schema.ordinal_predictors]
    label_counts: dict[str, dict[str, dict[str, dict[str, int]]]] = {}
    for strategy in spec.strategies:
        if strategy is Strategy.UMLE:
            continue
        stages: dict[str, dict[str, dict[str, int]]] = {}
        for stage in ("step1", "step2", "final"):
            per_op: dict[str, dict[str, int]] = {}
            for op in op_names:
                counter: Counter = Counter()
                for r in used:
                    counter[r["labels"][strategy.value][stage][op]] += 1
                per_op[op] = dict(counter)
            stages[stage] = per_op
        label_counts[strategy.value] = stages

    test_reject_counts = {
        op: sum(1 for r in used if r["rejected"][op]) for op in op_names
    }
    return MseReport(
        scenario=spec.name,
        n=spec.n,
        replicates_requested=spec.replicates,
        replicates_used=len(used),
        failures=failures,
        strategies=tuple(s.value for s in spec.strategies),
        param_labels=labels,
        truth=tuple(float(t) for t in truth),
        summaries=summaries,
        label_counts=label_counts,
        test_reject_counts=test_reject_counts,
        alpha_star=spec.alpha_star,
    )


def _map_replicates(spec: ScenarioSpec, n_jobs: int) -> list[dict]:
    indices = range(spec.replicates)
    if n_jobs <= 1:
        return [_run_replicate(spec, i) for i in indices]
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        results = list(pool.map(_worker, ((spec, i) for i in indices), chunksize=8))
    return sorted(results, key=lambda r: r["index"])
