"""Report assembly and rendering.

A report is an ordered list of flat records (dicts). The JSON rendering
writes one record per line with sorted keys, so identical inputs produce
identical bytes and every numeric field survives a parse round trip
exactly. The text rendering is a readable projection of the same records.
Wall-clock timing is deliberately not part of a report; the CLI logs it to
stderr instead.
"""

from __future__ import annotations

import json
from typing import Iterable

from . import __version__
from .design import DesignMatrix
from .fitting import FitResult, wald_ci
from .montest import MonotonicityTestResult
from .simulate import MseReport, ScenarioSpec
from .strategies import Strategy, StrategyConfig, StrategyOutcome

REPORT_CI_LEVEL = 0.95


def meta_record(command: str) -> dict:
    return {"record": "meta", "tool": "ordmono", "version": __version__, "command": command}


def _fit_params_record(fit: FitResult, with_se: bool) -> list[dict]:
    est = fit.params.as_array()
    rows = []
    ci = wald_ci(fit, REPORT_CI_LEVEL) if with_se and fit.se is not None else None
    for i, info in enumerate(fit.layout.entries):
        row = {"label": info.label, "estimate": float(est[i])}
        if ci is not None:
            row["se"] = float(fit.se[i])
            row["ci_low"] = float(ci[i, 0])
            row["ci_high"] = float(ci[i, 1])
        rows.append(row)
    return rows


def fit_record(fit: FitResult, role: str) -> dict:
    rec = {
        "record": "fit",
        "role": role,
        "strategy": fit.strategy_tag,
        "loglik": float(fit.loglik),
        "converged": bool(fit.converged),
        "iterations": int(fit.iterations),
        "params": _fit_params_record(fit, with_se=True),
    }
    if fit.active_constraints is not None:
        rec["active_constraints"] = list(fit.active_constraints)
    return rec


def mdc_records(outcome: StrategyOutcome) -> list[dict]:
    records: list[dict] = []
    state = outcome.state_final
    if state is None:
        return records
    for pred in outcome.fit.layout.schema.ordinal_predictors:
        name = pred.name
        decision = state.decisions[name]
        step1_label = outcome.state_step1.decisions[name].label.value
        records.append(
            {
                "record": "mdc_predictor",
                "predictor": name,
                "step1_label": step1_label,
                "levels_tried": [
                    [float(lv), lab.value] for lv, lab in state.levels_tried.get(name, ())
                ],
                "label": decision.label.value,
                "decided_at": float(decision.decided_at),
                "decided_in_step": int(decision.decided_in_step),
                "excluded": name in state.excluded,
                "direction": outcome.assignment[name].value,
            }
        )
    if state.flips:
        records.append(
            {
                "record": "mdc_flips",
                "events": [
                    {
                        "predictor": f.predictor,
                        "level": float(f.level),
                        "from": f.from_label.value,
                        "to": f.to_label.value,
                    }
                    for f in state.flips
                ],
            }
        )
    if state.step3 is not None:
        records.append(
            {
                "record": "mdc_step3",
                "chosen": int(state.step3.chosen),
                "candidates": [
                    {
                        "directions": {n: d.value for n, d in c.directions},
                        "loglik": float(c.loglik),
                    }
                    for c in state.step3.candidates
                ],
            }
        )
    return records


def montest_records(tests: Iterable[MonotonicityTestResult]) -> list[dict]:
    records = []
    for t in tests:
        rec = {
            "record": "montest",
            "predictor": t.predictor,
            "alpha_star": float(t.alpha_star),
            "b_level": float(t.b_level),
            "decision": t.decision,
        }
        if t.witness is not None:
            up, down = t.witness
            rec["witness"] = {
                "up": [up.p, up.p_prime],
                "down": [down.p, down.p_prime],
            }
        records.append(rec)
    return records


def config_record(config: StrategyConfig) -> dict:
    return {
        "record": "config",
        "strategy": Strategy(config.strategy).value,
        "c_initial": config.mdc.c_initial,
        "c_lower_tol": config.mdc.c_lower_tol,
        "c_upper_tol": config.mdc.c_upper_tol,
        "grid_step": config.mdc.step,
        "alpha_star": config.alpha_star,
    }


def build_fit_report(
    command: str,
    design: DesignMatrix,
    config: StrategyConfig,
    outcome: StrategyOutcome | None,
    tests: Iterable[MonotonicityTestResult] | None,
) -> list[dict]:
    records = [meta_record(command)]
    records.append({"record": "schema", **design.schema.to_dict()})
    records.append(config_record(config))
    counts = design.Y.sum(axis=0)
    records.append(
        {
            "record": "data",
            "n": int(design.n),
            "response_counts": {
                lvl: int(c) for lvl, c in zip(design.schema.response_levels, counts)
            },
        }
    )
    if outcome is not None:
        records.append(fit_record(outcome.umle, role="unconstrained"))
        if outcome.fit is not outcome.umle:
            records.append(fit_record(outcome.fit, role="final"))
        records.extend(mdc_records(outcome))
    if tests is not None:
        records.extend(montest_records(tests))
    return records


def build_simulation_report(spec: ScenarioSpec, report: MseReport) -> list[dict]:
    records = [meta_record("simulate")]
    records.append({"record": "scenario", **spec.to_dict()})
    records.append(
        {
            "record": "study",
            "replicates_requested": report.replicates_requested,
            "replicates_used": report.replicates_used,
            "failures": [[i, reason] for i, reason in report.failures],
        }
    )
    for strategy in report.strategies:
        for s in report.summaries[strategy]:
            records.append(
                {
                    "record": "mse",
                    "strategy": strategy,
                    "parameter": s.label,
                    "truth": s.truth,
                    "mean": s.mean,
                    "variance": s.variance,
                    "bias_sq": s.bias_sq,
                    "mse": s.mse,
                }
            )
    if Strategy.UMLE.value in report.strategies:
        groups = ["intercepts"] + [p.name for p in spec.schema.ordinal_predictors]
        for strategy in report.strategies:
            if strategy == Strategy.UMLE.value:
                continue
            for group in groups:
                records.append(
                    {
                        "record": "mse_reduction",
                        "strategy": strategy,
                        "group": group,
                        "vs": Strategy.UMLE.value,
                        "reduction": report.mse_reduction(strategy, group),
                    }
                )
    for strategy, stages in report.label_counts.items():
        for stage, per_op in stages.items():
            for op, counts in per_op.items():
                records.append(
                    {
                        "record": "labels",
                        "strategy": strategy,
                        "stage": stage,
                        "predictor": op,
                        "counts": dict(sorted(counts.items())),
                    }
                )
    records.append(
        {
            "record": "montest_rates",
            "alpha_star": report.alpha_star,
            "reject_counts": dict(sorted(report.test_reject_counts.items())),
            "replicates_used": report.replicates_used,
        }
    )
    return records


# -- rendering ---------------------------------------------------------------

def render_json(records: list[dict]) -> str:
    return "\n".join(json.dumps(r, sort_keys=True) for r in records) + "\n"


def parse_json(text: str) -> list[dict]:
    return [json.loads(line) for line in text.splitlines() if line.strip()]


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def _table(rows: list[dict], columns: list[str]) -> list[str]:
    widths = [
        max(len(c), *(len(_fmt(r.get(c, ""))) for r in rows)) if rows else len(c)
        for c in columns
    ]
    header = "  ".join(c.ljust(w) for c, w in zip(columns, widths))
    lines = [header, "  ".join("-" * w for w in widths)]
    for r in rows:
        lines.append("  ".join(_fmt(r.get(c, "")).ljust(w) for c, w in zip(columns, widths)))
    return lines


def render_text(records: list[dict]) -> str:
    lines: list[str] = []
    mse_rows = [r for r in records if r["record"] == "mse"]
    for rec in records:
        kind = rec["record"]
        if kind == "meta":
            lines.append(f"# {rec['tool']} {rec['version']} — {rec['command']}")
        elif kind == "schema":
            ords = ", ".join(f"{p['name']}({len(p['levels'])})" for p in rec["ordinal"])
            noms = ", ".join(f"{p['name']}({len(p['levels'])})" for p in rec["nominal"])
            lines.append(
                f"model: response {rec['response']['name']} "
                f"({len(rec['response']['levels'])} levels); ordinal: {ords or '-'}; "
                f"nominal: {noms or '-'}; numeric: {', '.join(rec['numeric']) or '-'}"
            )
        elif kind == "config":
            lines.append(
                f"strategy: {rec['strategy']}  c_initial={rec['c_initial']} "
                f"tolerances=[{rec['c_lower_tol']}, {rec['c_upper_tol']}] "
                f"step={rec['grid_step']} alpha_star={rec['alpha_star']}"
            )
        elif kind == "data":
            counts = " ".join(f"{k}:{v}" for k, v in rec["response_counts"].items())
            lines.append(f"data: n={rec['n']}  response counts: {counts}")
        elif kind == "fit":
            lines.append("")
            lines.append(
                f"[{rec['role']}] strategy={rec['strategy']} loglik={rec['loglik']:.6f} "
                f"converged={rec['converged']} iterations={rec['iterations']}"
            )
            cols = ["label", "estimate"] + (
                ["se", "ci_low", "ci_high"] if "se" in rec["params"][0] else []
            )
            lines.extend(_table(rec["params"], cols))
            if rec.get("active_constraints"):
                lines.append(f"active constraint rows: {rec['active_constraints']}")
        elif kind == "mdc_predictor":
            walk = " ".join(f"{lv:g}:{lab}" for lv, lab in rec["levels_tried"])
            suffix = " (unconstrained)" if rec["excluded"] else ""
            lines.append(
                f"direction[{rec['predictor']}]: {rec['label']} "
                f"(step {rec['decided_in_step']} at level {rec['decided_at']:g}){suffix}"
                f"  walk: {walk}"
            )
        elif kind == "mdc_flips":
            for e in rec["events"]:
                lines.append(
                    f"  transient flip: {e['predictor']} {e['from']}->{e['to']} "
                    f"at level {e['level']:g} (not acted on)"
                )
        elif kind == "mdc_step3":
            lines.append(f"direction search: {len(rec['candidates'])} models fitted")
            for i, c in enumerate(rec["candidates"]):
                mark = " *" if i == rec["chosen"] else ""
                dirs = " ".join(f"{k}={v}" for k, v in c["directions"].items())
                lines.append(f"  {dirs}  loglik={c['loglik']:.6f}{mark}")
        elif kind == "montest":
            extra = ""
            if "witness" in rec:
                extra = (
                    f"  witness: pair {tuple(rec['witness']['up'])} up vs "
                    f"pair {tuple(rec['witness']['down'])} down"
                )
            lines.append(
                f"monotonicity test[{rec['predictor']}]: {rec['decision']} "
                f"(alpha*={rec['alpha_star']:g}, per-interval level {rec['b_level']:.6g})"
                + extra
            )
        elif kind == "scenario":
            lines.append(
                f"scenario: {rec['name']}  n={rec['n']} replicates={rec['replicates']} "
                f"seed={rec['seed']} strategies={','.join(rec['strategies'])}"
            )
        elif kind == "study":
            lines.append(
                f"replicates used: {rec['replicates_used']}/{rec['replicates_requested']} "
                f"({len(rec['failures'])} failed)"
            )
            for idx, reason in rec["failures"]:
                lines.append(f"  replicate {idx} failed: {reason}")
        elif kind == "mse_reduction":
            lines.append(
                f"mse reduction [{rec['strategy']} vs {rec['vs']}] {rec['group']}: "
                f"{100 * rec['reduction']:.1f}%"
            )
        elif kind == "labels":
            counts = " ".join(f"{k}:{v}" for k, v in rec["counts"].items())
            lines.append(
                f"labels[{rec['strategy']}/{rec['stage']}] {rec['predictor']}: {counts}"
            )
        elif kind == "montest_rates":
            counts = " ".join(f"{k}:{v}" for k, v in rec["reject_counts"].items())
            lines.append(
                f"monotonicity test rejections (alpha*={rec['alpha_star']:g}, "
                f"{rec['replicates_used']} replicates): {counts}"
            )
        elif kind == "validation":
            counts = " ".join(f"{k}:{v}" for k, v in rec["response_counts"].items())
            lines.append(
                f"validation: ok  n={rec['n']} encoded columns={rec['columns']}  "
                f"response counts: {counts}"
            )
    if mse_rows:
        lines.append("")
        lines.append("mse decomposition (per parameter, per strategy):")
        lines.extend(
            _table(mse_rows, ["strategy", "parameter", "truth", "mean", "variance", "bias_sq", "mse"])
        )
    return "\n".join(lines) + "\n"
