"""Command-line front end.

Subcommands: fit (one dataset, one strategy), test (monotonicity test
only), mdc (direction classification only, no constrained fit), simulate
(replicated scenario study), validate (schema/data consistency check).

Exit codes: 0 success, 2 input error, 3 nonconvergence or too many
simulation failures, 4 internal error.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time
from pathlib import Path

import yaml

from . import __version__
from .design import ModelSchema, build_design
from .direction import MdcConfig, mdc_step1, mdc_step2
from .errors import InputError, NumericError, OrdmonoError
from .fitting import fit_unconstrained
from .montest import all_predictor_tests
from .report import (
    build_fit_report,
    build_simulation_report,
    config_record,
    meta_record,
    montest_records,
    render_json,
    render_text,
)
from .simulate import ScenarioSpec, run_study
from .strategies import Strategy, StrategyConfig, run_strategy

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3
EXIT_INTERNAL = 4


def _read_csv(path: str) -> list[dict]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise InputError(f"{path}: empty file, header row required")
            rows = []
            for i, row in enumerate(reader, start=1):
                if None in row or any(v is None for v in row.values()):
                    raise InputError(
                        f"{path}: row {i} has a different number of fields than the header"
                    )
                rows.append(row)
            if not rows:
                raise InputError(f"{path}: no data rows")
            return rows
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


def _read_schema(path: str) -> ModelSchema:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise InputError(f"{path}: invalid YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise InputError(f"{path}: schema file must hold a mapping")
    return ModelSchema.from_dict(doc)


def _read_scenario(path: str) -> ScenarioSpec:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise InputError(f"{path}: invalid YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise InputError(f"{path}: scenario file must hold a mapping")
    try:
        return ScenarioSpec.from_dict(doc)
    except KeyError as exc:
        raise InputError(f"{path}: scenario is missing field {exc}") from exc


def _mdc_config(args) -> MdcConfig:
    try:
        return MdcConfig(
            c_initial=args.c_initial,
            c_lower_tol=args.c_lower_tol,
            c_upper_tol=args.c_upper_tol,
            step=args.grid_step,
        )
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def _emit(records: list[dict], fmt: str, out: str | None) -> None:
    text = render_json(records) if fmt == "json" else render_text(records)
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _add_common_flags(p: argparse.ArgumentParser, mdc: bool = True) -> None:
    p.add_argument("--out", default=None, help="output path (default: stdout)")
    p.add_argument("--format", choices=("text", "json"), default="text",
                   help="report format: human-readable text or JSON lines")
    if mdc:
        p.add_argument("--c-initial", type=float, default=0.90,
                       help="step-1 confidence level (default 0.90)")
        p.add_argument("--c-lower-tol", type=float, default=0.85,
                       help="lowest level the step-2 walk may reach (default 0.85)")
        p.add_argument("--c-upper-tol", type=float, default=0.999,
                       help="highest level the step-2 walk may reach (default 0.999)")
        p.add_argument("--grid-step", type=float, default=0.01,
                       help="confidence-level increment of the step-2 walk (default 0.01)")
    p.add_argument("--alpha-star", type=float, default=0.05,
                   help="monotonicity-test significance level (default 0.05)")


def cmd_fit(args) -> int:
    rows = _read_csv(args.data)
    schema = _read_schema(args.schema)
    design = build_design(schema, rows)
    config = StrategyConfig(
        strategy=Strategy(args.strategy),
        mdc=_mdc_config(args),
        alpha_star=args.alpha_star,
    )
    outcome = run_strategy(design, config)
    tests = outcome.tests or all_predictor_tests(outcome.umle, args.alpha_star)
    records = build_fit_report("fit", design, config, outcome, tests)
    _emit(records, args.format, args.out)
    return EXIT_OK


def cmd_test(args) -> int:
    rows = _read_csv(args.data)
    schema = _read_schema(args.schema)
    design = build_design(schema, rows)
    fit = fit_unconstrained(design)
    tests = all_predictor_tests(fit, args.alpha_star)
    records = [meta_record("test")]
    records.append({"record": "schema", **schema.to_dict()})
    records.append({"record": "data", "n": int(design.n), "response_counts": {
        lvl: int(c) for lvl, c in zip(schema.response_levels, design.Y.sum(axis=0))
    }})
    records.extend(montest_records(tests))
    _emit(records, args.format, args.out)
    return EXIT_OK


def cmd_mdc(args) -> int:
    rows = _read_csv(args.data)
    schema = _read_schema(args.schema)
    design = build_design(schema, rows)
    fit = fit_unconstrained(design)
    config = _mdc_config(args)
    state = mdc_step2(fit, mdc_step1(fit, config), config)
    records = [meta_record("mdc")]
    records.append({"record": "schema", **schema.to_dict()})
    cfg = StrategyConfig(strategy=Strategy.CMLE, mdc=config, alpha_star=args.alpha_star)
    records.append(config_record(cfg))
    for pred in schema.ordinal_predictors:
        d = state.decisions[pred.name]
        records.append(
            {
                "record": "mdc_predictor",
                "predictor": pred.name,
                "step1_label": state.levels_tried[pred.name][0][1].value,
                "levels_tried": [
                    [float(lv), lab.value] for lv, lab in state.levels_tried[pred.name]
                ],
                "label": d.label.value,
                "decided_at": float(d.decided_at),
                "decided_in_step": int(d.decided_in_step),
                "excluded": False,
                "direction": d.label.value
                if d.label.value in ("isotonic", "antitonic")
                else "unresolved",
            }
        )
    _emit(records, args.format, args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    spec = _read_scenario(args.scenario)
    overrides = {}
    if args.replicates is not None:
        overrides["replicates"] = args.replicates
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.strategy:
        overrides["strategies"] = tuple(Strategy(s) for s in args.strategy)
    if overrides:
        spec = spec.with_overrides(**overrides)
    result = run_study(spec, n_jobs=args.threads)
    records = build_simulation_report(spec, result)
    _emit(records, args.format, args.out)
    return EXIT_OK


def cmd_validate(args) -> int:
    rows = _read_csv(args.data)
    schema = _read_schema(args.schema)
    design = build_design(schema, rows)
    records = [meta_record("validate")]
    records.append({"record": "schema", **schema.to_dict()})
    records.append(
        {
            "record": "validation",
            "ok": True,
            "n": int(design.n),
            "columns": len(design.column_map),
            "response_counts": {
                lvl: int(c)
                for lvl, c in zip(schema.response_levels, design.Y.sum(axis=0))
            },
        }
    )
    _emit(records, args.format, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ordmono",
        description="monotonicity-constrained proportional odds regression",
    )
    parser.add_argument("--version", action="version", version=f"ordmono {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit one dataset with one strategy")
    p_fit.add_argument("data", help="CSV data file with a header row")
    p_fit.add_argument("schema", help="YAML schema file")
    p_fit.add_argument(
        "--strategy",
        choices=[s.value for s in Strategy],
        default=Strategy.CMLE.value,
    )
    _add_common_flags(p_fit)
    p_fit.set_defaults(func=cmd_fit)

    p_test = sub.add_parser("test", help="monotonicity test per ordinal predictor")
    p_test.add_argument("data")
    p_test.add_argument("schema")
    _add_common_flags(p_test, mdc=False)
    p_test.set_defaults(func=cmd_test)

    p_mdc = sub.add_parser("mdc", help="direction classification only (steps 1-2)")
    p_mdc.add_argument("data")
    p_mdc.add_argument("schema")
    _add_common_flags(p_mdc)
    p_mdc.set_defaults(func=cmd_mdc)

    p_sim = sub.add_parser("simulate", help="run a scenario study")
    p_sim.add_argument("scenario", help="YAML scenario file")
    p_sim.add_argument("--replicates", type=int, default=None)
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.add_argument(
        "--strategy",
        action="append",
        choices=[s.value for s in Strategy],
        help="strategy to run (repeatable; default: scenario file)",
    )
    p_sim.add_argument("--threads", type=int, default=1,
                       help="parallel replicate workers (default 1)")
    p_sim.add_argument("--out", default=None)
    p_sim.add_argument("--format", choices=("text", "json"), default="text")
    p_sim.set_defaults(func=cmd_simulate)

    p_val = sub.add_parser("validate", help="check data against a schema")
    p_val.add_argument("data")
    p_val.add_argument("schema")
    p_val.add_argument("--out", default=None)
    p_val.add_argument("--format", choices=("text", "json"), default="text")
    p_val.set_defaults(func=cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    started = time.perf_counter()
    try:
        code = args.func(args)
    except InputError as exc:
        print(f"ordmono: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericError as exc:
        print(f"ordmono: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OrdmonoError as exc:
        print(f"ordmono: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    print(f"ordmono {args.command}: completed in {time.perf_counter() - started:.2f}s",
          file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
