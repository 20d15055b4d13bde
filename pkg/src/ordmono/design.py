"""Schema declaration and design-matrix construction.

Raw tabular records are encoded into dummy variables (first listed level is
the baseline for every categorical predictor) and response indicators.
Column order is fixed by the schema declaration: ordinal blocks first, then
nominal blocks, then numeric columns, so fitted parameter vectors are
byte-stable across runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    EmptyCategoryError,
    MissingValueError,
    SchemaError,
    UnknownLevelError,
)


@dataclass(frozen=True)
class CategoricalPredictor:
    """A categorical predictor with its declared levels (first = baseline)."""

    name: str
    levels: tuple[str, ...]

    @property
    def n_levels(self) -> int:
        return len(self.levels)


@dataclass(frozen=True)
class ModelSchema:
    """Declares the response and every predictor of the model.

    Parameters
    ----------
    response_name : str
        Column holding the ordinal response.
    response_levels : sequence of str
        Ordered response categories; at least 3.
    ordinal_predictors : sequence of CategoricalPredictor
        Ordered-category predictors whose coefficients may be constrained.
        Each needs at least 2 levels; the first level is the baseline with
        an implicit zero coefficient.
    nominal_predictors : sequence of CategoricalPredictor
        Unordered categorical predictors, dummy-coded the same way.
    numeric_predictors : sequence of str
        Interval/ratio scale columns used as-is.
    """

    response_name: str
    response_levels: tuple[str, ...]
    ordinal_predictors: tuple[CategoricalPredictor, ...] = ()
    nominal_predictors: tuple[CategoricalPredictor, ...] = ()
    numeric_predictors: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "response_levels", tuple(self.response_levels))
        object.__setattr__(self, "ordinal_predictors", tuple(self.ordinal_predictors))
        object.__setattr__(self, "nominal_predictors", tuple(self.nominal_predictors))
        object.__setattr__(self, "numeric_predictors", tuple(self.numeric_predictors))
        if len(self.response_levels) < 3:
            raise SchemaError("response needs at least 3 categories, got %d" % len(self.response_levels))
        if len(set(self.response_levels)) != len(self.response_levels):
            raise SchemaError("duplicate response levels")
        for pred in self.ordinal_predictors + self.nominal_predictors:
            if pred.n_levels < 2:
                raise SchemaError(f"predictor {pred.name!r} needs at least 2 levels")
            if len(set(pred.levels)) != pred.n_levels:
                raise SchemaError(f"duplicate levels for predictor {pred.name!r}")
        names = (
            [p.name for p in self.ordinal_predictors]
            + [p.name for p in self.nominal_predictors]
            + list(self.numeric_predictors)
            + [self.response_name]
        )
        if len(set(names)) != len(names):
            raise SchemaError("duplicate column names in schema")

    @property
    def k(self) -> int:
        """Number of response categories."""
        return len(self.response_levels)

    @property
    def n_ordinal_coefs(self) -> int:
        return sum(p.n_levels - 1 for p in self.ordinal_predictors)

    @property
    def n_other_coefs(self) -> int:
        return sum(p.n_levels - 1 for p in self.nominal_predictors) + len(self.numeric_predictors)

    @property
    def n_coefs(self) -> int:
        """Total non-intercept parameter count."""
        return self.n_ordinal_coefs + self.n_other_coefs

    @classmethod
    def from_dict(cls, d: Mapping) -> "ModelSchema":
        """Build a schema from a plain mapping (parsed YAML/JSON)."""
        try:
            response = d["response"]
            ordinal = [
                CategoricalPredictor(p["name"], tuple(str(v) for v in p["levels"]))
                for p in d.get("ordinal", [])
            ]
            nominal = [
                CategoricalPredictor(p["name"], tuple(str(v) for v in p["levels"]))
                for p in d.get("nominal", [])
            ]
            numeric = tuple(d.get("numeric", []))
            return cls(
                response_name=response["name"],
                response_levels=tuple(str(v) for v in response["levels"]),
                ordinal_predictors=tuple(ordinal),
                nominal_predictors=tuple(nominal),
                numeric_predictors=numeric,
            )
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed schema declaration: {exc}") from exc

    def to_dict(self) -> dict:
        return {
            "response": {"name": self.response_name, "levels": list(self.response_levels)},
            "ordinal": [{"name": p.name, "levels": list(p.levels)} for p in self.ordinal_predictors],
            "nominal": [{"name": p.name, "levels": list(p.levels)} for p in self.nominal_predictors],
            "numeric": list(self.numeric_predictors),
        }


@dataclass(frozen=True)
class ParameterInfo:
    """One entry of the parameter layout.

    kind is one of "intercept", "ordinal", "nominal", "numeric". For
    categorical kinds, `level` is the (non-baseline) category label and
    `position` its 1-based index among the declared levels (2..q).
    """

    kind: str
    name: str
    level: str | None = None
    position: int | None = None

    @property
    def label(self) -> str:
        if self.kind == "intercept":
            return self.name
        if self.level is None:
            return self.name
        return f"{self.name}[{self.level}]"


class ParameterLayout:
    """Deterministic ordering of all model parameters.

    Intercepts alpha_1..alpha_{k-1} first, then one coefficient per
    non-baseline category of each ordinal predictor (schema order), then
    nominal dummies, then numeric coefficients. Every module aligns its
    vectors to this layout.
    """

    def __init__(self, schema: ModelSchema):
        self.schema = schema
        entries: list[ParameterInfo] = []
        for j in range(1, schema.k):
            entries.append(ParameterInfo("intercept", f"alpha_{j}"))
        for pred in schema.ordinal_predictors:
            for pos, level in enumerate(pred.levels[1:], start=2):
                entries.append(ParameterInfo("ordinal", pred.name, level, pos))
        for pred in schema.nominal_predictors:
            for pos, level in enumerate(pred.levels[1:], start=2):
                entries.append(ParameterInfo("nominal", pred.name, level, pos))
        for name in schema.numeric_predictors:
            entries.append(ParameterInfo("numeric", name))
        self.entries: tuple[ParameterInfo, ...] = tuple(entries)
        self.n_alpha = schema.k - 1
        self.n_beta = len(entries) - self.n_alpha
        self.n_ordinal = schema.n_ordinal_coefs
        # beta-vector index ranges per ordinal predictor, in schema order
        blocks: dict[str, tuple[int, int]] = {}
        start = 0
        for pred in schema.ordinal_predictors:
            blocks[pred.name] = (start, start + pred.n_levels - 1)
            start += pred.n_levels - 1
        self.ordinal_blocks = blocks

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i: int) -> ParameterInfo:
        return self.entries[i]

    def beta_entries(self) -> tuple[ParameterInfo, ...]:
        return self.entries[self.n_alpha:]

    def ordinal_block(self, name: str) -> tuple[int, int]:
        """(start, stop) of the predictor's coefficients within the beta vector."""
        return self.ordinal_blocks[name]

    def labels(self) -> list[str]:
        return [e.label for e in self.entries]


def parameter_layout(schema: ModelSchema) -> ParameterLayout:
    """Enumerate model parameters in their canonical order."""
    return ParameterLayout(schema)


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """Encoded observations.

    X_ord holds the ordinal dummies, X_other the nominal dummies and
    numeric columns, Y the response indicators (one 1 per row). column_map
    describes each column of [X_ord | X_other] in order.
    """

    schema: ModelSchema
    X_ord: np.ndarray
    X_other: np.ndarray
    Y: np.ndarray
    column_map: tuple[ParameterInfo, ...]

    @property
    def n(self) -> int:
        return self.Y.shape[0]

    @property
    def k(self) -> int:
        return self.Y.shape[1]

    @cached_property
    def X(self) -> np.ndarray:
        """Full covariate matrix [X_ord | X_other]."""
        return np.ascontiguousarray(np.hstack([self.X_ord, self.X_other]))

    @cached_property
    def y_index(self) -> np.ndarray:
        """0-based response category per observation."""
        return np.argmax(self.Y, axis=1)

    def decode_row(self, i: int) -> dict[str, str | float]:
        """Recover the original record for observation i from the encoding."""
        out: dict[str, str | float] = {}
        row = self.X[i]
        col = 0
        for pred in self.schema.ordinal_predictors + self.schema.nominal_predictors:
            q = pred.n_levels
            block = row[col : col + q - 1]
            hits = np.nonzero(block == 1.0)[0]
            out[pred.name] = pred.levels[0] if hits.size == 0 else pred.levels[int(hits[0]) + 1]
            col += q - 1
        for name in self.schema.numeric_predictors:
            out[name] = float(row[col])
            col += 1
        out[self.schema.response_name] = self.schema.response_levels[int(self.y_index[i])]
        return out


def _encode_categorical(
    values: list[str], pred: CategoricalPredictor, where: str
) -> np.ndarray:
    level_index = {lvl: i for i, lvl in enumerate(pred.levels)}
    n, q = len(values), pred.n_levels
    block = np.zeros((n, q - 1))
    for i, v in enumerate(values):
        try:
            idx = level_index[v]
        except KeyError:
            raise UnknownLevelError(
                f"{where} row {i + 1}: value {v!r} is not a declared level of {pred.name!r}"
            ) from None
        if idx > 0:
            block[i, idx - 1] = 1.0
    return block


def build_design(schema: ModelSchema, rows: Iterable[Mapping]) -> DesignMatrix:
    """Encode raw records into a DesignMatrix.

    Every record must supply a value for the response and every declared
    predictor. Categorical values are matched as exact strings after
    trimming surrounding whitespace.

    Raises
    ------
    MissingValueError, UnknownLevelError, EmptyCategoryError
    """
    records = list(rows)
    design = _assemble(schema, records)
    _check_no_empty_category(design)
    return design


def _cell(record: Mapping, name: str, row: int) -> str:
    if name not in record or record[name] is None:
        raise MissingValueError(f"row {row}: missing value for column {name!r}")
    value = str(record[name]).strip()
    if value == "":
        raise MissingValueError(f"row {row}: missing value for column {name!r}")
    return value


def _assemble(schema: ModelSchema, records: Sequence[Mapping]) -> DesignMatrix:
    n = len(records)
    columns: dict[str, list[str]] = {}
    for pred in schema.ordinal_predictors + schema.nominal_predictors:
        columns[pred.name] = [_cell(r, pred.name, i + 1) for i, r in enumerate(records)]
    resp = [_cell(r, schema.response_name, i + 1) for i, r in enumerate(records)]

    ord_blocks = [
        _encode_categorical(columns[p.name], p, "ordinal") for p in schema.ordinal_predictors
    ]
    X_ord = np.hstack(ord_blocks) if ord_blocks else np.zeros((n, 0))

    nom_blocks = [
        _encode_categorical(columns[p.name], p, "nominal") for p in schema.nominal_predictors
    ]
    num_cols = []
    for name in schema.numeric_predictors:
        vals = np.empty(n)
        for i, r in enumerate(records):
            raw = _cell(r, name, i + 1)
            try:
                vals[i] = float(raw)
            except ValueError:
                raise UnknownLevelError(
                    f"row {i + 1}: non-numeric value {raw!r} for numeric column {name!r}"
                ) from None
        num_cols.append(vals[:, None])
    other_parts = nom_blocks + num_cols
    X_other = np.hstack(other_parts) if other_parts else np.zeros((n, 0))

    resp_pred = CategoricalPredictor(schema.response_name, schema.response_levels)
    resp_index = {lvl: i for i, lvl in enumerate(schema.response_levels)}
    Y = np.zeros((n, schema.k))
    for i, v in enumerate(resp):
        try:
            Y[i, resp_index[v]] = 1.0
        except KeyError:
            raise UnknownLevelError(
                f"row {i + 1}: value {v!r} is not a declared level of the response "
                f"{schema.response_name!r}"
            ) from None

    layout = parameter_layout(schema)
    return DesignMatrix(
        schema=schema,
        X_ord=X_ord,
        X_other=X_other,
        Y=Y,
        column_map=layout.beta_entries(),
    )


def _check_no_empty_category(design: DesignMatrix) -> None:
    X = design.X
    for j, info in enumerate(design.column_map):
        if info.kind in ("ordinal", "nominal") and not np.any(X[:, j] != 0.0):
            raise EmptyCategoryError(
                f"category {info.level!r} of predictor {info.name!r} has zero observations"
            )
    counts = design.Y.sum(axis=0)
    for j, c in enumerate(counts):
        if c == 0:
            raise EmptyCategoryError(
                f"response category {design.schema.response_levels[j]!r} has zero observations"
            )
