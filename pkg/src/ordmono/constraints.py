"""Monotonicity constraints on ordinal-predictor coefficients.

A predictor's coefficient sequence (with an implicit leading zero for the
baseline category) is isotonic when 0 <= b_2 <= ... <= b_q and antitonic
when 0 >= b_2 >= ... >= b_q. Those adjacency constraints are collected in a
block-diagonal matrix C with one bidiagonal block per constrained
predictor, so that C b >= 0 expresses monotonicity in every assigned
direction at once.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .design import ModelSchema
from .errors import DimensionMismatchError, SchemaError


class Direction(str, enum.Enum):
    ISOTONIC = "isotonic"
    ANTITONIC = "antitonic"
    UNCONSTRAINED = "unconstrained"


# per ordinal predictor: its assigned direction
DirectionAssignment = Mapping[str, Direction]


@dataclass(frozen=True)
class ConstraintBlock:
    predictor: str
    direction: Direction
    rows: tuple[int, int]  # [start, stop) rows within C


@dataclass(frozen=True, eq=False)
class ConstraintSet:
    """Block-diagonal constraint matrix over the constrained coefficients.

    `matrix` is square of size sum(q_s - 1) over constrained predictors
    only; `ord_indices` maps its columns into the full ordinal coefficient
    vector (which spans all ordinal predictors, constrained or not).
    """

    matrix: np.ndarray
    blocks: tuple[ConstraintBlock, ...]
    ord_indices: np.ndarray
    n_ord_total: int

    @property
    def n_rows(self) -> int:
        return self.matrix.shape[0]

    def embed(self, n_params: int, beta_offset: int) -> np.ndarray:
        """Constraint rows over a full parameter vector of length n_params.

        beta_offset is the index of the first ordinal coefficient in that
        vector (intercepts precede the coefficients).
        """
        A = np.zeros((self.n_rows, n_params))
        A[:, beta_offset + self.ord_indices] = self.matrix
        return A


def _bidiagonal(size: int, sign: float) -> np.ndarray:
    block = np.zeros((size, size))
    idx = np.arange(size)
    block[idx, idx] = sign
    block[idx[1:], idx[1:] - 1] = -sign
    return block


def build_constraints(schema: ModelSchema, dirs: DirectionAssignment) -> ConstraintSet:
    """Assemble the block-diagonal constraint matrix for a direction assignment.

    Predictors marked unconstrained contribute no rows. `dirs` must cover
    every ordinal predictor of the schema exactly once.
    """
    declared = {p.name for p in schema.ordinal_predictors}
    if set(dirs) != declared:
        raise SchemaError(
            f"direction assignment must cover exactly the ordinal predictors "
            f"{sorted(declared)}, got {sorted(dirs)}"
        )
    blocks: list[ConstraintBlock] = []
    mats: list[np.ndarray] = []
    col_idx: list[np.ndarray] = []
    row = 0
    offset = 0
    for pred in schema.ordinal_predictors:
        size = pred.n_levels - 1
        direction = Direction(dirs[pred.name])
        if direction is not Direction.UNCONSTRAINED:
            sign = 1.0 if direction is Direction.ISOTONIC else -1.0
            mats.append(_bidiagonal(size, sign))
            blocks.append(ConstraintBlock(pred.name, direction, (row, row + size)))
            col_idx.append(np.arange(offset, offset + size))
            row += size
        offset += size
    if mats:
        matrix = np.zeros((row, row))
        r = 0
        for m in mats:
            matrix[r : r + m.shape[0], r : r + m.shape[0]] = m
            r += m.shape[0]
        indices = np.concatenate(col_idx)
    else:
        matrix = np.zeros((0, 0))
        indices = np.zeros(0, dtype=int)
    return ConstraintSet(
        matrix=matrix,
        blocks=tuple(blocks),
        ord_indices=indices,
        n_ord_total=schema.n_ordinal_coefs,
    )


def constraint_values(cs: ConstraintSet, beta_ord: np.ndarray) -> np.ndarray:
    """C b for the constrained coefficients.

    Accepts either the full ordinal coefficient vector or the already
    selected constrained subvector.
    """
    beta_ord = np.asarray(beta_ord, dtype=float)
    if beta_ord.size == cs.n_ord_total:
        sub = beta_ord[cs.ord_indices]
    elif beta_ord.size == cs.n_rows:
        sub = beta_ord
    else:
        raise DimensionMismatchError(
            f"coefficient vector of length {beta_ord.size} matches neither the "
            f"full ordinal size {cs.n_ord_total} nor the constrained size {cs.n_rows}"
        )
    return cs.matrix @ sub


def is_feasible(cs: ConstraintSet, beta_ord: np.ndarray, tol: float = 1e-8) -> bool:
    """True iff every constraint row satisfies C b >= -tol."""
    if cs.n_rows == 0:
        return True
    return bool(np.all(constraint_values(cs, beta_ord) >= -tol))


def _pava_nondecreasing(y: np.ndarray) -> np.ndarray:
    """Least-squares nondecreasing fit by pool-adjacent-violators."""
    # stack of (level value, weight) pools merged from the left
    values: list[float] = []
    weights: list[float] = []
    for v in y:
        cur_v, cur_w = float(v), 1.0
        while values and values[-1] > cur_v:
            prev_v, prev_w = values.pop(), weights.pop()
            cur_v = (prev_v * prev_w + cur_v * cur_w) / (prev_w + cur_w)
            cur_w += prev_w
        values.append(cur_v)
        weights.append(cur_w)
    out = np.empty(len(y))
    pos = 0
    for v, w in zip(values, weights):
        out[pos : pos + int(w)] = v
        pos += int(w)
    return out


def monotone_project(beta_block: np.ndarray, direction: Direction | str) -> np.ndarray:
    """Euclidean projection of one predictor's coefficients onto its cone.

    The baseline coefficient is pinned at zero, so the isotonic cone is
    {0 <= b_2 <= ... <= b_q}: pool-adjacent-violators followed by clipping
    at zero (clipping commutes with pooling for interval bounds). The
    antitonic case is the negated problem.
    """
    direction = Direction(direction)
    b = np.asarray(beta_block, dtype=float)
    if b.size == 0:
        return b.copy()
    if direction is Direction.ANTITONIC:
        return -monotone_project(-b, Direction.ISOTONIC)
    if direction is not Direction.ISOTONIC:
        raise ValueError("projection direction must be isotonic or antitonic")
    return np.maximum(_pava_nondecreasing(b), 0.0)
