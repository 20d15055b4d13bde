"""Proportional odds likelihood: probabilities, log-likelihood, derivatives.

The model is logit P(y <= j | x) = alpha_j + x'beta, j = 1..k-1, with
strictly increasing intercepts. Cell probabilities are differences of
adjacent logistic CDF values; they are computed through the factorization

    sigma(a) - sigma(b) = sigma(a) * sigma(-b) * (1 - exp(b - a)),  b < a,

which avoids catastrophic cancellation when adjacent cut points are close.
Gradient and observed information (negative Hessian) are analytic.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .design import DesignMatrix
from .errors import NonIncreasingInterceptsError, ProbabilityUnderflowError

_TINY = sys.float_info.min  # smallest positive normal double


@dataclass(frozen=True, eq=False)
class ParameterVector:
    """Model parameters: intercepts alpha (length k-1) and coefficients beta.

    beta is aligned to the schema's parameter layout (ordinal blocks, then
    nominal, then numeric).
    """

    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "alpha", np.asarray(self.alpha, dtype=float))
        object.__setattr__(self, "beta", np.asarray(self.beta, dtype=float))

    @property
    def k(self) -> int:
        return self.alpha.size + 1

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.alpha, self.beta])

    def check_intercepts(self) -> None:
        if self.alpha.size and not np.all(np.diff(self.alpha) > 0):
            raise NonIncreasingInterceptsError(
                f"intercepts must be strictly increasing, got {self.alpha.tolist()}"
            )


@dataclass(frozen=True, eq=False)
class LikelihoodEvaluation:
    """Log-likelihood with analytic gradient and observed information."""

    loglik: float
    gradient: np.ndarray
    observed_information: np.ndarray


def _logistic_density(x: np.ndarray) -> np.ndarray:
    # sigma'(x) = sigma(x) * sigma(-x); both factors stay in (0, 1)
    return expit(x) * expit(-x)


def category_probs(params: ParameterVector, design_row: np.ndarray) -> np.ndarray:
    """All k response-category probabilities for one covariate row."""
    params.check_intercepts()
    row = np.asarray(design_row, dtype=float)
    return category_prob_matrix(params, row[None, :])[0]


def category_prob_matrix(params: ParameterVector, X: np.ndarray) -> np.ndarray:
    """Response-category probabilities for every row of X, shape (n, k)."""
    alpha, beta = params.alpha, params.beta
    k = params.k
    eta = X @ beta
    cuts = alpha[None, :] + eta[:, None]  # (n, k-1)
    probs = np.empty((X.shape[0], k))
    probs[:, 0] = expit(cuts[:, 0])
    probs[:, k - 1] = expit(-cuts[:, k - 2])
    if k > 2:
        a = cuts[:, 1:]
        b = cuts[:, :-1]
        probs[:, 1 : k - 1] = expit(a) * expit(-b) * (-np.expm1(b - a))
    return probs


def _observed_cell_quantities(alpha: np.ndarray, beta: np.ndarray, design: DesignMatrix):
    """Per-observation pieces at the observed response cell.

    Returns (pi, gu, gl, u, w, has_u, has_l): cell probability, CDF values
    at the upper/lower cut, logistic densities there (0 past the boundary),
    and boundary masks.
    """
    k = design.k
    X = design.X
    c = design.y_index
    eta = X @ beta
    has_u = c < k - 1
    has_l = c > 0

    a = alpha[np.minimum(c, k - 2)] + eta
    b = alpha[np.maximum(c - 1, 0)] + eta

    gu = np.where(has_u, expit(a), 1.0)
    gl = np.where(has_l, expit(b), 0.0)
    u = np.where(has_u, _logistic_density(a), 0.0)
    w = np.where(has_l, _logistic_density(b), 0.0)

    interior = has_u & has_l
    pi = np.where(has_u, gu, expit(-b))  # single-cut cells
    pi = np.where(~has_l, gu, pi)
    if np.any(interior):
        diff = expit(a) * expit(-b) * (-np.expm1(b - a))
        pi = np.where(interior, diff, pi)
    return pi, gu, gl, u, w, has_u, has_l


def _core(
    alpha: np.ndarray,
    beta: np.ndarray,
    design: DesignMatrix,
    order: int,
) -> tuple[float, np.ndarray | None, np.ndarray | None]:
    """Log-likelihood and, per `order`, gradient (1) and Hessian (2).

    Returns -inf for the log-likelihood (with None derivatives) when an
    observed cell probability underflows; callers decide whether that is an
    error or a rejected line-search step.
    """
    pi, gu, gl, u, w, has_u, has_l = _observed_cell_quantities(alpha, beta, design)
    if np.any(pi < _TINY):
        return -np.inf, None, None
    ll = float(np.sum(np.log(pi)))
    if order == 0:
        return ll, None, None

    k = design.k
    X = design.X
    c = design.y_index
    n_alpha = k - 1
    p = X.shape[1]

    ru = u / pi  # d loglik / d upper cut
    rl = w / pi  # -(d loglik / d lower cut)
    g_alpha = np.bincount(
        c[has_u], weights=ru[has_u], minlength=n_alpha
    ) - np.bincount((c - 1)[has_l], weights=rl[has_l], minlength=n_alpha)
    g_beta = X.T @ (ru - rl)
    gradient = np.concatenate([g_alpha, g_beta])
    if order == 1:
        return ll, gradient, None

    # second derivatives of log pi w.r.t. the two cut values
    faa = np.where(has_u, u * (1.0 - 2.0 * gu) / pi - ru**2, 0.0)
    fbb = np.where(has_l, -w * (1.0 - 2.0 * gl) / pi - rl**2, 0.0)
    fab = np.where(has_u & has_l, u * w / pi**2, 0.0)

    H_bb = X.T @ (X * (faa + 2.0 * fab + fbb)[:, None])
    H_ab = np.zeros((n_alpha, p))
    np.add.at(H_ab, c[has_u], (X * (faa + fab)[:, None])[has_u])
    np.add.at(H_ab, (c - 1)[has_l], (X * (fbb + fab)[:, None])[has_l])
    diag = np.bincount(c[has_u], weights=faa[has_u], minlength=n_alpha) + np.bincount(
        (c - 1)[has_l], weights=fbb[has_l], minlength=n_alpha
    )
    H_aa = np.diag(diag)
    both = has_u & has_l
    if n_alpha > 1 and np.any(both):
        sub = np.bincount((c - 1)[both], weights=fab[both], minlength=n_alpha - 1)
        idx = np.arange(n_alpha - 1)
        H_aa[idx + 1, idx] += sub
        H_aa[idx, idx + 1] += sub

    hessian = np.block([[H_aa, H_ab], [H_ab.T, H_bb]])
    return ll, gradient, hessian


def loglik(params: ParameterVector, design: DesignMatrix) -> float:
    """Sum of observed-cell log probabilities.

    Raises ProbabilityUnderflowError if any observed cell probability falls
    below the smallest positive normal double (separation / divergence).
    """
    params.check_intercepts()
    ll, _, _ = _core(params.alpha, params.beta, design, order=0)
    if not np.isfinite(ll):
        raise ProbabilityUnderflowError(
            "an observed cell probability underflowed; the fit is diverging"
        )
    return ll


def evaluate(params: ParameterVector, design: DesignMatrix) -> LikelihoodEvaluation:
    """Log-likelihood, analytic gradient, and observed information."""
    params.check_intercepts()
    ll, grad, hess = _core(params.alpha, params.beta, design, order=2)
    if not np.isfinite(ll):
        raise ProbabilityUnderflowError(
            "an observed cell probability underflowed; the fit is diverging"
        )
    return LikelihoodEvaluation(
        loglik=ll, gradient=grad, observed_information=-hess
    )
