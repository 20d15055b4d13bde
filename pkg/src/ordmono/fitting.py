"""Model fitting: unconstrained Newton MLE and log-barrier constrained MLE.

Intercepts are optimized as (alpha_1, log-increments) so that every point
the line search probes has strictly increasing intercepts and a defined
likelihood. Constrained fits maximize loglik + mu * sum(log(C b)) over a
decreasing barrier schedule, started strictly inside the cone from a
projected unconstrained estimate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import nnls
from scipy.stats import norm

from .constraints import ConstraintSet, Direction, monotone_project
from .design import DesignMatrix, ParameterLayout, parameter_layout
from .errors import (
    ConstrainedFitHasNoSEError,
    EmptyCategoryError,
    InputError,
    NonconvergenceError,
    SeparationError,
)
from .likelihood import ParameterVector, _core

GRAD_TOL = 1e-6            # unconstrained stationarity, max-norm
PROJ_GRAD_TOL = 1e-5       # constrained KKT residual, max-norm
ACTIVE_TOL = 1e-6          # constraint row counts as active below this
SEPARATION_BOUND = 30.0    # |beta| beyond this on the logit scale
MAX_OUTER = 200
MAX_INNER = 50
BARRIER_MU0 = 1e-2
BARRIER_SHRINK = 0.2
BARRIER_MU_MIN = 1e-9
STRICT_EPS = 1e-4          # minimum gap pulled into the cone for the start


@dataclass(frozen=True, eq=False)
class FitResult:
    """Outcome of one maximum-likelihood fit.

    se is None for constrained fits (no asymptotic theory for them);
    active_constraints is None for unconstrained fits. outer_loglik_trace
    records the true log-likelihood after each barrier stage.
    """

    params: ParameterVector
    se: np.ndarray | None
    loglik: float
    converged: bool
    iterations: int
    active_constraints: tuple[int, ...] | None
    strategy_tag: str
    layout: ParameterLayout
    outer_loglik_trace: tuple[float, ...] | None = None

    @property
    def beta_ord(self) -> np.ndarray:
        return self.params.beta[: self.layout.n_ordinal]


def _check_design(design: DesignMatrix) -> None:
    counts = design.Y.sum(axis=0)
    for j, c in enumerate(counts):
        if c == 0:
            raise EmptyCategoryError(
                f"response category {design.schema.response_levels[j]!r} has zero "
                "observations; the fit is degenerate"
            )
    X = design.X
    for j, info in enumerate(design.column_map):
        if info.kind in ("ordinal", "nominal") and not np.any(X[:, j] != 0.0):
            raise EmptyCategoryError(
                f"category {info.level!r} of predictor {info.name!r} has zero observations"
            )


# -- intercept reparameterization -------------------------------------------

def _alpha_to_theta(alpha: np.ndarray) -> np.ndarray:
    diffs = np.diff(alpha)
    return np.concatenate([[alpha[0]], np.log(diffs)]) if alpha.size > 1 else alpha.copy()


def _theta_to_alpha(theta_a: np.ndarray) -> np.ndarray:
    if theta_a.size == 1:
        return theta_a.copy()
    return theta_a[0] + np.concatenate([[0.0], np.cumsum(np.exp(theta_a[1:]))])


def _alpha_jacobian(theta_a: np.ndarray) -> np.ndarray:
    m = theta_a.size
    J = np.zeros((m, m))
    J[:, 0] = 1.0
    inc = np.exp(theta_a[1:])
    for col in range(1, m):
        J[col:, col] = inc[col - 1]
    return J


def _pullback(theta_a: np.ndarray, g: np.ndarray, H: np.ndarray):
    """Gradient/Hessian of the objective in (alpha_1, log-increments, beta)."""
    m = theta_a.size
    J = _alpha_jacobian(theta_a)
    g_a, g_b = g[:m], g[m:]
    gt = np.concatenate([J.T @ g_a, g_b])
    H_aa, H_ab, H_bb = H[:m, :m], H[:m, m:], H[m:, m:]
    Ht = np.block([[J.T @ H_aa @ J, J.T @ H_ab], [H_ab.T @ J, H_bb]])
    # curvature of alpha_j(theta): diagonal in the log-increment coordinates
    if m > 1:
        inc = np.exp(theta_a[1:])
        tail = np.cumsum(g_a[::-1])[::-1]  # sum_{j>=m} g_alpha[j]
        corr = inc * tail[1:]
        idx = np.arange(1, m)
        Ht[idx, idx] += corr
    return gt, Ht


def _ascent_direction(g: np.ndarray, H: np.ndarray) -> np.ndarray:
    """Newton direction for maximization, with ridge escalation until usable."""
    A = -H
    scale = max(1.0, float(np.max(np.abs(np.diag(A)))))
    ridge = 0.0
    for _ in range(12):
        try:
            L = np.linalg.cholesky(A + ridge * np.eye(A.shape[0]))
        except np.linalg.LinAlgError:
            ridge = scale * 1e-8 if ridge == 0.0 else ridge * 100.0
            continue
        d = np.linalg.solve(L.T, np.linalg.solve(L, g))
        if d @ g > 0.0:
            return d
        ridge = scale * 1e-8 if ridge == 0.0 else ridge * 100.0
    return g / scale  # steepest ascent fallback


def _check_separation(beta: np.ndarray, layout: ParameterLayout) -> None:
    worst = int(np.argmax(np.abs(beta)))
    if abs(beta[worst]) > SEPARATION_BOUND:
        label = layout.beta_entries()[worst].label
        raise SeparationError(
            f"coefficient for {label} exceeded {SEPARATION_BOUND:g} on the logit "
            "scale; the data appear to be separated",
            column=label,
        )


def _newton(theta0, objective, max_iter, converged, layout, cap_message):
    """Damped Newton ascent with Armijo step halving.

    objective(theta, order) returns (f, grad, hess) in the optimization
    space, f = -inf for points outside the domain. converged(theta, grad,
    decrement) decides stationarity; the decrement 0.5 * g'd bounds the
    remaining improvement and stays meaningful where boundary
    ill-conditioning puts a floor under the achievable gradient norm.
    Returns (theta, iterations).
    """
    theta = np.asarray(theta0, dtype=float)
    f, g, H = objective(theta, 2)
    if not np.isfinite(f):
        raise NonconvergenceError("objective is not finite at the starting point")
    for it in range(max_iter + 1):
        d = _ascent_direction(g, H)
        slope = float(d @ g)
        if converged(theta, g, 0.5 * slope):
            return theta, it
        if it == max_iter:
            raise NonconvergenceError(cap_message)
        step = 1.0
        accepted = False
        for _ in range(60):
            cand = theta + step * d
            fc, _, _ = objective(cand, 0)
            if np.isfinite(fc) and fc >= f + 1e-4 * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            raise NonconvergenceError(
                "line search could not improve the objective before reaching "
                "the convergence tolerance"
            )
        theta = cand
        _check_separation(theta[layout.n_alpha :], layout)
        f, g, H = objective(theta, 2)
    raise NonconvergenceError(cap_message)


# -- unconstrained fit -------------------------------------------------------

def _start_theta(design: DesignMatrix) -> np.ndarray:
    counts = design.Y.sum(axis=0)
    cum = np.cumsum(counts)[:-1] / design.n
    alpha0 = np.log(cum / (1.0 - cum))
    return np.concatenate([_alpha_to_theta(alpha0), np.zeros(design.X.shape[1])])


def _theta_to_params(theta: np.ndarray, n_alpha: int) -> ParameterVector:
    return ParameterVector(_theta_to_alpha(theta[:n_alpha]), theta[n_alpha:])


def fit_unconstrained(design: DesignMatrix, strategy_tag: str = "umle") -> FitResult:
    """Maximum-likelihood fit with standard errors from the observed information."""
    _check_design(design)
    layout = parameter_layout(design.schema)
    n_alpha = layout.n_alpha

    def objective(theta, order):
        alpha = _theta_to_alpha(theta[:n_alpha])
        ll, g, H = _core(alpha, theta[n_alpha:], design, 2 if order else 0)
        if order == 0 or g is None:
            return ll, None, None
        gt, Ht = _pullback(theta[:n_alpha], g, H)
        return ll, gt, Ht

    def converged(theta, _gt, _dec):
        alpha = _theta_to_alpha(theta[:n_alpha])
        _, g, _ = _core(alpha, theta[n_alpha:], design, 1)
        return g is not None and float(np.max(np.abs(g))) < GRAD_TOL

    theta, iters = _newton(
        _start_theta(design),
        objective,
        MAX_OUTER,
        converged,
        layout,
        f"unconstrained fit hit the {MAX_OUTER}-iteration cap",
    )
    params = _theta_to_params(theta, n_alpha)
    ll, _, H = _core(params.alpha, params.beta, design, 2)
    info = -H
    try:
        cov = np.linalg.inv(info)
    except np.linalg.LinAlgError:
        raise NonconvergenceError(
            "observed information is singular at the optimum"
        ) from None
    se = np.sqrt(np.maximum(np.diag(cov), 0.0))
    return FitResult(
        params=params,
        se=se,
        loglik=ll,
        converged=True,
        iterations=iters,
        active_constraints=None,
        strategy_tag=strategy_tag,
        layout=layout,
    )


# -- constrained fit ---------------------------------------------------------

def _strictly_feasible_start(
    umle: FitResult, cs: ConstraintSet, layout: ParameterLayout
) -> np.ndarray:
    """Project the UMLE onto the cone, then enforce a minimum gap of STRICT_EPS."""
    beta = umle.params.beta.copy()
    for block in cs.blocks:
        start, stop = layout.ordinal_block(block.predictor)
        proj = monotone_project(beta[start:stop], block.direction)
        sign = 1.0 if block.direction is Direction.ISOTONIC else -1.0
        mono = sign * proj  # nondecreasing view with implicit 0 baseline
        prev = 0.0
        for i in range(mono.size):
            if mono[i] < prev + STRICT_EPS:
                mono[i] = prev + STRICT_EPS
            prev = mono[i]
        beta[start:stop] = sign * mono
    return np.concatenate([_alpha_to_theta(umle.params.alpha), beta])


def fit_constrained(
    design: DesignMatrix,
    cs: ConstraintSet,
    strategy_tag: str = "cmle",
    umle: FitResult | None = None,
) -> FitResult:
    """Monotonicity-constrained MLE via a logarithmic barrier.

    Maximizes loglik + mu * sum(log(C b)) for mu = 1e-2, shrinking by 0.2
    per stage until mu < 1e-9, each stage solved by damped Newton warm
    started from the previous one. Convergence is declared when the
    gradient, reduced by the best nonnegative combination of active
    constraint normals, has max-norm below 1e-5.

    A precomputed unconstrained fit of the same design may be passed to
    skip refitting it for the feasible start.
    """
    if umle is None:
        umle = fit_unconstrained(design, strategy_tag="umle")
    layout = umle.layout
    n_alpha = layout.n_alpha
    n_params = len(layout)

    if cs.n_rows == 0:
        return FitResult(
            params=umle.params,
            se=None,
            loglik=umle.loglik,
            converged=True,
            iterations=umle.iterations,
            active_constraints=(),
            strategy_tag=strategy_tag,
            layout=layout,
            outer_loglik_trace=(umle.loglik,),
        )

    A_beta = np.zeros((cs.n_rows, layout.n_beta))
    A_beta[:, cs.ord_indices] = cs.matrix

    def cons_values(theta):
        return A_beta @ theta[n_alpha:]

    def objective_for(mu):
        def objective(theta, order):
            c = cons_values(theta)
            if np.any(c <= 0.0):
                return -np.inf, None, None
            alpha = _theta_to_alpha(theta[:n_alpha])
            ll, g, H = _core(alpha, theta[n_alpha:], design, 2 if order else 0)
            if not np.isfinite(ll):
                return -np.inf, None, None
            f = ll + mu * float(np.sum(np.log(c)))
            if order == 0:
                return f, None, None
            g = g.copy()
            g[n_alpha:] += mu * (A_beta.T @ (1.0 / c))
            H = H.copy()
            H[n_alpha:, n_alpha:] -= mu * (A_beta.T @ (A_beta / (c**2)[:, None]))
            gt, Ht = _pullback(theta[:n_alpha], g, H)
            return f, gt, Ht
        return objective

    theta = _strictly_feasible_start(umle, cs, layout)
    if np.any(cons_values(theta) <= 0.0):  # must not happen
        raise NonconvergenceError("internal error: strictified start is infeasible")

    total_iters = 0
    trace: list[float] = []
    mu = BARRIER_MU0
    outer = 0
    while True:
        outer += 1
        if outer > MAX_OUTER:
            raise NonconvergenceError(f"barrier loop hit the {MAX_OUTER}-stage cap")
        tol = min(1e-5, max(1e-8, mu * 1e-4))

        def inner_converged(_theta, gt, dec, _tol=tol):
            return float(np.max(np.abs(gt))) < _tol or dec < 1e-10

        theta, iters = _newton(
            theta,
            objective_for(mu),
            MAX_INNER,
            inner_converged,
            layout,
            f"barrier stage (mu={mu:g}) hit the {MAX_INNER}-iteration cap",
        )
        total_iters += iters
        alpha = _theta_to_alpha(theta[:n_alpha])
        ll, g, _ = _core(alpha, theta[n_alpha:], design, 1)
        trace.append(ll)
        if mu < BARRIER_MU_MIN:
            break
        mu *= BARRIER_SHRINK

    c = cons_values(theta)
    active = tuple(int(r) for r in np.nonzero(c < ACTIVE_TOL)[0])
    # KKT stationarity: residual of the gradient after removing the best
    # nonnegative combination of active constraint normals
    if active:
        A_full = np.zeros((len(active), n_params))
        A_full[:, n_alpha:] = A_beta[list(active)]
        lam, _ = nnls(-A_full.T, g)
        resid = g + A_full.T @ lam
    else:
        resid = g
    converged = float(np.max(np.abs(resid))) < PROJ_GRAD_TOL
    return FitResult(
        params=_theta_to_params(theta, n_alpha),
        se=None,
        loglik=float(trace[-1]),
        converged=converged,
        iterations=total_iters,
        active_constraints=active,
        strategy_tag=strategy_tag,
        layout=layout,
        outer_loglik_trace=tuple(trace),
    )


# -- confidence intervals ----------------------------------------------------

def wald_ci(fit: FitResult, level: float) -> np.ndarray:
    """Per-parameter Wald intervals, shape (n_params, 2), aligned to the layout."""
    if fit.se is None:
        raise ConstrainedFitHasNoSEError(
            "constrained fits carry no standard errors; use the unconstrained fit"
        )
    if not (0.0 < level < 1.0):
        raise InputError(f"confidence level must be in (0, 1), got {level}")
    z = norm.ppf(0.5 + level / 2.0)
    est = fit.params.as_array()
    half = z * fit.se
    return np.column_stack([est - half, est + half])


def predictor_ci_bounds(fit: FitResult, predictor: str, level: float) -> np.ndarray:
    """CI bounds for one ordinal predictor's categories, shape (q, 2).

    Row 0 is the degenerate [0, 0] interval of the baseline category; rows
    1..q-1 are the Wald intervals of the dummy coefficients.
    """
    ci = wald_ci(fit, level)
    start, stop = fit.layout.ordinal_block(predictor)
    block = ci[fit.layout.n_alpha + start : fit.layout.n_alpha + stop]
    return np.vstack([np.zeros((1, 2)), block])
