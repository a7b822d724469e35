"""
Quasi-Newton maximization of the profile log-likelihood over theta = (b0, beta, slant) with Q held fixed.

bfgs_minimize() is a plain minimizer over a callable objective; the comparators reuse it for the parametric
normal and skew-normal likelihoods.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from . import constants
from .exceptions import ConvergenceError, DomainError, ValidationError
from .models import LatentDistribution, StructuralParams, SurvivalDataset
from .npmle import log_component_matrix, log_mixture_density

__all__ = (
    "BfgsOptions",
    "BfgsState",
    "BfgsResult",
    "residuals",
    "profile_negloglik",
    "profile_gradient",
    "finite_difference_gradient",
    "bfgs_minimize",
    "fit_structural",
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BfgsOptions:
    tol: float | None = None
    max_iter: int = constants.BFGS_MAX_ITER
    ftol: float = constants.BFGS_FTOL
    armijo: float = constants.BFGS_ARMIJO
    shrink: float = constants.BFGS_SHRINK
    max_halvings: int = constants.BFGS_MAX_HALVINGS
    curvature_guard: float = constants.BFGS_CURVATURE_GUARD
    fd_step: float = constants.FD_STEP
    raise_on_failure: bool = False

    def tolerance(self, n: int) -> float:
        return self.tol if self.tol is not None else constants.BFGS_TOL_FACTOR * n


@dataclass(frozen=True, eq=False)
class BfgsState:
    """
    Iterate, Hessian approximation B and gradient carried between quasi-Newton steps.
    """

    theta: np.ndarray
    hessian_approx: np.ndarray
    gradient: np.ndarray
    step_count: int = 0

    def __post_init__(self):
        self.clean()

    def clean(self):
        dim = len(self.theta)
        if self.hessian_approx.shape != (dim, dim) or len(self.gradient) != dim:
            raise ValidationError("BFGS state dimensions disagree")

        if not np.allclose(self.hessian_approx, self.hessian_approx.T, atol=1e-10, rtol=0.0):
            raise ValidationError("Hessian approximation must be symmetric")

        try:
            linalg.cho_factor(self.hessian_approx)
        except linalg.LinAlgError:
            raise ValidationError("Hessian approximation must be positive definite")

    @classmethod
    def start(cls, theta, gradient) -> "BfgsState":
        theta = np.asarray(theta, dtype=float)
        return cls(theta=theta, hessian_approx=np.eye(len(theta)), gradient=np.asarray(gradient, dtype=float))

    def direction(self) -> np.ndarray:
        factor = linalg.cho_factor(self.hessian_approx)
        return -linalg.cho_solve(factor, self.gradient)

    def updated(self, theta, gradient, guard: float) -> "BfgsState":
        """
        Move to (theta, gradient) and apply the BFGS update of B unless the curvature condition fails.
        """
        step = theta - self.theta
        change = gradient - self.gradient
        curvature = float(change @ step)
        hessian = self.hessian_approx

        if curvature > guard * np.linalg.norm(change) * np.linalg.norm(step):
            hessian_step = hessian @ step
            candidate = (
                hessian
                + np.outer(change, change) / curvature
                - np.outer(hessian_step, hessian_step) / float(step @ hessian_step)
            )
            candidate = 0.5 * (candidate + candidate.T)
            try:
                linalg.cho_factor(candidate)
                hessian = candidate
            except linalg.LinAlgError:
                logger.debug("BFGS update lost positive definiteness; keeping the previous approximation")
        else:
            logger.debug(f"Skipping BFGS update, curvature {curvature:.3g} too small")

        return BfgsState(theta=theta, hessian_approx=hessian, gradient=gradient, step_count=self.step_count + 1)


@dataclass(frozen=True, eq=False)
class BfgsResult:
    x: np.ndarray
    fun: float
    gradient: np.ndarray
    iterations: int
    converged: bool
    message: str = ""


def residuals(theta: StructuralParams, data: SurvivalDataset) -> np.ndarray:
    if theta.p != data.p:
        raise ValidationError(f"theta has {theta.p} slopes but the data has {data.p} covariates")
    return data.log_times - theta.b0 - data.covariates @ theta.beta


def profile_negloglik(theta: StructuralParams, q: LatentDistribution, data: SurvivalDataset) -> float:
    """
    Negative censored mixture log-likelihood -l(theta, Q) at fixed Q.
    """
    log_matrix = log_component_matrix(residuals(theta, data), data.deltas, theta.slant, q.support)
    return -float(np.sum(log_mixture_density(log_matrix, q.weights)))


def finite_difference_gradient(fun, x, step: float = constants.FD_STEP) -> np.ndarray:
    """
    Central differences with step h_j = step * max(1, |x_j|).
    """
    x = np.asarray(x, dtype=float)
    gradient = np.empty_like(x)
    for j in range(len(x)):
        h = step * max(1.0, abs(x[j]))
        forward, backward = x.copy(), x.copy()
        forward[j] += h
        backward[j] -= h
        gradient[j] = (fun(forward) - fun(backward)) / (2.0 * h)
    return gradient


def profile_gradient(theta: StructuralParams, q: LatentDistribution, data: SurvivalDataset) -> np.ndarray:
    def objective(vector):
        return profile_negloglik(StructuralParams.from_vector(vector), q, data)

    return finite_difference_gradient(objective, theta.to_vector())


def _line_search(fun, x, value, gradient, direction, opts: BfgsOptions):
    slope = float(gradient @ direction)
    step = 1.0
    for _ in range(opts.max_halvings + 1):
        candidate = x + step * direction
        try:
            candidate_value = fun(candidate)
        except (DomainError, FloatingPointError, OverflowError):
            candidate_value = np.inf
        if np.isfinite(candidate_value) and candidate_value <= value + opts.armijo * step * slope:
            return candidate, candidate_value
        step *= opts.shrink
    return None, None


def bfgs_minimize(fun, x0, grad=None, opts: BfgsOptions | None = None, tol: float | None = None) -> BfgsResult:
    """
    Minimize fun from x0 with BFGS and an Armijo backtracking line search.

    grad defaults to central finite differences of fun. Stops when the sup-norm of the gradient is below tol or
    the objective changes by less than ftol * (1 + |f|).
    """
    opts = opts or BfgsOptions()
    tol = tol if tol is not None else (opts.tol if opts.tol is not None else constants.BFGS_TOL_FACTOR)
    grad = grad or (lambda x: finite_difference_gradient(fun, x, opts.fd_step))

    x = np.asarray(x0, dtype=float).copy()
    if not np.all(np.isfinite(x)):
        raise DomainError("bfgs_minimize needs a finite starting point")

    value = float(fun(x))
    if not np.isfinite(value):
        raise DomainError("objective is not finite at the starting point")

    state = BfgsState.start(x, grad(x))
    reset_used = False
    converged = False
    message = "iteration cap reached"

    while state.step_count < opts.max_iter:
        if np.max(np.abs(state.gradient)) <= tol:
            converged, message = True, "gradient below tolerance"
            break

        direction = state.direction()
        if float(state.gradient @ direction) >= 0:
            state = BfgsState.start(state.theta, state.gradient)
            direction = -state.gradient

        candidate, candidate_value = _line_search(fun, state.theta, value, state.gradient, direction, opts)
        if candidate is None:
            if reset_used:
                message = "line search failed after resetting the Hessian approximation"
                break
            logger.debug("Line search failed, resetting the Hessian approximation to the identity")
            reset_used = True
            state = BfgsState(state.theta, np.eye(len(state.theta)), state.gradient, state.step_count)
            continue

        previous = value
        state = state.updated(candidate, grad(candidate), opts.curvature_guard)
        value = float(candidate_value)

        if abs(previous - value) <= opts.ftol * (1.0 + abs(previous)):
            converged, message = True, "objective change below tolerance"
            break

    if not converged:
        logger.warning(f"BFGS stopped after {state.step_count} iterations: {message}")
        if opts.raise_on_failure:
            raise ConvergenceError(message)

    return BfgsResult(
        x=state.theta,
        fun=value,
        gradient=state.gradient,
        iterations=state.step_count,
        converged=converged,
        message=message,
    )


def fit_structural(
    initial: StructuralParams,
    q: LatentDistribution,
    data: SurvivalDataset,
    opts: BfgsOptions | None = None,
    fix_slant: bool = False,
) -> tuple[StructuralParams, BfgsResult]:
    """
    Minimize the profile negative log-likelihood over theta (or over (b0, beta) when the slant is fixed).
    """
    opts = opts or BfgsOptions()
    full = initial.to_vector()

    if fix_slant:

        def expand(vector):
            return np.concatenate([vector, [initial.slant]])

        x0 = full[:-1]
    else:

        def expand(vector):
            return vector

        x0 = full

    def objective(vector):
        return profile_negloglik(StructuralParams.from_vector(expand(vector)), q, data)

    result = bfgs_minimize(objective, x0, opts=opts, tol=opts.tolerance(data.n))
    theta = StructuralParams.from_vector(expand(result.x))
    logger.debug(f"Structural step: -loglik={result.fun:.10g} after {result.iterations} iterations ({result.message})")
    return theta, result
