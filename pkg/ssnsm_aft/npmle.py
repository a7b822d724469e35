"""
Nonparametric MLE of the latent scale distribution Q with the structural parameters held fixed.

The constrained Newton method for multiple support points alternates between adding the local maximizers of the
directional derivative to the support and re-solving the weights through a non-negative least squares system.
Likelihood components are carried as logarithms throughout, and a vertex-direction step with EM polishing takes
over whenever the least squares step cannot raise the log-likelihood.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

from . import constants
from .distributions import skewnormal_logpdf, skewnormal_logsf
from .exceptions import DomainError, ValidationError
from .models import LatentDistribution
from .utils import sample_scale

__all__ = (
    "CnmOptions",
    "CnmResult",
    "log_component_matrix",
    "component_matrix",
    "mixture_loglik",
    "log_mixture_density",
    "directional_derivative",
    "nnls_proposal",
    "nnls_weight_update",
    "sigma_bounds",
    "cnm_fit",
)

logger = logging.getLogger(__name__)

EXP_CAP = 700.0


@dataclass(frozen=True)
class CnmOptions:
    grad_tol: float | None = None
    max_iter: int = constants.CNM_MAX_ITER
    grid_points: int = constants.CNM_GRID_POINTS
    refine_xtol: float = constants.CNM_REFINE_XTOL
    merge_factor: float = constants.SUPPORT_MERGE_FACTOR

    def tolerance(self, n: int) -> float:
        return self.grad_tol if self.grad_tol is not None else constants.CNM_GRAD_TOL_FACTOR * n


@dataclass(frozen=True)
class CnmResult:
    q: LatentDistribution
    loglik: float
    converged: bool
    iterations: int
    max_gradient: float
    bounds: tuple
    trace: tuple = ()


def log_component_matrix(residuals, deltas, slant: float, support) -> np.ndarray:
    """
    n x K matrix of delta_i log f(e_i; sigma_k) + (1 - delta_i) log S(e_i; sigma_k).
    """
    residuals = np.asarray(residuals, dtype=float).reshape(-1)
    deltas = np.asarray(deltas).reshape(-1)
    support = np.asarray(support, dtype=float).reshape(-1)

    if len(residuals) != len(deltas):
        raise ValidationError("residuals and deltas must have the same length")
    if len(support) == 0:
        raise ValidationError("support must contain at least one point")
    if np.any(support <= 0):
        raise DomainError("support points must be positive")

    entries = np.empty((len(residuals), len(support)))
    observed = deltas == 1
    if observed.any():
        entries[observed] = skewnormal_logpdf(residuals[observed, None], support[None, :], slant)
    if (~observed).any():
        entries[~observed] = skewnormal_logsf(residuals[~observed, None], support[None, :], slant)
    return entries


def component_matrix(residuals, deltas, slant: float, support) -> np.ndarray:
    """
    n x K matrix of f(e_i; sigma_k)^delta_i * S(e_i; sigma_k)^(1 - delta_i), floored away from zero.
    """
    return np.maximum(np.exp(log_component_matrix(residuals, deltas, slant, support)), constants.SURVIVAL_FLOOR)


def mixture_loglik(matrix, weights) -> float:
    matrix = np.asarray(matrix, dtype=float)
    weights = np.asarray(weights, dtype=float).reshape(-1)
    if matrix.ndim != 2 or matrix.shape[1] != len(weights):
        raise ValidationError(f"weights of length {len(weights)} do not match a matrix of shape {matrix.shape}")

    density = np.maximum(matrix @ weights, constants.SURVIVAL_FLOOR)
    return float(np.sum(np.log(density)))


def log_mixture_density(log_matrix, weights) -> np.ndarray:
    """
    Per-row log sum_k w_k exp(log_matrix[i, k]); zero weights drop out.
    """
    log_matrix = np.asarray(log_matrix, dtype=float)
    weights = np.asarray(weights, dtype=float).reshape(-1)
    if log_matrix.ndim != 2 or log_matrix.shape[1] != len(weights):
        raise ValidationError(f"weights of length {len(weights)} do not match a matrix of shape {log_matrix.shape}")

    with np.errstate(divide="ignore"):
        return special.logsumexp(log_matrix + np.log(weights)[None, :], axis=1)


def _gradient(log_columns: np.ndarray, log_density: np.ndarray) -> np.ndarray:
    # sum_i exp(log m_ik - log d_i) - n, capped before exp so a hopeless Q still ranks the columns
    totals = special.logsumexp(log_columns - log_density[:, None], axis=0)
    return np.exp(np.minimum(totals, EXP_CAP)) - len(log_density)


def directional_derivative(sigma, matrix, weights, residuals, deltas, slant: float, sigma_min: float = 0.0):
    """
    Gateaux derivative of the mixture log-likelihood from Q towards a point mass at sigma (scalar or array).
    """
    sigma_array = np.atleast_1d(np.asarray(sigma, dtype=float))
    if not np.all(np.isfinite(sigma_array)) or np.any(sigma_array <= 0) or np.any(sigma_array < sigma_min):
        raise DomainError(f"sigma must be at least sigma_min={sigma_min!r}")

    density = np.asarray(matrix, dtype=float) @ np.asarray(weights, dtype=float)
    if np.any(density <= 0):
        raise DomainError("current mixture densities must be positive")

    candidate = log_component_matrix(residuals, deltas, slant, sigma_array)
    values = _gradient(candidate, np.log(density))
    return float(values[0]) if np.ndim(sigma) == 0 else values


def _loglik(log_matrix: np.ndarray, weights: np.ndarray) -> float:
    return float(np.sum(log_mixture_density(log_matrix, weights)))


def _em_polish(log_matrix: np.ndarray, weights: np.ndarray, steps: int) -> np.ndarray:
    # Multiplicative EM updates never lower the log-likelihood and keep the weights on the simplex
    for _ in range(steps):
        with np.errstate(divide="ignore"):
            log_posterior = log_matrix + np.log(weights)[None, :]
        log_posterior -= log_mixture_density(log_matrix, weights)[:, None]
        weights = np.exp(log_posterior).mean(axis=0)
        weights = weights / weights.sum()
    return weights


def _vertex_step(log_matrix: np.ndarray, current: np.ndarray, baseline: float) -> np.ndarray:
    """
    Fallback weight step: move towards the column with the largest directional derivative, halving the step until
    the log-likelihood rises, then polish with EM.
    """
    gains = _gradient(log_matrix, log_mixture_density(log_matrix, current))
    best = int(np.argmax(gains))
    if gains[best] <= 0:
        return current

    vertex = np.zeros_like(current)
    vertex[best] = 1.0
    step = 1.0
    for _ in range(constants.NNLS_MAX_HALVINGS):
        candidate = (1.0 - step) * current + step * vertex
        if _loglik(log_matrix, candidate) > baseline:
            return _em_polish(log_matrix, candidate, constants.CNM_EM_STEPS)
        step *= 0.5
    return current


def _backtrack(log_matrix, current, proposal, baseline) -> np.ndarray | None:
    if np.allclose(proposal, current, rtol=0.0, atol=1e-14):
        return current

    step = 1.0
    for _ in range(constants.NNLS_MAX_HALVINGS):
        candidate = current + step * (proposal - current)
        candidate = np.where(candidate > 0, candidate, 0.0)
        candidate = candidate / candidate.sum()
        if _loglik(log_matrix, candidate) > baseline:
            return candidate
        step *= 0.5
    return None


def _nnls_proposal(log_matrix: np.ndarray, current: np.ndarray) -> np.ndarray | None:
    n, k = log_matrix.shape
    log_ratio = log_matrix - log_mixture_density(log_matrix, current)[:, None]

    # Rows of the Jacobian m_ik / d_i are scaled down to at most NNLS_ROW_CAP, targets with them
    row_scale = np.minimum(0.0, np.log(constants.NNLS_ROW_CAP) - log_ratio.max(axis=1))
    jacobian = np.exp(log_ratio + row_scale[:, None])
    design = np.vstack([jacobian, np.full((1, k), float(n))])
    target = np.concatenate([2.0 * np.exp(row_scale), [float(n)]])

    try:
        proposal, _ = optimize.nnls(design, target, maxiter=50 * k)
    except RuntimeError as e:
        logger.debug(f"NNLS did not converge ({e}); falling back to a vertex-direction step")
        return None

    # Columns with no mass anywhere carry no information
    proposal[np.all(np.isneginf(log_matrix), axis=0)] = 0.0
    return proposal


def _weight_step(log_matrix: np.ndarray, current: np.ndarray) -> np.ndarray:
    if log_matrix.shape[1] == 1:
        return np.ones(1)

    current = current / current.sum()
    baseline = _loglik(log_matrix, current)
    proposal = _nnls_proposal(log_matrix, current)
    if proposal is not None and proposal.sum() > 0:
        updated = _backtrack(log_matrix, current, proposal / proposal.sum(), baseline)
        if updated is not None:
            return updated

    return _vertex_step(log_matrix, current, baseline)


def nnls_proposal(matrix, current_weights) -> np.ndarray | None:
    """
    Raw minimizer over a >= 0 of |J a - 2|^2 + (n 1'a - n)^2, J_ik = m_ik / sum_l m_il w_l, before normalization.
    None when the NNLS solver gives up.
    """
    matrix = np.asarray(matrix, dtype=float)
    current = np.asarray(current_weights, dtype=float).reshape(-1)
    if matrix.ndim != 2 or matrix.shape[1] != len(current):
        raise ValidationError("current_weights do not match the matrix width")

    with np.errstate(divide="ignore"):
        return _nnls_proposal(np.log(matrix), current / current.sum())


def nnls_weight_update(matrix, current_weights) -> np.ndarray:
    """
    One constrained-Newton weight step: solve the stacked NNLS system, then backtrack towards the current weights
    until the log-likelihood rises. When neither works, step towards the best single column instead.
    """
    matrix = np.asarray(matrix, dtype=float)
    current = np.asarray(current_weights, dtype=float).reshape(-1)
    if matrix.ndim != 2 or matrix.shape[1] != len(current):
        raise ValidationError("current_weights do not match the matrix width")

    with np.errstate(divide="ignore"):
        return _weight_step(np.log(matrix), current)


def sigma_bounds(residuals, deltas) -> tuple[float, float]:
    """
    Data-scaled bounds [1e-3 s, 10 s] of the scale search, s the spread of the uncensored residuals.
    """
    residuals = np.asarray(residuals, dtype=float)
    observed = residuals[np.asarray(deltas) == 1]
    scale = sample_scale(observed if len(observed) >= 2 else residuals)
    return constants.SIGMA_MIN_FACTOR * scale, constants.SIGMA_MAX_FACTOR * scale


def _conform(q: LatentDistribution, lower: float, upper: float, merge_tol: float) -> tuple[np.ndarray, np.ndarray]:
    support = np.clip(q.support, lower, upper)
    weights = np.array(q.weights)
    merged_support, merged_weights = [support[0]], [weights[0]]
    for point, weight in zip(support[1:], weights[1:]):
        if point - merged_support[-1] < merge_tol:
            merged_weights[-1] += weight
        else:
            merged_support.append(point)
            merged_weights.append(weight)
    merged_weights = np.array(merged_weights)
    return np.array(merged_support), merged_weights / merged_weights.sum()


def _local_maxima(values: np.ndarray) -> np.ndarray:
    """
    Indices of grid local maxima, endpoints included when they beat their single neighbour.
    """
    if len(values) == 1:
        return np.array([0])
    left = np.concatenate([[-np.inf], values[:-1]])
    right = np.concatenate([values[1:], [-np.inf]])
    return np.flatnonzero((values >= left) & (values > right))


def _refine(index, grid, gradient, objective, xtol) -> tuple[float, float]:
    """
    Polish a grid maximizer of the directional derivative by a bounded scalar search in log-sigma.
    """
    lower = np.log(grid[max(index - 1, 0)])
    upper = np.log(grid[min(index + 1, len(grid) - 1)])
    if upper <= lower:
        return grid[index], gradient[index]

    result = optimize.minimize_scalar(
        lambda u: -objective(np.exp(u)),
        bounds=(lower, upper),
        method="bounded",
        options={"xatol": xtol},
    )
    if result.success and -result.fun > gradient[index]:
        return float(np.exp(result.x)), float(-result.fun)
    return float(grid[index]), float(gradient[index])


def cnm_fit(
    residuals,
    deltas,
    slant: float,
    initial_q: LatentDistribution | None = None,
    opts: CnmOptions | None = None,
    bounds: tuple[float, float] | None = None,
) -> CnmResult:
    """
    Maximize the censored mixture log-likelihood over Q for fixed residuals and slant.
    """
    opts = opts or CnmOptions()
    residuals = np.asarray(residuals, dtype=float).reshape(-1)
    deltas = np.asarray(deltas, dtype=int).reshape(-1)
    n = len(residuals)

    if n < 2:
        raise ValidationError("cnm_fit needs at least two observations")
    if not np.any(deltas == 1):
        raise ValidationError("cnm_fit needs at least one uncensored observation")

    lower, upper = bounds or sigma_bounds(residuals, deltas)
    merge_tol = opts.merge_factor * upper / constants.SIGMA_MAX_FACTOR
    grad_tol = opts.tolerance(n)

    if initial_q is None:
        scale = upper / constants.SIGMA_MAX_FACTOR
        initial_q = LatentDistribution(
            [factor * scale for factor in constants.INITIAL_SUPPORT_FACTORS],
            [0.5, 0.5],
        )
    support, weights = _conform(initial_q, lower, upper, merge_tol)

    grid = np.geomspace(lower, upper, opts.grid_points)
    log_grid = log_component_matrix(residuals, deltas, slant, grid)

    trace = []
    converged = False
    max_gradient = np.inf
    iteration = 0
    for iteration in range(1, opts.max_iter + 1):
        log_matrix = log_component_matrix(residuals, deltas, slant, support)
        log_density = log_mixture_density(log_matrix, weights)
        loglik = float(np.sum(log_density))
        trace.append(loglik)

        gradient = _gradient(log_grid, log_density)
        support_gradient = _gradient(log_matrix, log_density)

        def objective(sigma):
            return float(_gradient(log_component_matrix(residuals, deltas, slant, [sigma]), log_density)[0])

        # Every grid maximum is polished, so the certificate holds between grid points too
        candidates = []
        max_gradient = float(gradient.max())
        for index in _local_maxima(gradient):
            point, value = _refine(index, grid, gradient, objective, opts.refine_xtol)
            max_gradient = max(max_gradient, value)
            if value <= grad_tol:
                continue
            if np.min(np.abs(support - point)) >= merge_tol and all(abs(point - c) >= merge_tol for c in candidates):
                candidates.append(point)

        logger.debug(
            f"CNM iteration {iteration}: loglik={loglik:.10g}, K={len(support)}, max D={max_gradient:.3g}, "
            f"new points={len(candidates)}"
        )

        if max_gradient <= grad_tol and np.max(np.abs(support_gradient)) <= grad_tol:
            converged = True
            break

        new_support = np.concatenate([support, candidates])
        new_weights = np.concatenate([weights, np.zeros(len(candidates))])
        order = np.argsort(new_support)
        new_support, new_weights = new_support[order], new_weights[order]

        updated = _weight_step(log_component_matrix(residuals, deltas, slant, new_support), new_weights)
        keep = updated > 0
        previous_support = support
        support, weights = new_support[keep], updated[keep] / updated[keep].sum()

        unchanged = np.allclose(updated[keep], new_weights[keep], rtol=0.0, atol=1e-14)
        if not candidates and len(support) == len(previous_support) and unchanged:
            logger.debug("CNM weights stalled without reaching the optimality tolerance")
            break

    loglik = _loglik(log_component_matrix(residuals, deltas, slant, support), weights)

    if not converged:
        # A capped run never returns less than the best point mass on the grid
        single = log_grid.sum(axis=0)
        best = int(np.argmax(single))
        if single[best] > loglik:
            support, weights, loglik = grid[best : best + 1], np.ones(1), float(single[best])
        logger.warning(f"CNM stopped after {iteration} iterations without converging (max D={max_gradient:.3g})")

    if not trace or loglik != trace[-1]:
        trace.append(loglik)

    return CnmResult(
        q=LatentDistribution(support, weights),
        loglik=loglik,
        converged=converged,
        iterations=iteration,
        max_gradient=max_gradient,
        bounds=(lower, upper),
        trace=tuple(trace),
    )
