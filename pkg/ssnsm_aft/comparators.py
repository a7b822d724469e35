"""
Baseline AFT estimators: censored normal and skew-normal maximum likelihood, the induced-smoothed Gehan rank
estimator and the Buckley-James (GEE) iteration, plus the product-limit engine they share.
"""
import logging
from dataclasses import replace

import numpy as np
from scipy import special

from . import constants
from .distributions import sn_mean_shift
from .exceptions import ValidationError
from .models import EstimatorResult, KaplanMeierCurve, LatentDistribution, StructuralParams, SurvivalDataset
from .structural_opt import BfgsOptions, bfgs_minimize, profile_negloglik
from .utils import design_matrix, least_squares

__all__ = (
    "product_limit",
    "km_fit",
    "conditional_tail_mean",
    "normal_negloglik",
    "fit_normal_mle",
    "fit_sn_mle",
    "gehan_estimating_function",
    "gehan_jacobian",
    "gehan_loss",
    "fit_gehan_smoothed",
    "fit_gee_bj",
)

logger = logging.getLogger(__name__)

LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


def product_limit(values, deltas, efron_tail: bool = False) -> KaplanMeierCurve:
    """
    Kaplan-Meier estimate over arbitrary real values (residuals included).

    With efron_tail the largest value is treated as an event when it is censored, so the curve drops to 0 there.
    """
    values = np.asarray(values, dtype=float).reshape(-1)
    deltas = np.asarray(deltas, dtype=int).reshape(-1)
    if len(values) == 0:
        raise ValidationError("Kaplan-Meier needs at least one observation")
    if len(values) != len(deltas):
        raise ValidationError("values and deltas must have the same length")

    unique, inverse = np.unique(values, return_inverse=True)
    events = np.bincount(inverse, weights=deltas).astype(int)
    counts = np.bincount(inverse)
    at_risk = len(values) - np.concatenate([[0], np.cumsum(counts)[:-1]])
    survival = np.cumprod(1.0 - events / at_risk)

    keep = events > 0
    times, survival, at_risk, events = unique[keep], survival[keep], at_risk[keep], events[keep]

    if efron_tail and (len(survival) == 0 or survival[-1] > 0):
        if len(times) and times[-1] == unique[-1]:
            survival = np.concatenate([survival[:-1], [0.0]])
        else:
            times = np.append(times, unique[-1])
            survival = np.append(survival, 0.0)
            at_risk = np.append(at_risk, counts[-1])
            events = np.append(events, 0)

    return KaplanMeierCurve(times=times, survival=survival, at_risk=at_risk, events=events)


def km_fit(times, deltas) -> KaplanMeierCurve:
    times = np.asarray(times, dtype=float)
    if np.any(times <= 0):
        raise ValidationError("km_fit needs positive times")
    return product_limit(times, deltas)


def conditional_tail_mean(curve: KaplanMeierCurve, values) -> np.ndarray:
    """
    E[e | e > value] under the curve's mass; values beyond the last step are returned unchanged.
    """
    values = np.asarray(values, dtype=float)
    jumps = curve.jumps
    mass_above = np.concatenate([np.cumsum(jumps[::-1])[::-1], [0.0]])
    moment_above = np.concatenate([np.cumsum((curve.times * jumps)[::-1])[::-1], [0.0]])

    index = np.searchsorted(curve.times, values, side="right")
    mass, moment = mass_above[index], moment_above[index]
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(mass > 1e-15, moment / np.where(mass > 0, mass, 1.0), values)


def normal_negloglik(params, data: SurvivalDataset):
    """
    Censored normal negative log-likelihood and its gradient at params = (c_0, c_1..c_p, log sigma).
    """
    coefficients, log_sigma = params[:-1], params[-1]
    sigma = np.exp(log_sigma)
    design = design_matrix(data.covariates)
    z = (data.log_times - design @ coefficients) / sigma
    observed = data.deltas == 1

    log_tail = special.log_ndtr(-z)
    value = -np.sum(np.where(observed, -0.5 * z * z - LOG_SQRT_2PI - log_sigma, log_tail))

    # Inverse Mills ratio phi(z) / Phi(-z), stable in both tails
    hazard = np.exp(-0.5 * z * z - LOG_SQRT_2PI - log_tail)
    score = np.where(observed, z, hazard)
    gradient = np.concatenate(
        [
            -(design.T @ score) / sigma,
            [-np.sum(np.where(observed, z * z - 1.0, hazard * z))],
        ]
    )
    return float(value), gradient


def fit_normal_mle(data: SurvivalDataset, opts: BfgsOptions | None = None) -> EstimatorResult:
    """
    AFT regression with normal errors; closed-form OLS when nothing is censored.
    """
    coefficients = least_squares(data.covariates, data.log_times)
    rss = float(np.sum((data.log_times - design_matrix(data.covariates) @ coefficients) ** 2))
    sigma = np.sqrt(rss / data.n) if rss > 0 else 1.0
    converged, iterations = True, 0

    if np.any(data.deltas == 0):
        result = bfgs_minimize(
            lambda x: normal_negloglik(x, data)[0],
            np.concatenate([coefficients, [np.log(sigma)]]),
            grad=lambda x: normal_negloglik(x, data)[1],
            opts=opts,
            tol=constants.BFGS_TOL_FACTOR * data.n,
        )
        coefficients, sigma = result.x[:-1], float(np.exp(result.x[-1]))
        converged, iterations = result.converged, result.iterations

    loglik = -normal_negloglik(np.concatenate([coefficients, [np.log(sigma)]]), data)[0]
    logger.debug(f"Normal MLE: loglik={loglik:.8g}, sigma={sigma:.6g}, converged={converged}")

    return EstimatorResult(
        method=constants.METHOD_NORMAL,
        beta0=coefficients[0],
        beta=coefficients[1:],
        extra={"sigma": sigma, "loglik": loglik, "iterations": iterations},
        converged=converged,
    )


def _moment_matched_start(start: EstimatorResult, slant: float) -> np.ndarray:
    """
    (b0, beta, slant, log omega) whose skew-normal error keeps the mean and variance of the normal fit.
    """
    delta = slant / np.hypot(1.0, slant)
    omega = start.extra["sigma"] / np.sqrt(1.0 - 2.0 * delta**2 / np.pi)
    b0 = start.beta0 - sn_mean_shift(slant) * omega
    return np.concatenate([[b0], start.beta, [slant, np.log(omega)]])


def fit_sn_mle(
    data: SurvivalDataset, opts: BfgsOptions | None = None, start: EstimatorResult | None = None
) -> EstimatorResult:
    """
    AFT regression with skew-normal errors: the single-scale member of the scale-mixture family.
    """
    # Fitting on mean-zero log-times makes the optimizer path independent of response shifts
    center = float(np.mean(data.log_times))
    centered = data.shift_log_times(-center)
    if start is None:
        start = fit_normal_mle(centered, opts)
    else:
        start = replace(start, beta0=start.beta0 - center)

    def objective(vector):
        theta = StructuralParams.from_vector(vector[:-1])
        return profile_negloglik(theta, LatentDistribution.point_mass(np.exp(vector[-1])), centered)

    # The normal fit (slant 0) is a stationary point of this likelihood, so skewed starts are tried as well
    result = None
    for slant in (0.0, *constants.SN_START_SLANTS):
        x0 = _moment_matched_start(start, slant)
        candidate = bfgs_minimize(objective, x0, opts=opts, tol=constants.BFGS_TOL_FACTOR * data.n)
        if result is None or candidate.fun < result.fun:
            result = candidate

    fitted = StructuralParams.from_vector(result.x[:-1])
    theta = StructuralParams(fitted.b0 + center, fitted.beta, fitted.slant)
    sigma = float(np.exp(result.x[-1]))
    beta0 = theta.b0 + sn_mean_shift(theta.slant) * sigma
    logger.debug(f"SN MLE: loglik={-result.fun:.8g}, slant={theta.slant:.4g}, converged={result.converged}")

    return EstimatorResult(
        method=constants.METHOD_SN,
        beta0=beta0,
        beta=theta.beta,
        extra={
            "b0": theta.b0,
            "slant": theta.slant,
            "sigma": sigma,
            "loglik": -result.fun,
            "iterations": result.iterations,
        },
        converged=result.converged,
    )


def _pairwise(beta, data: SurvivalDataset):
    """
    Pair differences x_i - x_j, the smoothing widths r_ij and standardized z_ij = (e_j - e_i) / r_ij.
    """
    covariates = data.covariates
    errors = data.log_times - covariates @ np.asarray(beta, dtype=float)
    differences = covariates[:, None, :] - covariates[None, :, :]
    widths = np.sqrt(np.sum(differences**2, axis=2) / data.n)
    valid = (widths > 0) & (data.deltas[:, None] == 1)
    z = np.where(valid, (errors[None, :] - errors[:, None]) / np.where(valid, widths, 1.0), 0.0)
    return differences, widths, valid, z


def gehan_estimating_function(beta, data: SurvivalDataset) -> np.ndarray:
    """
    Smoothed Gehan score U(beta) = sum_i sum_j delta_i (x_i - x_j) Phi((e_j - e_i) / r_ij).
    """
    differences, _, valid, z = _pairwise(beta, data)
    weights = np.where(valid, special.ndtr(z), 0.0)
    return np.einsum("ij,ijk->k", weights, differences)


def gehan_jacobian(beta, data: SurvivalDataset) -> np.ndarray:
    differences, widths, valid, z = _pairwise(beta, data)
    weights = np.where(valid, np.exp(-0.5 * z * z - LOG_SQRT_2PI) / np.where(valid, widths, 1.0), 0.0)
    return np.einsum("ij,ijk,ijl->kl", weights, differences, differences)


def gehan_loss(beta, data: SurvivalDataset, smoothed: bool = True) -> float:
    """
    Convex Gehan objective whose gradient is the estimating function.

    Unsmoothed: sum delta_i max(e_j - e_i, 0) over pairs. Smoothed: r_ij g(z_ij) with g(z) = z Phi(z) + phi(z).
    """
    differences, widths, valid, z = _pairwise(beta, data)
    if not smoothed:
        errors = data.log_times - data.covariates @ np.asarray(beta, dtype=float)
        gaps = np.maximum(errors[None, :] - errors[:, None], 0.0)
        return float(np.sum(gaps[data.deltas == 1]))
    smooth = z * special.ndtr(z) + np.exp(-0.5 * z * z - LOG_SQRT_2PI)
    return float(np.sum(np.where(valid, widths * smooth, 0.0)))


def _residual_mean(data: SurvivalDataset, beta) -> tuple[float, KaplanMeierCurve]:
    curve = product_limit(data.log_times - data.covariates @ beta, data.deltas, efron_tail=True)
    return curve.mean(), curve


def fit_gehan_smoothed(data: SurvivalDataset) -> EstimatorResult:
    """
    Solve the induced-smoothed Gehan equations by damped Newton, falling back to descent on the convex loss
    when the Jacobian is singular. The intercept is the mean of the residual Kaplan-Meier distribution.
    """
    beta = least_squares(data.covariates, data.log_times)[1:]
    tol = constants.GEHAN_TOL_FACTOR * data.n**2
    score = gehan_estimating_function(beta, data)
    converged = False
    iteration = 0

    for iteration in range(1, constants.GEHAN_MAX_ITER + 1):
        norm = np.max(np.abs(score))
        if norm <= tol:
            converged = True
            break

        try:
            step = np.linalg.solve(gehan_jacobian(beta, data), score)
            if not np.all(np.isfinite(step)):
                raise np.linalg.LinAlgError("non-finite Newton step")
        except np.linalg.LinAlgError:
            logger.debug("Gehan Jacobian singular, taking a descent step on the smoothed loss")
            step = score / data.n**2

        scale = 1.0
        for _ in range(constants.BFGS_MAX_HALVINGS):
            candidate = beta - scale * step
            candidate_score = gehan_estimating_function(candidate, data)
            if np.max(np.abs(candidate_score)) < norm:
                break
            scale *= 0.5
        else:
            logger.debug("Gehan line search made no progress")
            break

        if np.max(np.abs(candidate - beta)) <= 1e-12 * (1.0 + np.max(np.abs(beta))):
            beta, score = candidate, candidate_score
            converged = np.max(np.abs(score)) <= constants.GEHAN_ACCEPT_FACTOR * data.n**2
            break
        beta, score = candidate, candidate_score

    if not converged:
        converged = np.max(np.abs(score)) <= constants.GEHAN_ACCEPT_FACTOR * data.n**2
        if not converged:
            logger.warning(f"Gehan iteration stopped after {iteration} steps with |U|={np.max(np.abs(score)):.3g}")

    beta0, curve = _residual_mean(data, beta)
    return EstimatorResult(
        method=constants.METHOD_GEHAN,
        beta0=beta0,
        beta=beta,
        extra={"score_norm": float(np.max(np.abs(score))), "iterations": iteration},
        converged=bool(converged),
        residual_curve=curve,
    )


def _impute(data: SurvivalDataset, beta) -> np.ndarray:
    """
    Buckley-James responses: censored log-times replaced by x'b + E[e | e > e_i] under the residual KM.
    """
    fitted = data.covariates @ beta
    errors = data.log_times - fitted
    curve = product_limit(errors, data.deltas, efron_tail=True)
    imputed = np.where(data.deltas == 1, errors, conditional_tail_mean(curve, errors))
    return fitted + imputed


def _centered_slopes(covariates, response) -> np.ndarray:
    centered = covariates - covariates.mean(axis=0)
    slopes, *_ = np.linalg.lstsq(centered, response - response.mean(), rcond=None)
    return slopes


def fit_gee_bj(data: SurvivalDataset, start: EstimatorResult | None = None) -> EstimatorResult:
    """
    Buckley-James least-squares iteration started from the smoothed Gehan estimate.

    Oscillation between up to four points is detected and resolved by averaging the cycle.
    """
    if start is None:
        start = fit_gehan_smoothed(data)
    beta = np.array(start.beta)
    history = [beta]
    converged = False
    cycle = 0
    iteration = 0

    for iteration in range(1, constants.BJ_MAX_ITER + 1):
        updated = _centered_slopes(data.covariates, _impute(data, beta))

        if np.max(np.abs(updated - beta)) < constants.BJ_TOL:
            beta, converged = updated, True
            break

        for length in range(2, constants.BJ_MAX_CYCLE + 1):
            if len(history) >= length and np.max(np.abs(updated - history[-length])) < constants.BJ_TOL:
                cycle = length
                break
        if cycle:
            beta = np.mean(history[-cycle:], axis=0)
            logger.warning(f"Buckley-James oscillates with period {cycle}; returning the cycle average")
            break

        beta = updated
        history.append(beta)

    if not converged and not cycle:
        logger.warning(f"Buckley-James did not converge in {iteration} iterations")

    imputed = _impute(data, beta)
    beta0 = float(np.mean(imputed - data.covariates @ beta))
    curve = product_limit(data.log_times - data.covariates @ beta, data.deltas, efron_tail=True)

    return EstimatorResult(
        method=constants.METHOD_GEE,
        beta0=beta0,
        beta=beta,
        extra={"iterations": iteration, "cycle_length": cycle},
        converged=converged,
        residual_curve=curve,
    )
