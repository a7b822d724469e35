"""
Semiparametric skew-normal scale-mixture AFT fit: alternate the nonparametric Q-step and the quasi-Newton
theta-step until the log-likelihood stops increasing, then correct the intercept to the error mean.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from . import constants
from .comparators import fit_normal_mle, fit_sn_mle
from .distributions import skewnormal_sf, sn_mean_shift
from .exceptions import DomainError, ValidationError
from .models import FittedModel, StructuralParams, SurvivalDataset
from .npmle import CnmOptions, cnm_fit, sigma_bounds
from .structural_opt import BfgsOptions, fit_structural, residuals

__all__ = (
    "FitOptions",
    "fit_ssnsm",
    "predict_log_time",
    "conditional_survival",
    "survival_curve",
    "error_mean",
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FitOptions:
    cnm: CnmOptions = field(default_factory=CnmOptions)
    bfgs: BfgsOptions = field(default_factory=BfgsOptions)
    outer_tol: float = constants.OUTER_TOL
    max_outer: int = constants.MAX_OUTER
    fix_slant: bool = False


def fit_ssnsm(data: SurvivalDataset, opts: FitOptions | None = None, initial: FittedModel | None = None) -> FittedModel:
    """
    Fit (theta, Q) by alternation starting from the skew-normal MLE, or from a previous fit.

    With opts.fix_slant the slant is held at zero (or at the warm start's value), which gives the Gaussian
    scale-mixture model. The alternation always ends on a Q-step, so the returned Q carries the NPMLE certificate
    for the returned theta; FittedModel.q_converged records whether that last Q-step converged.
    """
    opts = opts or FitOptions()

    # Alternate on mean-zero log-times; only b0 moves back at the end
    center = float(np.mean(data.log_times))
    centered = data.shift_log_times(-center)

    if initial is not None:
        if initial.theta.p != data.p:
            raise ValidationError(f"Warm start has {initial.theta.p} slopes, the data has {data.p} covariates")
        theta = StructuralParams(initial.theta.b0 - center, initial.theta.beta, initial.theta.slant)
        q = initial.q
    elif opts.fix_slant:
        start = fit_normal_mle(centered, opts.bfgs)
        theta, q = StructuralParams(start.beta0, start.beta, 0.0), None
    else:
        start = fit_sn_mle(centered, opts.bfgs)
        theta, q = StructuralParams(start.extra["b0"], start.beta, start.extra["slant"]), None

    lower, upper = sigma_bounds(residuals(theta, centered), data.deltas)
    if q is not None:
        lower, upper = min(lower, q.support[0]), max(upper, q.support[-1])

    logger.info(f"Fitting SSNSM on n={data.n}, p={data.p}, censored={data.censoring_fraction:.1%}")

    trace = []
    converged = False
    previous = -np.inf
    outer = 0
    for outer in range(1, opts.max_outer + 1):
        cnm = cnm_fit(residuals(theta, centered), data.deltas, theta.slant, q, opts.cnm, (lower, upper))
        q = cnm.q
        trace.append(cnm.loglik)

        candidate, result = fit_structural(theta, q, centered, opts.bfgs, fix_slant=opts.fix_slant)
        if -result.fun >= cnm.loglik:
            theta = candidate
            trace.append(-result.fun)
        else:
            trace.append(cnm.loglik)

        gain = trace[-1] - previous
        logger.debug(f"Outer iteration {outer}: loglik={trace[-1]:.10g}, K={q.k}, slant={theta.slant:.4g}")
        if gain < opts.outer_tol:
            converged = True
            break
        previous = trace[-1]

    if not converged:
        logger.warning(f"SSNSM alternation hit the cap of {opts.max_outer} outer iterations")

    # Closing Q-step at the final theta
    cnm = cnm_fit(residuals(theta, centered), data.deltas, theta.slant, q, opts.cnm, (lower, upper))
    q = cnm.q
    trace.append(cnm.loglik)
    if not cnm.converged:
        logger.warning(f"Final Q-step did not reach its optimality tolerance (max D={cnm.max_gradient:.3g})")

    theta = StructuralParams(theta.b0 + center, theta.beta, theta.slant)
    model = FittedModel(
        theta=theta,
        q=q,
        beta0_corrected=theta.b0 + sn_mean_shift(theta.slant) * q.mean_scale,
        loglik=trace[-1],
        loglik_trace=trace,
        converged=converged and cnm.converged,
        q_converged=cnm.converged,
        outer_iterations=outer,
        covariate_names=data.covariate_names,
    )
    logger.info(f"SSNSM fit done: loglik={model.loglik:.8g}, K={q.k}, outer iterations={outer}")
    return model


def _covariates(model: FittedModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != model.theta.p:
        raise ValidationError(f"Expected {model.theta.p} covariates, got {x.shape[-1]}")
    return x


def predict_log_time(model: FittedModel, x):
    """
    Mean-corrected prediction beta0 + x'beta; x may be a single row or a matrix of rows.
    """
    value = model.beta0_corrected + _covariates(model, x) @ model.theta.beta
    return float(value) if np.ndim(value) == 0 else value


def survival_curve(model: FittedModel, x, times) -> np.ndarray:
    """
    S(t | x) = sum_k alpha_k S_SN(log t - b0 - x'beta; sigma_k, slant) over a vector of times.
    """
    times = np.asarray(times, dtype=float)
    if np.any(~np.isfinite(times)) or np.any(times <= 0):
        raise DomainError("Survival probabilities need positive times")

    location = model.theta.b0 + float(_covariates(model, x) @ model.theta.beta)
    errors = np.log(times).reshape(-1, 1) - location
    components = skewnormal_sf(errors, model.q.support[None, :], model.theta.slant)
    values = np.clip(components @ model.q.weights, 0.0, 1.0)
    return values.reshape(times.shape)


def conditional_survival(model: FittedModel, x, t: float) -> float:
    return float(survival_curve(model, x, np.asarray([t]))[0])


def error_mean(model: FittedModel) -> float:
    """
    E[error] = mean shift of the slant times E_Q[sigma]; zero for symmetric kernels.
    """
    return sn_mean_shift(model.theta.slant) * model.q.mean_scale
