import logging

import numpy as np
from scipy import special

from . import constants
from .aft_fit import FitOptions, error_mean, fit_ssnsm, survival_curve
from .comparators import fit_gee_bj, fit_gehan_smoothed, fit_normal_mle, fit_sn_mle
from .distributions import skewnormal_sf
from .exceptions import DomainError, ValidationError
from .models import EstimatorResult, FittedModel, SurvivalDataset

__all__ = (
    "as_estimator_result",
    "fit_ssnsm_estimator",
    "fit_ngsm_estimator",
    "FITTERS",
    "get_fitter",
    "resolve_methods",
    "predict_survival",
)

logger = logging.getLogger(__name__)


def as_estimator_result(model: FittedModel, method: str = constants.METHOD_SSNSM) -> EstimatorResult:
    return EstimatorResult(
        method=method,
        beta0=model.beta0_corrected,
        beta=model.theta.beta,
        extra={
            "b0": model.theta.b0,
            "slant": model.theta.slant,
            "loglik": model.loglik,
            "support_points": model.q.k,
            "mean_scale": model.q.mean_scale,
            "error_mean": error_mean(model),
            "outer_iterations": model.outer_iterations,
        },
        converged=model.converged,
        model=model,
    )


def fit_ssnsm_estimator(data: SurvivalDataset) -> EstimatorResult:
    return as_estimator_result(fit_ssnsm(data))


def fit_ngsm_estimator(data: SurvivalDataset) -> EstimatorResult:
    return as_estimator_result(fit_ssnsm(data, FitOptions(fix_slant=True)), constants.METHOD_NGSM)


FITTERS = {
    constants.METHOD_NORMAL: fit_normal_mle,
    constants.METHOD_SN: fit_sn_mle,
    constants.METHOD_GEHAN: fit_gehan_smoothed,
    constants.METHOD_GEE: fit_gee_bj,
    constants.METHOD_SSNSM: fit_ssnsm_estimator,
    constants.METHOD_NGSM: fit_ngsm_estimator,
}


def get_fitter(method: str):
    try:
        return FITTERS[method]
    except KeyError:
        raise ValidationError(f"Unknown method {method!r}; choose from {', '.join(FITTERS)}")


def resolve_methods(methods) -> list[str]:
    """
    Normalize a method selection, expanding 'all' and dropping duplicates while keeping order.
    """
    if isinstance(methods, str):
        methods = [item.strip() for item in methods.split(",") if item.strip()]
    resolved = []
    for method in methods or ["all"]:
        for name in constants.ALL_METHODS if method == "all" else [method]:
            get_fitter(name)
            if name not in resolved:
                resolved.append(name)
    return resolved


def predict_survival(result: EstimatorResult, covariates, times) -> np.ndarray:
    """
    Predicted S(t | x) for every row of covariates (n x p) at every time (m), as an n x m matrix.
    """
    covariates = np.atleast_2d(np.asarray(covariates, dtype=float))
    times = np.asarray(times, dtype=float).reshape(-1)
    if np.any(times <= 0):
        raise DomainError("Survival probabilities need positive times")
    if covariates.shape[1] != len(result.beta):
        raise ValidationError(f"{result.method}: expected {len(result.beta)} covariates, got {covariates.shape[1]}")

    log_times = np.log(times)[None, :]
    linear = (covariates @ result.beta)[:, None]

    if result.model is not None:
        return np.vstack([survival_curve(result.model, row, times) for row in covariates])

    if result.method == constants.METHOD_NORMAL:
        return special.ndtr(-(log_times - result.beta0 - linear) / result.extra["sigma"])

    if result.method == constants.METHOD_SN:
        errors = log_times - result.extra["b0"] - linear
        return skewnormal_sf(errors, result.extra["sigma"], result.extra["slant"])

    if result.residual_curve is not None:
        return np.asarray(result.residual_curve(log_times - linear), dtype=float).reshape(len(covariates), -1)

    raise ValidationError(f"{result.method}: no survival function available")
