import math

import numpy as np

from .exceptions import ValidationError

__all__ = (
    "sample_scale",
    "design_matrix",
    "least_squares",
    "tukey_summary",
    "format_estimate",
    "parse_profiles",
)


def sample_scale(values) -> float:
    """
    Spread used to scale numerical searches: the sample SD, then the RMS, then 1.
    """
    values = np.asarray(values, dtype=float)
    if len(values) >= 2:
        sd = float(np.std(values, ddof=1))
        if sd > 0 and math.isfinite(sd):
            return sd

    rms = float(np.sqrt(np.mean(values**2))) if len(values) else 0.0
    if rms > 0 and math.isfinite(rms):
        return rms

    return 1.0


def design_matrix(covariates) -> np.ndarray:
    """
    Prepend an intercept column to the covariate matrix.
    """
    covariates = np.asarray(covariates, dtype=float)
    if covariates.ndim == 1:
        covariates = covariates.reshape(-1, 1)
    return np.column_stack([np.ones(len(covariates)), covariates])


def least_squares(covariates, response) -> np.ndarray:
    """
    OLS coefficients (intercept first) of response on covariates.
    """
    coefficients, *_ = np.linalg.lstsq(design_matrix(covariates), np.asarray(response, dtype=float), rcond=None)
    return coefficients


def tukey_summary(values) -> dict:
    """
    Boxplot statistics: quartiles and the Tukey whiskers (most extreme points within 1.5 IQR of the box).
    """
    values = np.asarray(values, dtype=float)
    values = values[np.isfinite(values)]
    if len(values) == 0:
        return {key: float("nan") for key in ("min", "whisker_low", "q1", "median", "q3", "whisker_high", "max")}

    q1, median, q3 = np.percentile(values, [25, 50, 75])
    iqr = q3 - q1
    inside = values[(values >= q1 - 1.5 * iqr) & (values <= q3 + 1.5 * iqr)]

    return {
        "min": float(values.min()),
        "whisker_low": float(inside.min()),
        "q1": float(q1),
        "median": float(median),
        "q3": float(q3),
        "whisker_high": float(inside.max()),
        "max": float(values.max()),
    }


def format_estimate(estimate: float, se: float | None = None, digits: int = 4) -> str:
    """
    Render "estimate (se)" the way regression tables report standard errors.
    """
    if se is None or not math.isfinite(se):
        return f"{estimate:.{digits}f}"
    return f"{estimate:.{digits}f} ({se:.{digits}f})"


def parse_profiles(text: str | None, covariate_names, means) -> dict[str, np.ndarray]:
    """
    Parse 'name:col=value,col=value;name2:...' into covariate vectors; unnamed columns default to their mean.
    """
    covariate_names = list(covariate_names)
    means = np.asarray(means, dtype=float)

    if not text:
        return {"mean": means.copy()}

    profiles = {}
    for chunk in filter(None, (part.strip() for part in text.split(";"))):
        name, sep, assignments = chunk.partition(":")
        if not sep or not name.strip():
            raise ValidationError(f"Profile {chunk!r} must look like 'name:col=value,...'")

        vector = means.copy()
        for assignment in filter(None, (part.strip() for part in assignments.split(","))):
            column, sep, value = assignment.partition("=")
            column = column.strip()
            if not sep or column not in covariate_names:
                raise ValidationError(f"Profile {name.strip()!r}: unknown covariate assignment {assignment!r}")
            try:
                vector[covariate_names.index(column)] = float(value)
            except ValueError:
                raise ValidationError(f"Profile {name.strip()!r}: {value!r} is not a number")

        profiles[name.strip()] = vector

    return profiles
