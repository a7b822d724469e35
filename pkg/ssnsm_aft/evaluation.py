"""
Predictive accuracy of fitted survival models (IPCW Brier score and its time integral) and nonparametric
bootstrap standard errors.
"""
import logging
from dataclasses import dataclass, field
from functools import partial

import numpy as np
from scipy import integrate

from . import constants
from .comparators import km_fit
from .exceptions import DomainError, ValidationError
from .jobs import JobRunner
from .methods import predict_survival
from .models import EstimatorResult, KaplanMeierCurve, SurvivalDataset
from .simulation import STREAM_BOOTSTRAP, replicate_rng

__all__ = (
    "BrierInputs",
    "BootstrapResult",
    "brier_score",
    "brier_scores",
    "integrated_brier",
    "integrate_scores",
    "bootstrap_se",
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class BrierInputs:
    """
    Test data, a survival predictor (covariates, times) -> n x m probabilities, and the censoring KM G.
    """

    dataset: SurvivalDataset
    predictor: object
    censor_km: KaplanMeierCurve
    g_floor: float = constants.G_FLOOR

    @classmethod
    def build(cls, dataset: SurvivalDataset, result: EstimatorResult, g_floor: float = constants.G_FLOOR):
        return cls(
            dataset=dataset,
            predictor=partial(predict_survival, result),
            censor_km=km_fit(dataset.times, 1 - dataset.deltas),
            g_floor=g_floor,
        )

    def censoring_weight(self, times) -> np.ndarray:
        return np.maximum(np.asarray(self.censor_km(times), dtype=float), self.g_floor)


def brier_scores(inputs: BrierInputs, times) -> np.ndarray:
    """
    BS(t) at each t: events before t weighted by 1 / G(y_i), subjects still at risk after t by 1 / G(t).
    Subjects with y_i == t contribute to neither term.
    """
    times = np.asarray(times, dtype=float).reshape(-1)
    if np.any(~np.isfinite(times)) or np.any(times <= 0):
        raise DomainError("Brier scores need positive time points")

    data = inputs.dataset
    survival = np.asarray(inputs.predictor(data.covariates, times), dtype=float)
    if survival.shape != (data.n, len(times)):
        raise ValidationError(f"Predictor returned shape {survival.shape}, expected {(data.n, len(times))}")

    y = data.times[:, None]
    died_before = (y < times[None, :]) & (data.deltas[:, None] == 1)
    alive_after = y > times[None, :]

    weight_y = inputs.censoring_weight(data.times)[:, None]
    weight_t = inputs.censoring_weight(times)[None, :]

    terms = np.where(died_before, survival**2 / weight_y, 0.0)
    terms += np.where(alive_after, (1.0 - survival) ** 2 / weight_t, 0.0)
    return terms.mean(axis=0)


def brier_score(inputs: BrierInputs, t_star: float) -> float:
    return float(brier_scores(inputs, [t_star])[0])


def integrate_scores(times, scores, t_max: float) -> float:
    """
    (1 / t_max) times the trapezoid integral of the scores over the time grid.
    """
    return float(integrate.trapezoid(np.asarray(scores, dtype=float), np.asarray(times, dtype=float)) / t_max)


def integrated_brier(inputs: BrierInputs, t_max: float, grid_points: int = constants.IBS_GRID_POINTS) -> float:
    """
    IBS over [0, t_max] on a uniform grid; the left end is nudged to t_max * 1e-9 since BS needs t > 0.
    """
    if not (np.isfinite(t_max) and t_max > 0):
        raise DomainError("t_max must be positive")
    if grid_points < 2:
        raise ValidationError("The IBS grid needs at least two points")

    grid = np.linspace(0.0, t_max, grid_points)
    grid[0] = t_max * 1e-9
    return integrate_scores(grid, brier_scores(inputs, grid), t_max)


@dataclass
class BootstrapResult:
    se: np.ndarray
    estimates: np.ndarray
    replicates: int
    failures: int = 0
    errors: list = field(default_factory=list)

    @property
    def failure_rate(self) -> float:
        return self.failures / self.replicates if self.replicates else 0.0

    @property
    def flagged(self) -> bool:
        return self.failure_rate > constants.BOOTSTRAP_FAILURE_LIMIT


def _bootstrap_job(data: SurvivalDataset, fitter, seed: int, replicate: int) -> np.ndarray:
    rng = replicate_rng(seed, replicate, STREAM_BOOTSTRAP)
    sample = data.subset(rng.integers(0, data.n, data.n))
    coefficients = np.asarray(fitter(sample).coefficients, dtype=float)
    if not np.all(np.isfinite(coefficients)):
        raise ValidationError("bootstrap refit returned non-finite coefficients")
    return coefficients


def bootstrap_se(
    data: SurvivalDataset,
    fitter,
    replicates: int = constants.BOOTSTRAP_REPLICATES,
    seed: int = constants.DEFAULT_SEED,
    workers: int = 1,
) -> BootstrapResult:
    """
    Case-resampling bootstrap: the SE of each coefficient is the SD of its successful refits.
    """
    if replicates < 2:
        raise ValidationError("The bootstrap needs at least two replicates")

    runner = JobRunner(workers)
    for replicate in range(replicates):
        runner.enqueue(
            _bootstrap_job, name=f"bootstrap-{replicate}", data=data, fitter=fitter, seed=seed, replicate=replicate
        )

    jobs = runner.run()
    estimates = np.array([job.result for job in jobs if job.ok]).reshape(-1, data.p + 1)
    errors = [job.error for job in jobs if not job.ok]

    se = np.std(estimates, axis=0, ddof=1) if len(estimates) >= 2 else np.full(data.p + 1, np.nan)
    result = BootstrapResult(se=se, estimates=estimates, replicates=replicates, failures=len(errors), errors=errors)
    if result.flagged:
        logger.warning(f"{result.failures} of {replicates} bootstrap refits failed; standard errors are unreliable")
    return result
