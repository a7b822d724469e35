"""
Monte Carlo scenarios for the AFT estimators: standardized error families, censoring, replicate generation and the
coefficient-accuracy and prediction studies run over them.

Every replicate draws from its own PCG64 stream derived from (seed, rep_index, stream), so results do not depend
on execution order or on the number of workers.
"""
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd
from scipy import special

from . import constants
from .exceptions import ValidationError
from .jobs import JobRunner
from .methods import get_fitter, resolve_methods
from .models import SurvivalDataset
from .utils import tukey_summary

__all__ = (
    "ErrorFamily",
    "ScenarioSpec",
    "ScenarioResult",
    "PredictionResult",
    "PRESETS",
    "get_preset",
    "standardization_constants",
    "sample_errors",
    "replicate_rng",
    "generate_replicate",
    "generate_test_set",
    "run_scenario",
    "summarize_estimates",
    "run_prediction_study",
    "lung_like",
)

logger = logging.getLogger(__name__)

KIND_NORMAL = "normal"
KIND_T = "t"
KIND_GUMBEL = "gumbel"
KIND_SKEW_T = "skew_t"
KINDS = (KIND_NORMAL, KIND_T, KIND_GUMBEL, KIND_SKEW_T)

STUDY_ESTIMATION = "estimation"
STUDY_PREDICTION = "prediction"

STREAM_TRAIN = 0
STREAM_TEST = 1
STREAM_BOOTSTRAP = 2

EULER_GAMMA = 0.5772156649015329


@dataclass(frozen=True)
class ErrorFamily:
    kind: str
    df: float | None = None
    loc: float = 0.0
    scale: float = 1.0
    slant: float = 0.0
    standardized: bool = True

    def __post_init__(self):
        self.clean()

    def clean(self):
        if self.kind not in KINDS:
            raise ValidationError(f"Unknown error family {self.kind!r}")

        if self.kind in (KIND_T, KIND_SKEW_T) and not (self.df is not None and self.df > 2):
            raise ValidationError(f"{self.kind} errors need df > 2 to be standardized, got {self.df!r}")

        if not self.scale > 0:
            raise ValidationError("scale must be positive")

    @classmethod
    def normal(cls) -> "ErrorFamily":
        return cls(KIND_NORMAL)

    @classmethod
    def student_t(cls, df: float = 3) -> "ErrorFamily":
        return cls(KIND_T, df=df)

    @classmethod
    def gumbel(cls, loc: float = 0.0, scale: float = 5.0) -> "ErrorFamily":
        return cls(KIND_GUMBEL, loc=loc, scale=scale)

    @classmethod
    def skew_t(cls, loc: float = 0.0, scale: float = 1.0, slant: float = -15.0, df: float = 3) -> "ErrorFamily":
        return cls(KIND_SKEW_T, df=df, loc=loc, scale=scale, slant=slant)

    @property
    def label(self) -> str:
        if self.kind == KIND_T:
            return f"t({self.df:g})"
        if self.kind == KIND_GUMBEL:
            return f"gumbel({self.loc:g},{self.scale:g})"
        if self.kind == KIND_SKEW_T:
            return f"skew-t({self.loc:g},{self.scale:g},{self.slant:g},{self.df:g})"
        return "normal(0,1)"


def standardization_constants(family: ErrorFamily) -> tuple[float, float]:
    """
    Analytic mean and standard deviation of the raw (unstandardized) error law.
    """
    if family.kind == KIND_NORMAL:
        return 0.0, 1.0

    if family.kind == KIND_T:
        return 0.0, math.sqrt(family.df / (family.df - 2.0))

    if family.kind == KIND_GUMBEL:
        return family.loc + family.scale * EULER_GAMMA, family.scale * math.pi / math.sqrt(6.0)

    nu = family.df
    delta = family.slant / math.sqrt(1.0 + family.slant**2)
    gamma_ratio = math.exp(special.gammaln((nu - 1) / 2) - special.gammaln(nu / 2))
    shift = family.scale * delta * math.sqrt(nu / math.pi) * gamma_ratio
    variance = family.scale**2 * (nu / (nu - 2.0) - (shift / family.scale) ** 2)
    return family.loc + shift, math.sqrt(variance)


def sample_errors(family: ErrorFamily, rng: np.random.Generator, size: int) -> np.ndarray:
    if family.kind == KIND_NORMAL:
        raw = rng.standard_normal(size)
    elif family.kind == KIND_T:
        raw = rng.standard_t(family.df, size)
    elif family.kind == KIND_GUMBEL:
        raw = rng.gumbel(family.loc, family.scale, size)
    else:
        # Skew-normal draw divided by sqrt(chi2_nu / nu)
        delta = family.slant / math.sqrt(1.0 + family.slant**2)
        half_normal, noise = np.abs(rng.standard_normal(size)), rng.standard_normal(size)
        skew_normal = delta * half_normal + math.sqrt(1.0 - delta**2) * noise
        mixing = rng.chisquare(family.df, size) / family.df
        raw = family.loc + family.scale * skew_normal / np.sqrt(mixing)

    if not family.standardized:
        return raw
    mean, sd = standardization_constants(family)
    return (raw - mean) / sd


@dataclass(frozen=True)
class ScenarioSpec:
    n: int
    error: ErrorFamily
    tau: float
    true_beta: tuple = constants.TRUE_BETA
    replications: int = constants.DEFAULT_REPLICATIONS
    seed: int = constants.DEFAULT_SEED
    name: str = ""
    study: str = STUDY_ESTIMATION
    test_m: int = constants.PREDICTION_TEST_M

    def __post_init__(self):
        self.clean()

    def clean(self):
        if self.n < 50:
            raise ValidationError(f"Scenarios need n >= 50, got {self.n}")
        if not self.tau > 0:
            raise ValidationError("tau must be positive")
        if self.replications < 1:
            raise ValidationError("At least one replication is required")
        if len(self.true_beta) != 3:
            raise ValidationError("true_beta holds (beta0, beta1, beta2)")
        if self.study not in (STUDY_ESTIMATION, STUDY_PREDICTION):
            raise ValidationError(f"Unknown study {self.study!r}")


def _tau_label(tau: float) -> str:
    return f"tau{tau:g}"


def _build_presets() -> dict[str, ScenarioSpec]:
    families = {
        "normal": ErrorFamily.normal(),
        "t3": ErrorFamily.student_t(3),
        "gumbel": ErrorFamily.gumbel(0.0, 5.0),
        "skewt": ErrorFamily.skew_t(0.0, 1.0, -15.0, 3),
    }
    presets = {}
    for tau in (4.0, 1.5):
        for label, family in families.items():
            for n in (200, 400):
                name = f"sim1/n{n}/{_tau_label(tau)}/{label}"
                presets[name] = ScenarioSpec(n=n, error=family, tau=tau, name=name)

            name = f"sim2/{_tau_label(tau)}/{label}"
            presets[name] = ScenarioSpec(
                n=constants.PREDICTION_TRAIN_N,
                error=family,
                tau=tau,
                name=name,
                study=STUDY_PREDICTION,
                replications=constants.DESK_REPLICATIONS,
            )

        for slant in (1, 4, 10, 50):
            for n in (200, 400):
                name = f"sim3/n{n}/{_tau_label(tau)}/slant-{slant}"
                presets[name] = ScenarioSpec(n=n, error=ErrorFamily.skew_t(0.0, 1.0, -slant, 3), tau=tau, name=name)

    return presets


PRESETS = _build_presets()


def get_preset(name: str, replications: int | None = None, seed: int | None = None) -> ScenarioSpec:
    try:
        spec = PRESETS[name]
    except KeyError:
        raise ValidationError(f"Unknown scenario preset {name!r}")

    changes = {}
    if replications is not None:
        changes["replications"] = replications
    if seed is not None:
        changes["seed"] = seed
    return replace(spec, **changes) if changes else spec


def replicate_rng(seed: int, rep_index: int, stream: int = STREAM_TRAIN) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(rep_index), int(stream)])))


def _covariates(rng: np.random.Generator, size: int) -> np.ndarray:
    return np.column_stack([rng.standard_normal(size), rng.binomial(1, 0.5, size)])


def generate_replicate(spec: ScenarioSpec, rep_index: int) -> SurvivalDataset:
    """
    log T = b0 + b1 X1 + b2 X2 + e with log C ~ U(0, tau); the observation with the largest error is kept
    uncensored at its true time.
    """
    rng = replicate_rng(spec.seed, rep_index, STREAM_TRAIN)
    covariates = _covariates(rng, spec.n)
    errors = sample_errors(spec.error, rng, spec.n)
    b0, b1, b2 = spec.true_beta

    log_event = b0 + covariates @ np.array([b1, b2]) + errors
    log_censor = rng.uniform(0.0, spec.tau, spec.n)
    deltas = (log_event <= log_censor).astype(int)
    log_times = np.where(deltas == 1, log_event, log_censor)

    largest = int(np.argmax(errors))
    deltas[largest], log_times[largest] = 1, log_event[largest]

    return SurvivalDataset.from_log_times(log_times, deltas, covariates, ("x1", "x2"))


def generate_test_set(spec: ScenarioSpec, rep_index: int, m: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """
    Uncensored test covariates and true log failure times.
    """
    m = m or spec.test_m
    rng = replicate_rng(spec.seed, rep_index, STREAM_TEST)
    covariates = _covariates(rng, m)
    b0, b1, b2 = spec.true_beta
    log_times = b0 + covariates @ np.array([b1, b2]) + sample_errors(spec.error, rng, m)
    return covariates, log_times


def _fit_methods(data: SurvivalDataset, methods) -> dict:
    fits = {}
    for method in methods:
        try:
            result = get_fitter(method)(data)
            if not np.all(np.isfinite(result.coefficients)):
                raise ValidationError(f"{method} returned non-finite coefficients")
            fits[method] = {"coefficients": result.coefficients, "converged": result.converged}
        except Exception as e:  # pylint: disable=broad-except
            logger.exception(e)
            fits[method] = {"error": f"{e.__class__.__name__}: {e}"}
    return fits


def _estimation_job(spec: ScenarioSpec, rep_index: int, methods) -> dict:
    return _fit_methods(generate_replicate(spec, rep_index), methods)


def _prediction_job(spec: ScenarioSpec, rep_index: int, methods) -> dict:
    fits = _fit_methods(generate_replicate(spec, rep_index), methods)
    covariates, log_times = generate_test_set(spec, rep_index)
    for fit in fits.values():
        if "coefficients" in fit:
            predicted = fit["coefficients"][0] + covariates @ fit["coefficients"][1:]
            fit["rmsep"] = float(np.sqrt(np.mean((log_times - predicted) ** 2)))
    return fits


@dataclass
class ScenarioResult:
    spec: ScenarioSpec
    methods: list
    estimates: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)
    nonconverged: dict = field(default_factory=dict)

    @property
    def all_converged(self) -> bool:
        return not any(self.failures.values()) and not any(self.nonconverged.values())

    def summary(self) -> pd.DataFrame:
        return summarize_estimates(self.estimates, self.spec.true_beta, self.failures)


@dataclass
class PredictionResult:
    spec: ScenarioSpec
    methods: list
    rmsep: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)
    nonconverged: dict = field(default_factory=dict)

    @property
    def all_converged(self) -> bool:
        return not any(self.failures.values()) and not any(self.nonconverged.values())

    def summary(self) -> pd.DataFrame:
        """
        Boxplot statistics of the per-replicate RMSEP values, one row per method.
        """
        rows = []
        for method in self.methods:
            values = np.asarray(self.rmsep[method], dtype=float)
            rows.append({"method": method, **tukey_summary(values), "failures": self.failures[method]})
        return pd.DataFrame(rows)


def _collect(runner: JobRunner, methods, key: str, replications: int):
    values = {method: np.full((replications,) if key == "rmsep" else (replications, 3), np.nan) for method in methods}
    failures = {method: 0 for method in methods}
    nonconverged = {method: 0 for method in methods}

    for rep_index, job in enumerate(runner.run()):
        for method in methods:
            fit = job.result.get(method, {}) if job.ok else {}
            if key not in fit:
                failures[method] += 1
                continue
            values[method][rep_index] = fit[key]
            nonconverged[method] += not fit["converged"]

    return values, failures, nonconverged


def run_scenario(spec: ScenarioSpec, methods, workers: int = 1) -> ScenarioResult:
    """
    Fit every method on every replicate and keep the coefficient estimates; failures are tallied per method.
    """
    methods = resolve_methods(methods)
    if not methods:
        raise ValidationError("run_scenario needs at least one method")

    logger.info(f"Running scenario {spec.name or spec.error.label}: R={spec.replications}, methods={methods}")
    runner = JobRunner(workers)
    for rep_index in range(spec.replications):
        runner.enqueue(_estimation_job, name=f"replicate-{rep_index}", spec=spec, rep_index=rep_index, methods=methods)

    estimates, failures, nonconverged = _collect(runner, methods, "coefficients", spec.replications)
    return ScenarioResult(spec=spec, methods=methods, estimates=estimates, failures=failures, nonconverged=nonconverged)


def summarize_estimates(estimates: dict, true_beta, failures: dict | None = None) -> pd.DataFrame:
    """
    Per method and coefficient: MSE = mean((b - beta)^2) and bias = mean(b - beta) over successful replicates.
    """
    failures = failures or {}
    true_beta = np.asarray(true_beta, dtype=float)
    rows = []
    for method, values in estimates.items():
        values = np.asarray(values, dtype=float)
        ok = values[np.all(np.isfinite(values), axis=1)]
        errors = ok - true_beta
        for k in range(len(true_beta)):
            rows.append(
                {
                    "method": method,
                    "coefficient": f"beta{k}",
                    "mse": float(np.mean(errors[:, k] ** 2)) if len(ok) else float("nan"),
                    "bias": float(np.mean(errors[:, k])) if len(ok) else float("nan"),
                    "failures": int(failures.get(method, 0)),
                }
            )
    return pd.DataFrame(rows, columns=["method", "coefficient", "mse", "bias", "failures"])


def run_prediction_study(
    spec: ScenarioSpec,
    methods,
    train_n: int | None = None,
    test_m: int | None = None,
    workers: int = 1,
) -> PredictionResult:
    """
    Fit on a training replicate and score predicted log-times on an independent uncensored test set (RMSEP).
    """
    methods = resolve_methods(methods)
    if not methods:
        raise ValidationError("run_prediction_study needs at least one method")

    spec = replace(spec, n=train_n or spec.n, test_m=test_m or spec.test_m, study=STUDY_PREDICTION)
    logger.info(f"Running prediction study {spec.name}: train n={spec.n}, test m={spec.test_m}, R={spec.replications}")

    runner = JobRunner(workers)
    for rep_index in range(spec.replications):
        runner.enqueue(_prediction_job, name=f"replicate-{rep_index}", spec=spec, rep_index=rep_index, methods=methods)

    rmsep, failures, nonconverged = _collect(runner, methods, "rmsep", spec.replications)
    return PredictionResult(spec=spec, methods=methods, rmsep=rmsep, failures=failures, nonconverged=nonconverged)


def lung_like(n: int = 228, seed: int = constants.DEFAULT_SEED, missing: int = 0) -> pd.DataFrame:
    """
    Synthetic cohort shaped like an advanced lung cancer study: survival in days, roughly a quarter censored,
    with age, sex (1 = male, 2 = female) and ECOG score as covariates.

    missing blanks that many covariate cells to exercise the complete-case rule of ingestion.
    """
    rng = replicate_rng(seed, 0, STREAM_TRAIN)
    age = np.round(rng.normal(62.0, 9.0, n))
    sex = rng.choice([1, 2], size=n, p=[0.6, 0.4])
    ecog = rng.choice([0, 1, 2, 3], size=n, p=[0.27, 0.5, 0.22, 0.01])

    family = ErrorFamily.skew_t(0.0, 1.0, -4.0, 5)
    log_event = 6.2 - 0.01 * (age - 62.0) + 0.35 * (sex - 1) - 0.35 * ecog + 0.8 * sample_errors(family, rng, n)
    log_censor = np.log(rng.uniform(500.0, 1100.0, n))

    status = (log_event <= log_censor).astype(int)
    time = np.maximum(np.round(np.exp(np.minimum(log_event, log_censor))), 5.0)

    frame = pd.DataFrame({"time": time, "status": status, "age": age, "sex": sex, "ecog": ecog.astype(float)})
    if missing:
        rows = rng.choice(n, size=missing, replace=False)
        columns = rng.choice(["age", "ecog"], size=missing)
        for row, column in zip(rows, columns):
            frame.loc[row, column] = np.nan
    return frame
