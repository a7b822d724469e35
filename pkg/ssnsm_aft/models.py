import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import ValidationError

__all__ = (
    "SurvivalDataset",
    "LatentDistribution",
    "StructuralParams",
    "FittedModel",
    "KaplanMeierCurve",
    "EstimatorResult",
)

logger = logging.getLogger(__name__)


def _frozen_array(values, dtype=float) -> np.ndarray:
    array = np.array(values, dtype=dtype)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class SurvivalDataset:
    """
    Right-censored observations (y_i, delta_i, x_i) for an accelerated failure time fit.
    """

    times: np.ndarray
    deltas: np.ndarray
    covariates: np.ndarray
    covariate_names: tuple = ()

    def __post_init__(self):
        times = _frozen_array(self.times).reshape(-1)
        deltas = _frozen_array(self.deltas, dtype=int).reshape(-1)
        covariates = np.array(self.covariates, dtype=float)
        if covariates.ndim == 1:
            covariates = covariates.reshape(len(times), -1)
        covariates.setflags(write=False)

        object.__setattr__(self, "times", times)
        object.__setattr__(self, "deltas", deltas)
        object.__setattr__(self, "covariates", covariates)
        if not self.covariate_names:
            object.__setattr__(self, "covariate_names", tuple(f"x{j + 1}" for j in range(covariates.shape[1])))
        else:
            object.__setattr__(self, "covariate_names", tuple(self.covariate_names))

        self.clean()

    def clean(self):
        n = len(self.times)
        if len(self.deltas) != n or self.covariates.shape[0] != n:
            raise ValidationError("times, deltas and covariates must have the same number of rows")

        if len(self.covariate_names) != self.p:
            raise ValidationError("covariate_names must name every covariate column")

        if not np.all(np.isfinite(self.times)) or np.any(self.times <= 0):
            raise ValidationError("All observed times must be positive and finite.")

        if not np.all(np.isin(self.deltas, (0, 1))):
            raise ValidationError("Censoring indicators must be 0 or 1.")

        if not np.any(self.deltas == 1):
            raise ValidationError("At least one event (delta = 1) is required.")

        if not np.all(np.isfinite(self.covariates)):
            raise ValidationError("Covariates must be finite.")

        if n <= self.p + 2:
            raise ValidationError(f"Need more than p + 2 = {self.p + 2} observations, got {n}.")

    @classmethod
    def from_log_times(cls, log_times, deltas, covariates, covariate_names=()):
        return cls(np.exp(np.asarray(log_times, dtype=float)), deltas, covariates, covariate_names)

    @property
    def n(self) -> int:
        return len(self.times)

    @property
    def p(self) -> int:
        return self.covariates.shape[1]

    @property
    def log_times(self) -> np.ndarray:
        return np.log(self.times)

    @property
    def censoring_fraction(self) -> float:
        return float(1.0 - self.deltas.mean())

    def shift_log_times(self, shift: float) -> "SurvivalDataset":
        return replace(self, times=self.times * np.exp(shift))

    def subset(self, index) -> "SurvivalDataset":
        index = np.asarray(index)
        return replace(
            self,
            times=self.times[index],
            deltas=self.deltas[index],
            covariates=self.covariates[index],
        )


@dataclass(frozen=True, eq=False)
class LatentDistribution:
    """
    Discrete latent distribution Q over scale parameters: support points and their weights.
    """

    support: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "support", _frozen_array(self.support).reshape(-1))
        object.__setattr__(self, "weights", _frozen_array(self.weights).reshape(-1))
        self.clean()

    def clean(self):
        if len(self.support) == 0:
            raise ValidationError("A latent distribution needs at least one support point.")

        if len(self.support) != len(self.weights):
            raise ValidationError("support and weights must have the same length")

        if not np.all(np.isfinite(self.support)) or np.any(self.support <= 0):
            raise ValidationError("Support points must be positive and finite.")

        if np.any(np.diff(self.support) <= 0):
            raise ValidationError("Support points must be strictly increasing.")

        if np.any(self.weights <= 0):
            raise ValidationError("Weights must be strictly positive.")

        if abs(self.weights.sum() - 1.0) > 1e-10:
            raise ValidationError(f"Weights must sum to 1, got {self.weights.sum()!r}")

    @classmethod
    def point_mass(cls, sigma: float) -> "LatentDistribution":
        return cls([sigma], [1.0])

    @classmethod
    def from_unsorted(cls, support, weights) -> "LatentDistribution":
        """
        Build a distribution from arbitrary points, dropping zero weights and renormalizing.
        """
        support = np.asarray(support, dtype=float)
        weights = np.asarray(weights, dtype=float)
        keep = weights > 0
        order = np.argsort(support[keep])
        support, weights = support[keep][order], weights[keep][order]
        return cls(support, weights / weights.sum())

    @property
    def k(self) -> int:
        return len(self.support)

    @property
    def mean_scale(self) -> float:
        return float(np.dot(self.weights, self.support))


@dataclass(frozen=True, eq=False)
class StructuralParams:
    """
    theta = (b0, beta, slant): location intercept, slope vector and slant parameter.
    """

    b0: float
    beta: np.ndarray
    slant: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "b0", float(self.b0))
        object.__setattr__(self, "beta", _frozen_array(self.beta).reshape(-1))
        object.__setattr__(self, "slant", float(self.slant))
        self.clean()

    def clean(self):
        if not (np.isfinite(self.b0) and np.isfinite(self.slant) and np.all(np.isfinite(self.beta))):
            raise ValidationError("Structural parameters must be finite.")

    @property
    def p(self) -> int:
        return len(self.beta)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([[self.b0], self.beta, [self.slant]])

    @classmethod
    def from_vector(cls, vector) -> "StructuralParams":
        vector = np.asarray(vector, dtype=float)
        return cls(b0=vector[0], beta=vector[1:-1], slant=vector[-1])


@dataclass(frozen=True, eq=False)
class FittedModel:
    """
    Converged (theta, Q) of the SSNSM error model with the mean-corrected intercept.
    """

    theta: StructuralParams
    q: LatentDistribution
    beta0_corrected: float
    loglik: float
    loglik_trace: tuple = ()
    converged: bool = False
    q_converged: bool = False
    outer_iterations: int = 0
    covariate_names: tuple = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "loglik_trace", tuple(float(v) for v in self.loglik_trace))
        object.__setattr__(self, "covariate_names", tuple(self.covariate_names))
        self.clean()

    def clean(self):
        from .distributions import sn_mean_shift

        expected = self.theta.b0 + sn_mean_shift(self.theta.slant) * self.q.mean_scale
        if self.beta0_corrected != expected:
            raise ValidationError("beta0_corrected does not match b0 + mean shift * E_Q[sigma]")

        trace = np.asarray(self.loglik_trace)
        if len(trace) > 1 and np.any(np.diff(trace) < -1e-8):
            logger.warning("Log-likelihood trace decreased during the alternation")

    @property
    def beta(self) -> np.ndarray:
        return self.theta.beta

    @property
    def coefficients(self) -> np.ndarray:
        return np.concatenate([[self.beta0_corrected], self.theta.beta])


@dataclass(frozen=True, eq=False)
class KaplanMeierCurve:
    """
    Product-limit step function; survival[k] is the value just after times[k].
    """

    times: np.ndarray
    survival: np.ndarray
    at_risk: np.ndarray
    events: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "times", _frozen_array(self.times))
        object.__setattr__(self, "survival", _frozen_array(self.survival))
        object.__setattr__(self, "at_risk", _frozen_array(self.at_risk, dtype=int))
        object.__setattr__(self, "events", _frozen_array(self.events, dtype=int))
        self.clean()

    def clean(self):
        if np.any(np.diff(self.times) <= 0):
            raise ValidationError("Kaplan-Meier times must be strictly increasing.")

        if np.any(np.diff(self.survival) > 1e-15) or np.any(self.survival < 0) or np.any(self.survival > 1):
            raise ValidationError("Kaplan-Meier survival must be nonincreasing and within [0, 1].")

    def __call__(self, t):
        """
        Evaluate the right-continuous step function at t (scalar or array).
        """
        t = np.asarray(t, dtype=float)
        index = np.searchsorted(self.times, t, side="right")
        values = np.concatenate([[1.0], self.survival])[index]
        return float(values) if values.ndim == 0 else values

    @property
    def jumps(self) -> np.ndarray:
        """
        Probability mass placed at each step time.
        """
        return -np.diff(np.concatenate([[1.0], self.survival]))

    def mean(self) -> float:
        """
        Mean of the estimated distribution over the mass it places.
        """
        jumps = self.jumps
        total = jumps.sum()
        if total <= 0:
            return float("nan")
        return float(np.dot(self.times, jumps) / total)


@dataclass(frozen=True, eq=False)
class EstimatorResult:
    """
    Uniform result shape for the five estimators.
    """

    method: str
    beta0: float
    beta: np.ndarray
    extra: dict = field(default_factory=dict)
    converged: bool = True
    residual_curve: KaplanMeierCurve | None = None
    model: FittedModel | None = None

    def __post_init__(self):
        object.__setattr__(self, "beta0", float(self.beta0))
        object.__setattr__(self, "beta", _frozen_array(self.beta).reshape(-1))
        object.__setattr__(self, "extra", {key: float(value) for key, value in self.extra.items()})
        self.clean()

    def clean(self):
        if self.converged and not (np.isfinite(self.beta0) and np.all(np.isfinite(self.beta))):
            raise ValidationError(f"{self.method}: converged result has non-finite coefficients")

    @property
    def coefficients(self) -> np.ndarray:
        return np.concatenate([[self.beta0], self.beta])

    @property
    def loglik(self) -> float | None:
        return self.extra.get("loglik")
