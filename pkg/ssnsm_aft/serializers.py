import json
from importlib import resources

import numpy as np

from .exceptions import ValidationError
from .models import EstimatorResult, FittedModel, KaplanMeierCurve, LatentDistribution, StructuralParams

__all__ = (
    "FittedModelSerializer",
    "EstimatorResultSerializer",
    "load_schema",
    "dump_json",
    "load_json",
)

SCHEMA_FILE = "fit_report.schema.json"


def _plain(value):
    if isinstance(value, np.ndarray):
        return [float(v) for v in value]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    return value


class Serializer:
    """
    Maps a domain object to a JSON-ready dict restricted to Meta.fields, and back.
    """

    class Meta:
        fields = ()

    def __init__(self, instance=None, data: dict | None = None):
        self.instance = instance
        self.initial_data = data

    @property
    def data(self) -> dict:
        representation = self.to_representation(self.instance)
        return {key: representation[key] for key in self.Meta.fields}

    def to_representation(self, instance) -> dict:
        raise NotImplementedError

    def to_internal_value(self, data: dict):
        raise NotImplementedError

    def save(self):
        missing = [key for key in self.Meta.fields if key not in (self.initial_data or {})]
        if missing:
            raise ValidationError(f"{self.__class__.__name__}: missing fields {', '.join(missing)}")
        self.instance = self.to_internal_value(self.initial_data)
        return self.instance


class FittedModelSerializer(Serializer):
    class Meta:
        fields = (
            "theta",
            "q",
            "beta0_corrected",
            "loglik",
            "loglik_trace",
            "converged",
            "q_converged",
            "outer_iterations",
            "covariate_names",
        )

    def to_representation(self, instance: FittedModel) -> dict:
        return {
            "theta": {
                "b0": instance.theta.b0,
                "beta": _plain(instance.theta.beta),
                "slant": instance.theta.slant,
            },
            "q": {"support": _plain(instance.q.support), "weights": _plain(instance.q.weights)},
            "beta0_corrected": instance.beta0_corrected,
            "loglik": instance.loglik,
            "loglik_trace": list(instance.loglik_trace),
            "converged": bool(instance.converged),
            "q_converged": bool(instance.q_converged),
            "outer_iterations": int(instance.outer_iterations),
            "covariate_names": list(instance.covariate_names),
        }

    def to_internal_value(self, data: dict) -> FittedModel:
        theta = StructuralParams(data["theta"]["b0"], data["theta"]["beta"], data["theta"]["slant"])
        q = LatentDistribution(data["q"]["support"], data["q"]["weights"])
        return FittedModel(
            theta=theta,
            q=q,
            beta0_corrected=data["beta0_corrected"],
            loglik=data["loglik"],
            loglik_trace=data["loglik_trace"],
            converged=data["converged"],
            q_converged=data["q_converged"],
            outer_iterations=data["outer_iterations"],
            covariate_names=data["covariate_names"],
        )


class EstimatorResultSerializer(Serializer):
    class Meta:
        fields = ("method", "beta0", "beta", "extra", "converged", "residual_curve", "model")

    def to_representation(self, instance: EstimatorResult) -> dict:
        curve = instance.residual_curve
        return {
            "method": instance.method,
            "beta0": instance.beta0,
            "beta": _plain(instance.beta),
            "extra": {key: _plain(value) for key, value in instance.extra.items()},
            "converged": bool(instance.converged),
            "residual_curve": (
                None if curve is None else {"times": _plain(curve.times), "survival": _plain(curve.survival)}
            ),
            "model": None if instance.model is None else FittedModelSerializer(instance.model).data,
        }

    def to_internal_value(self, data: dict) -> EstimatorResult:
        curve = None
        if data["residual_curve"] is not None:
            times = np.asarray(data["residual_curve"]["times"], dtype=float)
            curve = KaplanMeierCurve(
                times=times,
                survival=data["residual_curve"]["survival"],
                at_risk=np.zeros(len(times), dtype=int),
                events=np.zeros(len(times), dtype=int),
            )
        model = None
        if data["model"] is not None:
            model = FittedModelSerializer(data=data["model"]).save()

        return EstimatorResult(
            method=data["method"],
            beta0=data["beta0"],
            beta=data["beta"],
            extra=data["extra"],
            converged=data["converged"],
            residual_curve=curve,
            model=model,
        )


def load_schema() -> dict:
    return json.loads(resources.files("ssnsm_aft").joinpath("schema", SCHEMA_FILE).read_text(encoding="utf-8"))


def _finite_or_none(value):
    if isinstance(value, dict):
        return {key: _finite_or_none(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_finite_or_none(item) for item in value]
    if isinstance(value, (float, np.floating)) and not np.isfinite(value):
        return None
    return value


def dump_json(document: dict, path) -> None:
    """
    Write a JSON document at full float precision; NaN and infinities become null.
    """
    with open(path, "w", encoding="utf-8") as f:
        json.dump(_finite_or_none(document), f, indent=2, allow_nan=False)
        f.write("\n")


def load_json(path) -> dict:
    with open(path, encoding="utf-8") as f:
        return json.load(f)
