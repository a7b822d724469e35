"""
Output tables. Each table declares its columns in Meta.fields and writes CSV at six significant digits.
"""
import numpy as np
import pandas as pd

from .utils import format_estimate

__all__ = (
    "CoefficientTable",
    "ScenarioTable",
    "RmsepTable",
    "RmsepSummaryTable",
    "BrierTable",
    "IbsTable",
    "CurveTable",
    "PredictionTable",
)

FLOAT_FORMAT = "%.6g"


class Table:
    class Meta:
        fields = ()

    def __init__(self, rows):
        self.rows = list(rows)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=list(self.Meta.fields))

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False, float_format=FLOAT_FORMAT)

    def __len__(self):
        return len(self.rows)


class CoefficientTable(Table):
    """
    Estimate and bootstrap SE per method and coefficient, with the "est (se)" display column.
    """

    class Meta:
        fields = ("method", "coefficient", "estimate", "se", "display", "converged")

    @classmethod
    def from_results(cls, results, coefficient_names, standard_errors=None):
        standard_errors = standard_errors or {}
        rows = []
        for result in results:
            se = standard_errors.get(result.method)
            for k, name in enumerate(coefficient_names):
                se_k = float(se[k]) if se is not None else np.nan
                rows.append(
                    {
                        "method": result.method,
                        "coefficient": name,
                        "estimate": float(result.coefficients[k]),
                        "se": se_k,
                        "display": format_estimate(float(result.coefficients[k]), se_k),
                        "converged": bool(result.converged),
                    }
                )
        return cls(rows)

    def wide(self) -> pd.DataFrame:
        """
        Methods as rows and coefficients as columns of "est (se)" cells.
        """
        frame = self.to_frame()
        order = list(dict.fromkeys(frame["coefficient"]))
        return frame.pivot(index="method", columns="coefficient", values="display")[order]


class ScenarioTable(Table):
    class Meta:
        fields = ("method", "coefficient", "mse", "bias", "failures")

    @classmethod
    def from_frame(cls, frame: pd.DataFrame):
        return cls(frame[list(cls.Meta.fields)].to_dict("records"))


class RmsepTable(Table):
    class Meta:
        fields = ("method", "replicate", "rmsep")

    @classmethod
    def from_values(cls, rmsep: dict):
        rows = []
        for method, values in rmsep.items():
            rows.extend({"method": method, "replicate": j, "rmsep": float(v)} for j, v in enumerate(values))
        return cls(rows)


class RmsepSummaryTable(Table):
    class Meta:
        fields = ("method", "min", "whisker_low", "q1", "median", "q3", "whisker_high", "max", "failures")

    @classmethod
    def from_frame(cls, frame: pd.DataFrame):
        return cls(frame[list(cls.Meta.fields)].to_dict("records"))


class BrierTable(Table):
    class Meta:
        fields = ("method", "t_star", "brier")


class IbsTable(Table):
    class Meta:
        fields = ("method", "ibs")


class CurveTable(Table):
    """
    Long-format survival curves: one row per (method, profile, t).
    """

    class Meta:
        fields = ("method", "profile", "t", "survival")

    @classmethod
    def from_curves(cls, curves: dict):
        rows = []
        for (method, profile), (times, survival) in curves.items():
            rows.extend(
                {"method": method, "profile": profile, "t": float(t), "survival": float(s)}
                for t, s in zip(times, survival)
            )
        return cls(rows)


class PredictionTable(Table):
    class Meta:
        fields = ("row", "method", "predicted_log_time", "t", "survival")
