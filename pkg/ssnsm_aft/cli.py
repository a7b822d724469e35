"""
Command-line entry point: `ssnsm-aft --command {fit,simulate,predict,evaluate} ...`.

Exit codes: 0 when every requested fit converged, 1 when a fit failed or did not converge, 2 for bad input.
"""
import argparse
import logging
import logging.config
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
import yaml

from . import __version__, constants
from .configuration import LOGGING
from .evaluation import BrierInputs, bootstrap_se, brier_scores, integrated_brier
from .exceptions import IngestionError, SsnsmError, ValidationError
from .methods import get_fitter, predict_survival, resolve_methods
from .models import SurvivalDataset
from .serializers import EstimatorResultSerializer, dump_json, load_json
from .simulation import STUDY_ESTIMATION, get_preset, run_prediction_study, run_scenario
from .tables import (
    BrierTable,
    CoefficientTable,
    CurveTable,
    IbsTable,
    PredictionTable,
    RmsepSummaryTable,
    RmsepTable,
    ScenarioTable,
)
from .utils import parse_profiles

__all__ = (
    "ColumnMapping",
    "RunConfig",
    "build_parser",
    "load_config_file",
    "read_survival_csv",
    "ingest_csv",
    "cmd_fit",
    "cmd_simulate",
    "cmd_predict",
    "cmd_evaluate",
    "main",
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FIT_FAILED = 1
EXIT_USAGE = 2


@dataclass(frozen=True)
class ColumnMapping:
    time: str = "time"
    status: str = "status"
    covariates: tuple = ()


@dataclass(frozen=True)
class RunConfig:
    command: str
    input: str | None = None
    model: str | None = None
    columns: ColumnMapping = field(default_factory=ColumnMapping)
    methods: tuple = constants.ALL_METHODS
    seed: int = constants.DEFAULT_SEED
    workers: int = 1
    preset: str | None = None
    reps: int | None = None
    bootstrap: int = constants.BOOTSTRAP_REPLICATES
    tmax: float = constants.LUNG_T_MAX
    t_star: tuple = ()
    profiles: str | None = None
    out: str = "results"

    def __post_init__(self):
        self.clean()

    def clean(self):
        if self.command not in constants.COMMANDS:
            raise ValidationError(f"Unknown command {self.command!r}")

        if self.command in (constants.COMMAND_FIT, constants.COMMAND_EVALUATE, constants.COMMAND_PREDICT):
            if not self.input:
                raise ValidationError(f"{self.command} needs --input")

        if self.command == constants.COMMAND_PREDICT and not self.model:
            raise ValidationError("predict needs --model")

        if self.command == constants.COMMAND_SIMULATE and not self.preset:
            raise ValidationError("simulate needs --preset")

        if not self.tmax > 0:
            raise ValidationError("--tmax must be positive")

        if any(t <= 0 for t in self.t_star):
            raise ValidationError("--t-star values must be positive")

        if self.bootstrap < 0 or (self.reps is not None and self.reps < 1) or self.workers < 1:
            raise ValidationError("--bootstrap must be >= 0, --reps and --workers >= 1")

    @classmethod
    def from_settings(cls, values: dict) -> "RunConfig":
        return cls(
            command=values["command"],
            input=values["input"],
            model=values["model"],
            columns=ColumnMapping(
                time=values["time_col"],
                status=values["status_col"],
                covariates=tuple(values["covariates"] or ()),
            ),
            methods=tuple(resolve_methods(values["methods"])),
            seed=values["seed"],
            workers=values["workers"],
            preset=values["preset"],
            reps=values["reps"],
            bootstrap=values["bootstrap"],
            tmax=values["tmax"],
            t_star=tuple(values["t_star"] or ()),
            profiles=values["profiles"],
            out=values["out"],
        )


def build_parser() -> argparse.ArgumentParser:
    """
    One argument group per settings section, one flag per declared parameter.
    """
    parser = argparse.ArgumentParser(
        prog="ssnsm-aft",
        description="AFT regression with a semiparametric skew-normal scale mixture error",
        argument_default=None,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")

    for section in constants.RUN_SETTINGS.sections:
        group = parser.add_argument_group(section.name or "Required")
        for param in section.params:
            help_text = param.help_text
            if param.initial is not None:
                help_text = f"{help_text} (default: {param.initial})"
            if param.env:
                help_text = f"{help_text}; env {param.env}"
            group.add_argument(
                param.flag,
                *param.aliases,
                dest=param.key,
                metavar=param.placeholder,
                help=help_text,
            )

    return parser


def load_config_file(path) -> dict:
    with open(path, encoding="utf-8") as f:
        values = yaml.safe_load(f) or {}
    if not isinstance(values, dict):
        raise ValidationError(f"{path}: the config file must be a mapping of key: value pairs")
    return {str(key).replace("-", "_"): value for key, value in values.items()}


def read_survival_csv(path, mapping: ColumnMapping) -> tuple[SurvivalDataset, int]:
    """
    Read a CSV into a dataset, dropping rows with a missing mapped value. Returns the dataset and the drop count.
    """
    try:
        raw = pd.read_csv(path, encoding="utf-8", skipinitialspace=True)
    except (OSError, UnicodeDecodeError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise IngestionError(f"{path}: {e}")

    covariates = list(mapping.covariates) or [c for c in raw.columns if c not in (mapping.time, mapping.status)]
    columns = [mapping.time, mapping.status, *covariates]
    missing = [column for column in columns if column not in raw.columns]
    if missing:
        raise IngestionError(f"{path}: missing columns {', '.join(missing)}")
    if not covariates:
        raise IngestionError(f"{path}: no covariate columns")

    raw = raw[columns]
    frame = raw.apply(pd.to_numeric, errors="coerce")

    # Header is line 1
    lines = raw.index.to_numpy() + 2
    garbled = frame.isna() & raw.notna()
    if garbled.to_numpy().any():
        row, column = np.argwhere(garbled.to_numpy())[0]
        value = raw.iat[row, column]
        raise IngestionError(f"column {columns[column]!r} is not numeric: {value!r}", line=int(lines[row]))

    complete = frame.notna().all(axis=1).to_numpy()
    dropped = int((~complete).sum())
    frame, lines = frame[complete], lines[complete]
    if dropped:
        logger.info(f"Dropped {dropped} rows with missing values from {path}")

    times = frame[mapping.time].to_numpy(dtype=float)
    status = frame[mapping.status].to_numpy(dtype=float)
    bad_time = np.flatnonzero(~(times > 0) | ~np.isfinite(times))
    if len(bad_time):
        row = bad_time[0]
        raise IngestionError(f"time must be positive, got {float(times[row])!r}", line=int(lines[row]))
    bad_status = np.flatnonzero(~np.isin(status, (0, 1)))
    if len(bad_status):
        row = bad_status[0]
        raise IngestionError(f"status must be 0 or 1, got {float(status[row])!r}", line=int(lines[row]))
    if not np.any(status == 1):
        raise IngestionError(f"{path}: no events (status = 1) after dropping incomplete rows")

    try:
        data = SurvivalDataset(times, status.astype(int), frame[covariates].to_numpy(dtype=float), tuple(covariates))
    except ValidationError as e:
        raise IngestionError(f"{path}: {e}")

    logger.info(f"Read {data.n} rows from {path} ({data.censoring_fraction:.1%} censored)")
    return data, dropped


def ingest_csv(path, mapping: ColumnMapping) -> SurvivalDataset:
    return read_survival_csv(path, mapping)[0]


def _output_dir(config: RunConfig) -> Path:
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _fit(method: str, data: SurvivalDataset):
    try:
        return get_fitter(method)(data)
    except SsnsmError as e:
        logger.error(f"{method}: fit failed: {e}")
    except (ArithmeticError, np.linalg.LinAlgError) as e:
        logger.error(f"{method}: fit failed: {e.__class__.__name__}: {e}")
    return None


def _curve_times(t_max: float) -> np.ndarray:
    return np.linspace(t_max / constants.CURVE_POINTS, t_max, constants.CURVE_POINTS)


def cmd_fit(config: RunConfig) -> int:
    """
    Fit every selected method, bootstrap the SEs, score IBS, and write tables, survival curves and JSON dumps.
    """
    data, dropped = read_survival_csv(config.input, config.columns)
    out = _output_dir(config)
    coefficient_names = ["(Intercept)", *data.covariate_names]
    profiles = parse_profiles(config.profiles, data.covariate_names, data.covariates.mean(axis=0))

    results, standard_errors, entries, ibs_rows, curves = [], {}, [], [], {}
    exit_code = EXIT_OK
    for method in config.methods:
        result = _fit(method, data)
        if result is None:
            exit_code = EXIT_FIT_FAILED
            continue
        if not result.converged:
            logger.warning(f"{method}: fit did not converge")
            exit_code = EXIT_FIT_FAILED
        results.append(result)

        boot = None
        if config.bootstrap >= 2:
            boot = bootstrap_se(data, get_fitter(method), config.bootstrap, config.seed, config.workers)
            standard_errors[method] = boot.se

        ibs = integrated_brier(BrierInputs.build(data, result), config.tmax)
        ibs_rows.append({"method": method, "ibs": ibs})

        times = _curve_times(config.tmax)
        for name, vector in profiles.items():
            curves[(method, name)] = (times, predict_survival(result, vector, times)[0])

        dump_json(EstimatorResultSerializer(result).data, out / f"model_{method}.json")
        entries.append(
            {
                "estimator": EstimatorResultSerializer(result).data,
                "se": None if boot is None else [float(v) for v in boot.se],
                "bootstrap_failures": 0 if boot is None else boot.failures,
                "bootstrap_flagged": False if boot is None else boot.flagged,
                "ibs": ibs,
            }
        )
        logger.info(f"{method}: coefficients {np.round(result.coefficients, 4).tolist()}, IBS {ibs:.4f}")

    table = CoefficientTable.from_results(results, coefficient_names, standard_errors)
    table.to_csv(out / "coefficients.csv")
    if len(table):
        table.wide().to_csv(out / "coefficients_wide.csv")
    IbsTable(ibs_rows).to_csv(out / "ibs.csv")
    CurveTable.from_curves(curves).to_csv(out / "curves.csv")

    dump_json(
        {
            "command": constants.COMMAND_FIT,
            "input": str(config.input),
            "n": data.n,
            "dropped_rows": dropped,
            "censoring_fraction": data.censoring_fraction,
            "covariates": list(data.covariate_names),
            "seed": config.seed,
            "bootstrap_replicates": config.bootstrap,
            "tmax": config.tmax,
            "results": entries,
        },
        out / "report.json",
    )
    return exit_code


def cmd_simulate(config: RunConfig) -> int:
    spec = get_preset(config.preset, replications=config.reps, seed=config.seed)
    out = _output_dir(config)
    stem = config.preset.replace("/", "_")

    if spec.study == STUDY_ESTIMATION:
        result = run_scenario(spec, config.methods, workers=config.workers)
        ScenarioTable.from_frame(result.summary()).to_csv(out / f"{stem}.csv")
    else:
        result = run_prediction_study(spec, config.methods, workers=config.workers)
        RmsepTable.from_values(result.rmsep).to_csv(out / f"{stem}_rmsep.csv")
        RmsepSummaryTable.from_frame(result.summary()).to_csv(out / f"{stem}_rmsep_summary.csv")

    for method in result.methods:
        if result.failures[method] or result.nonconverged[method]:
            logger.warning(
                f"{method}: {result.failures[method]} failed and {result.nonconverged[method]} non-converged "
                f"of {spec.replications} replicates"
            )
    return EXIT_OK if result.all_converged else EXIT_FIT_FAILED


def cmd_predict(config: RunConfig) -> int:
    """
    Predicted log-times (and survival at --t-star) for every complete row of the input CSV.
    """
    result = EstimatorResultSerializer(data=load_json(config.model)).save()
    names = list(config.columns.covariates)
    if not names and result.model is not None:
        names = list(result.model.covariate_names)
    if len(names) != len(result.beta):
        raise ValidationError(f"Name the {len(result.beta)} covariate columns of the model with --covariates")

    try:
        frame = pd.read_csv(config.input, encoding="utf-8", skipinitialspace=True)
    except (OSError, UnicodeDecodeError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise IngestionError(f"{config.input}: {e}")
    missing = [name for name in names if name not in frame.columns]
    if missing:
        raise IngestionError(f"{config.input}: missing columns {', '.join(missing)}")

    covariates = frame[names].apply(pd.to_numeric, errors="coerce")
    complete = covariates.notna().all(axis=1).to_numpy()
    rows = np.flatnonzero(complete)
    x = covariates.to_numpy(dtype=float)[complete]

    predicted = result.beta0 + x @ result.beta
    times = list(config.t_star) or [np.nan]
    survival = predict_survival(result, x, config.t_star) if config.t_star else np.full((len(rows), 1), np.nan)
    table_rows = [
        {
            "row": int(row),
            "method": result.method,
            "predicted_log_time": predicted[i],
            "t": t,
            "survival": survival[i, j],
        }
        for i, row in enumerate(rows)
        for j, t in enumerate(times)
    ]

    PredictionTable(table_rows).to_csv(_output_dir(config) / "predictions.csv")
    logger.info(f"Wrote {len(rows)} predictions ({int((~complete).sum())} incomplete rows skipped)")
    return EXIT_OK


def cmd_evaluate(config: RunConfig) -> int:
    """
    Brier scores at --t-star (default: quartiles of the event times) and IBS up to --tmax for each method.
    """
    data, _ = read_survival_csv(config.input, config.columns)
    t_star = config.t_star or tuple(np.percentile(data.times[data.deltas == 1], [25, 50, 75]))

    brier_rows, ibs_rows = [], []
    exit_code = EXIT_OK
    for method in config.methods:
        result = _fit(method, data)
        if result is None or not result.converged:
            exit_code = EXIT_FIT_FAILED
        if result is None:
            continue

        inputs = BrierInputs.build(data, result)
        for t, score in zip(t_star, brier_scores(inputs, t_star)):
            brier_rows.append({"method": method, "t_star": float(t), "brier": float(score)})
        ibs_rows.append({"method": method, "ibs": integrated_brier(inputs, config.tmax)})

    out = _output_dir(config)
    BrierTable(brier_rows).to_csv(out / "brier.csv")
    IbsTable(ibs_rows).to_csv(out / "ibs.csv")
    return exit_code


COMMANDS = {
    constants.COMMAND_FIT: cmd_fit,
    constants.COMMAND_SIMULATE: cmd_simulate,
    constants.COMMAND_PREDICT: cmd_predict,
    constants.COMMAND_EVALUATE: cmd_evaluate,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.config.dictConfig(LOGGING)

    try:
        file_values = load_config_file(args.config) if args.config else {}
        config = RunConfig.from_settings(constants.RUN_SETTINGS.resolve(vars(args), file_values))
    except (ValidationError, OSError, yaml.YAMLError) as e:
        parser.print_usage()
        logger.error(str(e))
        return EXIT_USAGE

    try:
        return COMMANDS[config.command](config)
    except (IngestionError, ValidationError) as e:
        logger.error(str(e))
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
