import tempfile
import unittest
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from ssnsm_aft.cli import (
    EXIT_FIT_FAILED,
    EXIT_OK,
    EXIT_USAGE,
    ColumnMapping,
    RunConfig,
    load_config_file,
    main,
    read_survival_csv,
)
from ssnsm_aft.exceptions import IngestionError, ValidationError
from ssnsm_aft.serializers import load_json, load_schema
from ssnsm_aft.simulation import generate_replicate, get_preset, lung_like

from .utils import SLOW, make_dataset, slow

jsonschema = pytest.importorskip("jsonschema")

LUNG_COLUMNS = ("--covariates", "age,sex,ecog")


class CliTestCase(unittest.TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def write(self, name: str, text: str) -> Path:
        path = self.tmp / name
        path.write_text(text, encoding="utf-8")
        return path

    def write_frame(self, name: str, frame: pd.DataFrame) -> Path:
        path = self.tmp / name
        frame.to_csv(path, index=False)
        return path


class BundledDataTestCase(CliTestCase):
    root = Path(__file__).resolve().parents[2]

    @unittest.skipUnless((root / "configuration" / "lung.yaml").exists(), "needs a source checkout")
    def test_lung_config_points_at_bundled_csv(self):
        values = load_config_file(self.root / "configuration" / "lung.yaml")
        path = self.root / values["input"]
        self.assertTrue(path.exists())

        data, dropped = read_survival_csv(path, ColumnMapping(covariates=("age", "sex", "ecog")))
        self.assertEqual(dropped, 3)
        self.assertEqual(data.n, 225)
        self.assertEqual(data.covariate_names, ("age", "sex", "ecog"))
        self.assertTrue(0.1 < data.censoring_fraction < 0.5)

    def test_csv_round_trip(self):
        data = generate_replicate(get_preset("sim1/n200/tau4/skewt"), 0)
        frame = pd.DataFrame({"time": data.times, "status": data.deltas})
        for name, column in zip(data.covariate_names, data.covariates.T):
            frame[name] = column
        restored, dropped = read_survival_csv(self.write_frame("replicate.csv", frame), ColumnMapping())

        self.assertEqual(dropped, 0)
        self.assertEqual(restored.covariate_names, data.covariate_names)
        assert_array_equal(restored.deltas, data.deltas)
        assert_allclose(restored.times, data.times, rtol=1e-14)
        assert_allclose(restored.covariates, data.covariates, rtol=1e-14, atol=1e-15)


class IngestionTestCase(CliTestCase):
    header = "time,status,age\n"

    def test_drops_incomplete_rows(self):
        path = self.write("in.csv", self.header + "10,1,50\n20,0,\n30,1,61\n40,1,70\n55,0,44\n60,1,58\n")
        data, dropped = read_survival_csv(path, ColumnMapping())
        self.assertEqual(dropped, 1)
        self.assertEqual(data.n, 5)
        self.assertEqual(data.covariate_names, ("age",))

    def test_bad_time_reports_line(self):
        path = self.write("in.csv", self.header + "10,1,50\n-3,1,60\n30,1,61\n40,1,70\n")
        with self.assertRaises(IngestionError) as cm:
            read_survival_csv(path, ColumnMapping())
        self.assertEqual(cm.exception.line, 3)
        self.assertTrue(str(cm.exception).startswith("line 3: "))

    def test_non_numeric_cell(self):
        path = self.write("in.csv", self.header + "10,1,50\n20,1,60\n30,1,old\n40,1,70\n")
        with self.assertRaises(IngestionError) as cm:
            read_survival_csv(path, ColumnMapping())
        self.assertEqual(cm.exception.line, 4)

    def test_bad_status(self):
        path = self.write("in.csv", self.header + "10,1,50\n20,2,60\n30,1,61\n40,1,70\n")
        with self.assertRaises(IngestionError) as cm:
            read_survival_csv(path, ColumnMapping())
        self.assertEqual(cm.exception.line, 3)

    def test_no_events_and_missing_columns(self):
        path = self.write("in.csv", self.header + "10,0,50\n20,0,60\n30,0,61\n40,0,70\n")
        with self.assertRaises(IngestionError):
            read_survival_csv(path, ColumnMapping())
        with self.assertRaises(IngestionError):
            read_survival_csv(path, ColumnMapping(covariates=("weight",)))
        with self.assertRaises(IngestionError):
            read_survival_csv(self.tmp / "absent.csv", ColumnMapping())

    def test_lung_like_missing_values(self):
        path = self.write_frame("lung.csv", lung_like(missing=7))
        data, dropped = read_survival_csv(path, ColumnMapping(covariates=("age", "sex", "ecog")))
        self.assertEqual(dropped, 7)
        self.assertEqual(data.n, 221)


class ConfigTestCase(CliTestCase):
    def test_run_config_rules(self):
        with self.assertRaises(ValidationError):
            RunConfig(command="fit")
        with self.assertRaises(ValidationError):
            RunConfig(command="predict", input="x.csv")
        with self.assertRaises(ValidationError):
            RunConfig(command="simulate")
        with self.assertRaises(ValidationError):
            RunConfig(command="fit", input="x.csv", tmax=0.0)

    def test_yaml_file(self):
        path = self.write("run.yaml", "time-col: days\nseed: 3\nmethods: [normal, gee]\n")
        self.assertEqual(load_config_file(path), {"time_col": "days", "seed": 3, "methods": ["normal", "gee"]})
        with self.assertRaises(ValidationError):
            load_config_file(self.write("bad.yaml", "- just\n- a list\n"))


class MainTestCase(CliTestCase):
    def uncensored_csv(self) -> Path:
        data = make_dataset(n=60, seed=5)
        frame = pd.DataFrame({"time": data.times, "status": data.deltas, "x1": data.covariates[:, 0]})
        frame["x2"] = data.covariates[:, 1]
        return self.write_frame("uncensored.csv", frame)

    def test_usage_errors(self):
        self.assertEqual(main(["--input", "x.csv"]), EXIT_USAGE)
        self.assertEqual(main(["--command", "fit", "--input", "x.csv", "--methods", "weibull"]), EXIT_USAGE)
        self.assertEqual(main(["--command", "fit", "--input", str(self.tmp / "absent.csv")]), EXIT_USAGE)
        missing_config = str(self.tmp / "no.yaml")
        self.assertEqual(main(["--command", "fit", "--input", "x.csv", "--config", missing_config]), EXIT_USAGE)

    def test_fit_exit_ok(self):
        out = self.tmp / "out"
        argv = ["--command", "fit", "--input", str(self.uncensored_csv()), "--methods", "normal"]
        code = main(argv + ["--bootstrap", "0", "--workers", "1", "--tmax", "30", "--out", str(out)])
        self.assertEqual(code, EXIT_OK)
        report = load_json(out / "report.json")
        jsonschema.validate(report, load_schema())
        self.assertIsNone(report["results"][0]["se"])
        self.assertTrue((out / "model_normal.json").exists())

    def test_config_file_precedence(self):
        out = self.tmp / "out"
        config = self.write("run.yaml", f"methods: gee\nbootstrap: 0\nworkers: 1\nout: {self.tmp / 'ignored'}\n")
        argv = ["--command", "fit", "--input", str(self.uncensored_csv()), "--config", str(config)]
        main(argv + ["--methods", "normal", "--out", str(out), "--tmax", "30"])
        report = load_json(out / "report.json")
        self.assertEqual([entry["estimator"]["method"] for entry in report["results"]], ["normal"])
        self.assertEqual(report["bootstrap_replicates"], 0)


class PipelineTestCase(CliTestCase):
    methods = "normal,gehan,gee"

    def run_fit(self, out: Path, seed: str = "7", methods: str | None = None) -> int:
        path = self.tmp / "lung.csv"
        if not path.exists():
            self.write_frame("lung.csv", lung_like(missing=3))
        argv = ["--command", "fit", "--input", str(path), *LUNG_COLUMNS, "--methods", methods or self.methods]
        return main(argv + ["--bootstrap", "3", "--seed", seed, "--workers", "1", "--out", str(out)])

    def test_fit_outputs(self):
        out = self.tmp / "fit"
        self.assertIn(self.run_fit(out), (EXIT_OK, EXIT_FIT_FAILED))

        report = load_json(out / "report.json")
        jsonschema.validate(report, load_schema())
        self.assertEqual(report["n"], 225)
        self.assertEqual(report["dropped_rows"], 3)
        self.assertEqual([entry["estimator"]["method"] for entry in report["results"]], ["normal", "gehan", "gee"])
        for entry in report["results"]:
            self.assertEqual(len(entry["se"]), 4)
            self.assertGreater(entry["ibs"], 0.0)

        coefficients = pd.read_csv(out / "coefficients.csv")
        self.assertEqual(len(coefficients), 12)
        self.assertEqual(set(coefficients["coefficient"]), {"(Intercept)", "age", "sex", "ecog"})
        curves = pd.read_csv(out / "curves.csv")
        self.assertEqual(set(curves["profile"]), {"mean"})
        self.assertTrue(curves.groupby("method")["survival"].apply(lambda s: np.all(np.diff(s) <= 1e-12)).all())

    def test_deterministic(self):
        self.run_fit(self.tmp / "a", methods="normal")
        self.run_fit(self.tmp / "b", methods="normal")
        first = (self.tmp / "a" / "coefficients.csv").read_text()
        self.assertEqual(first, (self.tmp / "b" / "coefficients.csv").read_text())

    def test_predict_and_evaluate(self):
        self.run_fit(self.tmp / "fit", methods="normal")
        model = self.tmp / "fit" / "model_normal.json"
        lung = self.tmp / "lung.csv"

        argv = ["--command", "predict", "--input", str(lung), "--model", str(model), *LUNG_COLUMNS]
        self.assertEqual(main(argv + ["--t-star", "180,365", "--out", str(self.tmp / "pred")]), EXIT_OK)
        predictions = pd.read_csv(self.tmp / "pred" / "predictions.csv")
        self.assertEqual(len(predictions), 2 * 225)
        self.assertTrue(predictions["survival"].between(0.0, 1.0).all())

        argv = ["--command", "evaluate", "--input", str(lung), *LUNG_COLUMNS, "--methods", "normal,gehan"]
        main(argv + ["--workers", "1", "--out", str(self.tmp / "eval")])
        brier = pd.read_csv(self.tmp / "eval" / "brier.csv")
        self.assertEqual(len(brier), 6)
        self.assertTrue(brier["brier"].between(0.0, 1.0).all())
        self.assertEqual(len(pd.read_csv(self.tmp / "eval" / "ibs.csv")), 2)

    def test_simulate(self):
        out = self.tmp / "sim"
        argv = ["--command", "simulate", "--preset", "sim1/n200/tau4/normal", "--reps", "2", "--methods", "normal"]
        self.assertIn(main(argv + ["--workers", "1", "--out", str(out)]), (EXIT_OK, EXIT_FIT_FAILED))
        table = pd.read_csv(out / "sim1_n200_tau4_normal.csv")
        self.assertEqual(list(table["coefficient"]), ["beta0", "beta1", "beta2"])


@slow
@unittest.skipUnless(SLOW, "set SSNSM_AFT_SLOW=1 to run Monte Carlo checks")
class FullPipelineTestCase(PipelineTestCase):
    methods = "all"

    def test_fit_outputs(self):
        out = self.tmp / "fit"
        self.run_fit(out)
        report = load_json(out / "report.json")
        jsonschema.validate(report, load_schema())
        self.assertEqual(len(report["results"]), 5)
        for entry in report["results"]:
            with self.subTest(method=entry["estimator"]["method"]):
                self.assertTrue(0.0 < entry["ibs"] < 0.25)
