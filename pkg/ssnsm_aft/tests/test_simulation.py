import math
import os
import unittest

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

from ssnsm_aft.exceptions import ValidationError
from ssnsm_aft.simulation import (
    PRESETS,
    ErrorFamily,
    ScenarioSpec,
    generate_replicate,
    generate_test_set,
    get_preset,
    lung_like,
    replicate_rng,
    run_prediction_study,
    run_scenario,
    sample_errors,
    standardization_constants,
    summarize_estimates,
)

from .utils import SLOW, slow

FAMILIES = {
    "normal": ErrorFamily.normal(),
    "t3": ErrorFamily.student_t(3),
    "gumbel": ErrorFamily.gumbel(0.0, 5.0),
    "skewt": ErrorFamily.skew_t(0.0, 1.0, -15.0, 3),
}


class ErrorFamilyTestCase(unittest.TestCase):
    def test_gumbel_constants(self):
        mean, sd = standardization_constants(ErrorFamily.gumbel(0.0, 5.0))
        self.assertAlmostEqual(mean, 5.0 * 0.5772156649015329)
        self.assertAlmostEqual(sd, 5.0 * math.pi / math.sqrt(6.0))

    def test_t_constants(self):
        self.assertEqual(standardization_constants(ErrorFamily.student_t(3)), (0.0, math.sqrt(3.0)))

    def test_standardized_mean(self):
        rng = np.random.default_rng(0)
        for name, family in FAMILIES.items():
            with self.subTest(family=name):
                self.assertAlmostEqual(sample_errors(family, rng, 200_000).mean(), 0.0, delta=0.02)

    def test_standardized_sd(self):
        rng = np.random.default_rng(1)
        for name in ("normal", "gumbel"):
            with self.subTest(family=name):
                self.assertAlmostEqual(sample_errors(FAMILIES[name], rng, 200_000).std(), 1.0, delta=0.02)

    def test_raw_skew_t_mean(self):
        family = ErrorFamily(kind="skew_t", df=5, slant=-15.0, standardized=False)
        mean, _ = standardization_constants(family)
        draws = sample_errors(family, np.random.default_rng(2), 400_000)
        self.assertAlmostEqual(draws.mean(), mean, delta=0.01)

    def test_validation(self):
        with self.assertRaises(ValidationError):
            ErrorFamily(kind="cauchy")
        with self.assertRaises(ValidationError):
            ErrorFamily.student_t(2)
        self.assertEqual(FAMILIES["skewt"].label, "skew-t(0,1,-15,3)")


class ReplicateTestCase(unittest.TestCase):
    spec = ScenarioSpec(n=200, error=ErrorFamily.normal(), tau=4.0, seed=99)

    def test_deterministic(self):
        first, second = generate_replicate(self.spec, 3), generate_replicate(self.spec, 3)
        assert_array_equal(first.times, second.times)
        assert_array_equal(first.deltas, second.deltas)
        self.assertFalse(np.array_equal(first.times, generate_replicate(self.spec, 4).times))

    def test_streams_are_independent(self):
        train = replicate_rng(1, 0, 0).standard_normal(5)
        test = replicate_rng(1, 0, 1).standard_normal(5)
        self.assertFalse(np.allclose(train, test))
        covariates, log_times = generate_test_set(self.spec, 0, m=50)
        self.assertEqual(covariates.shape, (50, 2))
        self.assertEqual(log_times.shape, (50,))

    def test_censoring_bands(self):
        bands = {4.0: (0.3, 0.5), 1.5: (0.6, 0.8)}
        for name, family in FAMILIES.items():
            for tau, (low, high) in bands.items():
                spec = ScenarioSpec(n=200, error=family, tau=tau, seed=7)
                fraction = np.mean([generate_replicate(spec, r).censoring_fraction for r in range(200)])
                with self.subTest(family=name, tau=tau):
                    self.assertGreaterEqual(fraction, low)
                    self.assertLessEqual(fraction, high)

    def test_scenario_validation(self):
        with self.assertRaises(ValidationError):
            ScenarioSpec(n=10, error=ErrorFamily.normal(), tau=4.0)
        with self.assertRaises(ValidationError):
            ScenarioSpec(n=100, error=ErrorFamily.normal(), tau=0.0)


class PresetTestCase(unittest.TestCase):
    def test_catalogue(self):
        self.assertEqual(len(PRESETS), 40)
        self.assertIn("sim1/n400/tau4/skewt", PRESETS)
        self.assertIn("sim2/tau1.5/gumbel", PRESETS)
        self.assertEqual(PRESETS["sim3/n400/tau1.5/slant-50"].error.slant, -50.0)
        self.assertEqual(PRESETS["sim2/tau4/normal"].n, 250)
        self.assertEqual(PRESETS["sim2/tau4/normal"].study, "prediction")

    def test_overrides(self):
        spec = get_preset("sim1/n200/tau4/t3", replications=5, seed=1)
        self.assertEqual((spec.replications, spec.seed), (5, 1))
        with self.assertRaises(ValidationError):
            get_preset("sim9/unknown")


class SummaryTestCase(unittest.TestCase):
    def test_mse_and_bias(self):
        estimates = {"m": np.array([[2.1, 1.1, -0.9], [2.1, 1.1, -0.9], [np.nan, np.nan, np.nan]])}
        frame = summarize_estimates(estimates, (2.0, 1.0, -1.0), {"m": 1})
        self.assertEqual(list(frame["coefficient"]), ["beta0", "beta1", "beta2"])
        assert_allclose(frame["mse"], 0.01)
        assert_allclose(frame["bias"], 0.1)
        self.assertEqual(list(frame["failures"]), [1, 1, 1])


class StudyTestCase(unittest.TestCase):
    spec = ScenarioSpec(n=60, error=ErrorFamily.normal(), tau=4.0, replications=3, seed=5)

    def test_run_scenario(self):
        result = run_scenario(self.spec, ["normal", "gee"])
        self.assertEqual(result.methods, ["normal", "gee"])
        self.assertEqual(result.estimates["normal"].shape, (3, 3))
        self.assertEqual(result.failures, {"normal": 0, "gee": 0})
        self.assertEqual(len(result.summary()), 6)

    def test_worker_count_does_not_change_results(self):
        inline = run_scenario(self.spec, ["normal"], workers=1)
        pooled = run_scenario(self.spec, ["normal"], workers=2)
        assert_array_equal(inline.estimates["normal"], pooled.estimates["normal"])

    def test_prediction_study(self):
        result = run_prediction_study(self.spec, "normal", test_m=100)
        self.assertEqual(result.spec.study, "prediction")
        self.assertEqual(result.rmsep["normal"].shape, (3,))
        self.assertTrue(np.all(result.rmsep["normal"] > 0))
        summary = result.summary()
        self.assertEqual(list(summary["method"]), ["normal"])
        self.assertLessEqual(summary["q1"][0], summary["median"][0])


class LungLikeTestCase(unittest.TestCase):
    def test_shape(self):
        frame = lung_like()
        self.assertEqual(list(frame.columns), ["time", "status", "age", "sex", "ecog"])
        self.assertEqual(len(frame), 228)
        self.assertTrue((frame["time"] > 0).all())
        self.assertTrue(0.1 < 1.0 - frame["status"].mean() < 0.5)

    def test_missing_cells(self):
        frame = lung_like(missing=5)
        self.assertEqual(int(frame.isna().sum().sum()), 5)
        self.assertTrue(lung_like(seed=3).equals(lung_like(seed=3)))


@slow
@unittest.skipUnless(SLOW, "set SSNSM_AFT_SLOW=1 to run Monte Carlo checks")
class SkewedScenarioTestCase(unittest.TestCase):
    workers = os.cpu_count() or 1

    def mse(self, preset: str, methods, replications: int = 100):
        result = run_scenario(get_preset(preset, replications=replications), methods, workers=self.workers)
        return result.summary().set_index(["method", "coefficient"])["mse"]

    def median_rmsep(self, preset: str, methods) -> dict:
        result = run_prediction_study(get_preset(preset, replications=100), methods, workers=self.workers)
        return {method: float(np.nanmedian(result.rmsep[method])) for method in methods}

    def test_ssnsm_beats_normal_under_skew_t(self):
        mse = self.mse("sim1/n400/tau4/skewt", ["normal", "ssnsm"])
        published = {"beta0": 0.0028, "beta1": 0.0013, "beta2": 0.0046}
        for coefficient, reference in published.items():
            with self.subTest(coefficient=coefficient):
                self.assertLess(mse[("ssnsm", coefficient)], mse[("normal", coefficient)])
                self.assertLess(mse[("ssnsm", coefficient)], 2.0 * reference)

    def test_normal_errors_cost_little(self):
        mse = self.mse("sim1/n400/tau4/normal", ["normal", "ssnsm"])
        for coefficient in ("beta0", "beta1", "beta2"):
            with self.subTest(coefficient=coefficient):
                self.assertLessEqual(mse[("ssnsm", coefficient)], 2.0 * mse[("normal", coefficient)])

    def test_stronger_skew_sharpens_the_slope(self):
        strong = self.mse("sim3/n400/tau4/slant-50", ["ssnsm"])
        mild = self.mse("sim3/n400/tau4/slant-1", ["ssnsm"])
        self.assertLess(strong[("ssnsm", "beta1")], mild[("ssnsm", "beta1")])

    def test_prediction_under_skew_t(self):
        medians = self.median_rmsep("sim2/tau4/skewt", ["normal", "ssnsm"])
        self.assertLessEqual(medians["ssnsm"], medians["normal"])

    def test_prediction_under_normal_errors(self):
        medians = self.median_rmsep("sim2/tau4/normal", ["normal", "ssnsm"])
        self.assertLessEqual(medians["ssnsm"], 1.05 * medians["normal"])
