import math
import unittest

import numpy as np
from numpy.testing import assert_allclose
from scipy import integrate, special, stats

from ssnsm_aft.distributions import (
    SkewNormalParams,
    owen_t,
    skewnormal_logpdf,
    skewnormal_logsf,
    skewnormal_sf,
    sn_logpdf,
    sn_mean_shift,
    sn_survival,
)
from ssnsm_aft.exceptions import DomainError, ValidationError

H_GRID = (-3.0, -0.7, 0.0, 0.4, 1.0, 2.5, 6.0)
A_GRID = (0.0, 0.3, 1.0, 2.0, 15.0)


def _integrate(func, lower, upper) -> float:
    # Split at the origin, where a large slant concentrates the density
    if lower < 0.0 < upper:
        return _integrate(func, lower, 0.0) + _integrate(func, 0.0, upper)
    value, _ = integrate.quad(func, lower, upper, epsabs=1e-12, epsrel=1e-10, limit=200)
    return value


def _log_tail(e: float, slant: float) -> float:
    """
    log of the standard skew-normal tail mass beyond e, integrating the density relative to its value at e.
    """
    head = float(skewnormal_logpdf(e, 1.0, slant))
    rate = -(float(skewnormal_logpdf(e + 1e-7, 1.0, slant)) - head) / 1e-7
    value, _ = integrate.quad(
        lambda v: math.exp(float(skewnormal_logpdf(e + v / rate, 1.0, slant)) - head),
        0.0,
        200.0,
        epsabs=0.0,
        epsrel=1e-12,
        limit=400,
    )
    return head - math.log(rate) + math.log(value)


class OwenTTestCase(unittest.TestCase):
    def test_zero_h(self):
        for a in A_GRID:
            with self.subTest(a=a):
                self.assertAlmostEqual(owen_t(0.0, a), math.atan(a) / (2.0 * math.pi), delta=1e-10)

    def test_unit_a(self):
        for h in H_GRID:
            with self.subTest(h=h):
                cdf = special.ndtr(h)
                self.assertAlmostEqual(owen_t(h, 1.0), 0.5 * cdf * (1.0 - cdf), delta=1e-10)

    def test_symmetries(self):
        for h in H_GRID:
            for a in A_GRID:
                with self.subTest(h=h, a=a):
                    self.assertAlmostEqual(owen_t(h, -a), -owen_t(h, a), delta=1e-12)
                    self.assertAlmostEqual(owen_t(-h, a), owen_t(h, a), delta=1e-12)

    def test_matches_scipy(self):
        for h in H_GRID:
            for a in A_GRID:
                with self.subTest(h=h, a=a):
                    self.assertAlmostEqual(owen_t(h, a), float(special.owens_t(h, a)), delta=1e-10)

    def test_rejects_non_finite(self):
        with self.assertRaises(DomainError):
            owen_t(float("nan"), 1.0)
        with self.assertRaises(DomainError):
            owen_t(1.0, float("inf"))


class SkewNormalTestCase(unittest.TestCase):
    scales = (0.5, 1.0, 3.0)
    slants = (-10.0, -1.0, 0.0, 1.0, 10.0)

    def test_density_integrates_to_one(self):
        for scale in self.scales:
            for slant in self.slants:
                with self.subTest(scale=scale, slant=slant):
                    total = _integrate(lambda e: math.exp(skewnormal_logpdf(e, scale, slant)), -np.inf, np.inf)
                    self.assertAlmostEqual(total, 1.0, delta=1e-8)

    def test_survival_matches_quadrature(self):
        for scale in self.scales:
            for slant in self.slants:
                for e in (-1.0, 0.0, 1.5):
                    with self.subTest(scale=scale, slant=slant, e=e):
                        tail = _integrate(lambda u: math.exp(skewnormal_logpdf(u, scale, slant)), e, np.inf)
                        self.assertAlmostEqual(float(skewnormal_sf(e, scale, slant)), tail, delta=1e-8)

    def test_deep_tail(self):
        cases = ((-50.0, 0.4), (-50.0, 0.6), (-15.0, 0.6), (-10.0, 1.0), (-1.0, 6.0), (0.0, 9.0), (10.0, 6.0))
        for slant, e in cases:
            with self.subTest(slant=slant, e=e):
                self.assertAlmostEqual(float(skewnormal_logsf(e, 1.0, slant)), _log_tail(e, slant), delta=1e-7)

        # S(0.6) of SN(0, 1, -50) is about 2.2e-201
        self.assertAlmostEqual(float(skewnormal_logsf(0.6, 1.0, -50.0)) / math.log(10.0), -200.66, delta=0.05)
        self.assertGreater(float(skewnormal_sf(0.6, 1.0, -50.0)), 0.0)

    def test_survival_is_monotone(self):
        rng = np.random.default_rng(17)
        scale = rng.uniform(0.2, 3.0, 1000)
        slant = rng.uniform(-60.0, 60.0, 1000)
        first = rng.normal(0.0, 4.0, 1000)
        second = first + rng.exponential(0.05, 1000)

        log_first = skewnormal_logsf(first, scale, slant)
        log_second = skewnormal_logsf(second, scale, slant)
        self.assertTrue(np.all(np.isfinite(log_first)))
        self.assertTrue(np.all(log_first <= 0.0))
        self.assertTrue(np.all(log_second <= log_first + 1e-8))

    def test_log_survival_shapes(self):
        values = skewnormal_logsf(np.array([[0.0], [1.0]]), np.array([0.5, 1.0, 2.0]), -3.0)
        self.assertEqual(values.shape, (2, 3))
        assert_allclose(np.exp(values), skewnormal_sf(np.array([[0.0], [1.0]]), np.array([0.5, 1.0, 2.0]), -3.0))
        self.assertEqual(np.ndim(skewnormal_logsf(0.3, 1.0, 2.0)), 0)

    def test_matches_scipy_skewnorm(self):
        e = np.linspace(-4.0, 4.0, 41)
        assert_allclose(skewnormal_logpdf(e, 1.3, -2.0), stats.skewnorm.logpdf(e, -2.0, scale=1.3), atol=1e-10)
        assert_allclose(skewnormal_sf(e, 1.3, -2.0), stats.skewnorm.sf(e, -2.0, scale=1.3), atol=1e-9)

    def test_zero_slant_is_normal(self):
        e = np.linspace(-3.0, 3.0, 13)
        assert_allclose(skewnormal_logpdf(e, 2.0, 0.0), stats.norm.logpdf(e, scale=2.0), atol=1e-12)
        assert_allclose(skewnormal_sf(e, 2.0, 0.0), stats.norm.sf(e, scale=2.0), atol=1e-12)

    def test_params_wrappers(self):
        params = SkewNormalParams(location=0.5, scale=2.0, slant=3.0)
        self.assertIsInstance(sn_logpdf(0.1, params), float)
        self.assertAlmostEqual(sn_logpdf(0.1, params), float(skewnormal_logpdf(0.1, 2.0, 3.0, 0.5)))
        self.assertAlmostEqual(sn_survival(0.5, params), float(skewnormal_sf(0.0, 2.0, 3.0)))
        self.assertEqual(sn_survival(np.zeros(3), params).shape, (3,))

    def test_params_validation(self):
        with self.assertRaises(ValidationError):
            SkewNormalParams(scale=0.0)
        with self.assertRaises(ValidationError):
            SkewNormalParams(slant=float("nan"))


class MeanShiftTestCase(unittest.TestCase):
    def test_zero_slant(self):
        self.assertEqual(sn_mean_shift(0.0), 0.0)

    def test_matches_numerical_mean(self):
        for slant in (-10.0, -1.0, 0.5, 4.0):
            with self.subTest(slant=slant):
                mean = _integrate(lambda e: e * math.exp(skewnormal_logpdf(e, 1.0, slant)), -np.inf, np.inf)
                self.assertAlmostEqual(sn_mean_shift(slant), mean, delta=1e-8)

    def test_limits_and_vectors(self):
        self.assertAlmostEqual(sn_mean_shift(1e8), math.sqrt(2.0 / math.pi), delta=1e-12)
        assert_allclose(sn_mean_shift(np.array([-2.0, 2.0])), [-sn_mean_shift(2.0), sn_mean_shift(2.0)])
