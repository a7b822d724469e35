import os
import unittest
from unittest import mock

from ssnsm_aft.cli import build_parser
from ssnsm_aft.constants import ALL_METHODS, RUN_SETTINGS
from ssnsm_aft.exceptions import ValidationError
from ssnsm_aft.run_settings import Param, csv_list
from ssnsm_aft.utils import parse_profiles


class CsvListTestCase(unittest.TestCase):
    def test_split(self):
        self.assertEqual(csv_list(" a, b ,,c "), ["a", "b", "c"])
        self.assertEqual(csv_list(["x", " y "]), ["x", "y"])
        self.assertEqual(csv_list(None), [])


class ParamTestCase(unittest.TestCase):
    def test_clean(self):
        param = Param(key="seed", label="Seed", field=int)
        self.assertEqual(param.clean("12"), 12)
        self.assertIsNone(param.clean(None))
        with self.assertRaises(ValidationError):
            param.clean("twelve")
        self.assertEqual(param.flag, "--seed")

    def test_repr(self):
        param = Param(key="seed", label="Seed", field=int)
        self.assertTrue(repr(param).startswith("Param(key='seed', label='Seed'"))
        self.assertIn(("key", "seed"), list(param))

    def test_choices(self):
        param = RUN_SETTINGS.get("methods")
        self.assertEqual(param.clean("normal,ssnsm"), ["normal", "ssnsm"])
        self.assertEqual(param.clean("all"), list(ALL_METHODS))
        with self.assertRaises(ValidationError):
            param.clean("normal,weibull")


class ResolveTestCase(unittest.TestCase):
    def test_defaults(self):
        with mock.patch.dict(os.environ, {}, clear=True):
            values = RUN_SETTINGS.resolve({"command": "fit"})
        self.assertEqual(values["time_col"], "time")
        self.assertEqual(values["bootstrap"], 500)
        self.assertEqual(values["tmax"], 1826.25)
        self.assertEqual(values["methods"], list(ALL_METHODS))

    def test_precedence(self):
        with mock.patch.dict(os.environ, {"SSNSM_AFT_SEED": "5"}):
            self.assertEqual(RUN_SETTINGS.resolve({"command": "fit"})["seed"], 5)
            self.assertEqual(RUN_SETTINGS.resolve({"command": "fit"}, {"seed": 7})["seed"], 7)
            self.assertEqual(RUN_SETTINGS.resolve({"command": "fit", "seed": "9"}, {"seed": 7})["seed"], 9)

    def test_required_and_unknown(self):
        with self.assertRaises(ValidationError):
            RUN_SETTINGS.resolve({})
        with self.assertRaises(ValidationError):
            RUN_SETTINGS.resolve({"command": "fit"}, {"colour": "blue"})
        with self.assertRaises(ValidationError):
            RUN_SETTINGS.resolve({"command": "plot"})

    def test_parser_aliases(self):
        args = build_parser().parse_args(["--command", "simulate", "--replications", "3", "--t-star", "100,200"])
        values = RUN_SETTINGS.resolve(vars(args))
        self.assertEqual(values["reps"], 3)
        self.assertEqual(values["t_star"], [100.0, 200.0])


class ProfilesTestCase(unittest.TestCase):
    def test_parse(self):
        profiles = parse_profiles("male:sex=1;female:sex=2,age=70", ["age", "sex"], [60.0, 1.5])
        self.assertEqual(list(profiles), ["male", "female"])
        self.assertEqual(list(profiles["male"]), [60.0, 1.0])
        self.assertEqual(list(profiles["female"]), [70.0, 2.0])
        self.assertEqual(list(parse_profiles(None, ["age"], [60.0])), ["mean"])

    def test_errors(self):
        for text in ("male", "male:height=2", "male:sex=abc"):
            with self.subTest(text=text):
                with self.assertRaises(ValidationError):
                    parse_profiles(text, ["age", "sex"], [60.0, 1.5])
