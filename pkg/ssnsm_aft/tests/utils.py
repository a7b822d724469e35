import os

import numpy as np
import pytest

from ssnsm_aft.models import SurvivalDataset

SLOW = os.environ.get("SSNSM_AFT_SLOW") == "1"

slow = pytest.mark.slow


def make_dataset(n=120, seed=0, slant=0.0, tau=None, beta=(2.0, 1.0, -1.0), scale=0.5) -> SurvivalDataset:
    """
    Small AFT dataset with mean-zero skew-normal errors; tau sets log C ~ U(0, tau), None leaves everything observed.
    """
    rng = np.random.default_rng(seed)
    covariates = np.column_stack([rng.standard_normal(n), rng.binomial(1, 0.5, n)])
    delta = slant / np.sqrt(1.0 + slant**2)
    errors = scale * (delta * np.abs(rng.standard_normal(n)) + np.sqrt(1.0 - delta**2) * rng.standard_normal(n))
    errors -= scale * delta * np.sqrt(2.0 / np.pi)
    log_event = beta[0] + covariates @ np.asarray(beta[1:]) + errors

    if tau is None:
        return SurvivalDataset.from_log_times(log_event, np.ones(n, dtype=int), covariates, ("x1", "x2"))

    log_censor = rng.uniform(0.0, tau, n)
    deltas = (log_event <= log_censor).astype(int)
    deltas[np.argmax(errors)] = 1
    log_times = np.where(deltas == 1, log_event, np.minimum(log_event, log_censor))
    return SurvivalDataset.from_log_times(log_times, deltas, covariates, ("x1", "x2"))
