import os
import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_orthogonal(rng, d):
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def small_instance(rng, n=40, p=6, d=3, signal=0.4):
    Z = rng.standard_normal((n, p))
    X = signal * Z[:, :2] @ rng.standard_normal((2, d)) + rng.standard_normal((n, d))
    return X, Z


@pytest.fixture(autouse=True)
def _quiet_linalg():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", category=RuntimeWarning)
        yield
