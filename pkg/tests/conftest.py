import numpy as np
import pytest

from sskoverlap.rmt import DisorderSample


def synthetic(lambdas, projections=None):
    lam = np.asarray(lambdas, dtype=float)
    proj = np.ones_like(lam) if projections is None else np.asarray(projections, dtype=float)
    return DisorderSample(lam.size, lam, proj, 0, "synthetic")


@pytest.fixture
def make_sample():
    return synthetic
