import numpy as np
import pytest

from frontal_lab.catalog import get_entry
from frontal_lab.config import Config


@pytest.fixture(scope="session")
def config():
    return Config()


@pytest.fixture(scope="session")
def plane():
    return get_entry("plane").build()


@pytest.fixture(scope="session")
def paraboloid():
    return get_entry("paraboloid").build()


@pytest.fixture(scope="session")
def ex58():
    return get_entry("ex-5.8").build()


@pytest.fixture(scope="session")
def ex59():
    return get_entry("ex-5.9").build()


@pytest.fixture(scope="session")
def ex510():
    return get_entry("ex-5.10").build()


def regular_points(f, n, seed=0, margin=0.05, min_lam=1e-2):
    """Random interior points away from the singular set."""
    from frontal_lab.frame import frame_data
    rng = np.random.default_rng(seed)
    a1, b1, a2, b2 = f.domain
    out1, out2 = [], []
    while len(out1) < n:
        u1 = rng.uniform(a1 + margin * (b1 - a1), b1 - margin * (b1 - a1),
                         4 * n)
        u2 = rng.uniform(a2 + margin * (b2 - a2), b2 - margin * (b2 - a2),
                         4 * n)
        lam = frame_data(f, u1, u2).lam_det
        keep = np.abs(lam) > min_lam
        out1.extend(u1[keep][: n - len(out1)])
        out2.extend(u2[keep][: n - len(out2)])
    return np.asarray(out1), np.asarray(out2)


def random_unimodular(rng, scale=1.0):
    """Random 3x3 with determinant exactly +1 (well away from singular)."""
    while True:
        A = rng.uniform(-scale, scale, size=(3, 3))
        det = np.linalg.det(A)
        if abs(det) > 0.2:
            break
    A = A * np.sign(det)
    return A / abs(det) ** (1.0 / 3.0)
