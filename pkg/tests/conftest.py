import numpy as np
import pytest

from nlcbox.grid import Field, build_grid
from nlcbox.tensor import BulkParams


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def bulk():
    return BulkParams.mbba()


@pytest.fixture
def grid7():
    return build_grid(7, 7, 1.0)


@pytest.fixture
def grid9():
    return build_grid(9, 9, 1.0)


def random_field(geom, rng, scale=0.5, smooth=True):
    """Random tensor field; smoothing keeps finite differences well scaled."""
    q = rng.standard_normal(geom.shape + (5,))
    if smooth:
        for _ in range(2):
            for axis in range(3):
                lo = [slice(None)] * 3
                hi = [slice(None)] * 3
                lo[axis] = slice(None, -1)
                hi[axis] = slice(1, None)
                mid = 0.5 * (q[tuple(lo)] + q[tuple(hi)])
                q[tuple(lo)] = 0.75 * q[tuple(lo)] + 0.25 * mid
                q[tuple(hi)] = 0.75 * q[tuple(hi)] + 0.25 * mid
    q *= scale / max(np.abs(q).max(), 1e-30)
    return Field(geom, q)


def random_tensors(rng, n, scale=1.0):
    return rng.standard_normal((n, 5)) * scale
