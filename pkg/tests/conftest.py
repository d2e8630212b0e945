import numpy as np
import pytest

from pdflow.field import GridField


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_field(rng, max_side=8, torus=None, integer=False, masked=False):
    ny, nx = (int(s) for s in rng.integers(1, max_side + 1, 2))
    if torus is None:
        torus = bool(rng.integers(2))
    if integer:
        values = rng.integers(0, 5, (ny, nx)).astype(float)
    else:
        values = rng.normal(size=(ny, nx))
    mask = None
    if masked and not torus:
        mask = rng.random((ny, nx)) < 0.75
        if not mask.any():
            mask[0, 0] = True
        values[~mask] = np.nan
    return GridField(values, "torus" if torus else "bounded", mask)
