import functools

import numpy as np
import pytest

from cmctorus.cache import CACHE_ENV
from cmctorus.geometry import TorusGrid, build_jet
from cmctorus.profile import solve_profile


@functools.lru_cache(maxsize=None)
def profile(a, n_t):
    return solve_profile(a, n_t)


@functools.lru_cache(maxsize=None)
def torus(a, n, n_t, n_theta):
    grid = TorusGrid.for_n(profile(a, n_t), n, n_theta)
    return grid, build_jet(grid)


@functools.lru_cache(maxsize=None)
def straight(a, n_t, n_theta):
    grid = TorusGrid.straight(profile(a, n_t), n_theta)
    return grid, build_jet(grid)


@pytest.fixture(autouse=True)
def isolated_cache(tmp_path, monkeypatch):
    monkeypatch.setenv(CACHE_ENV, str(tmp_path / "cache"))
    return tmp_path / "cache"


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def torus_02():
    """a = 0.2 closed up with 64 periods on a 256 x 16 grid."""
    return torus(0.2, 64, 256, 16)


def smooth_symmetric(tbl, n_theta, rng, t_modes=5):
    """Random field even in t and mirror-symmetric in theta, smooth in both."""
    theta = -np.pi + np.arange(n_theta) * (2.0 * np.pi / n_theta)
    f = np.zeros((tbl.n_t, n_theta))
    for k in range(t_modes):
        for j in range(4):
            ang = np.sin(j * theta) if j % 2 else np.cos(j * theta)
            f += rng.normal() * np.cos(k * np.pi * tbl.t / tbl.tau)[:, None] * ang[None, :] / (1 + k + j) ** 2
    return f
