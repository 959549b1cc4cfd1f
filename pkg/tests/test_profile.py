import math

import numpy as np
import pytest

from cmctorus.elliptic import height_h, period_tau
from cmctorus.exceptions import DomainError
from cmctorus.profile import (WeightedNormSpec, conservation_residual, default_grid_size, kernel_w0, kernel_w1,
                              period_from_ode, solve_profile, to_cylindrical, unduloid_area, unduloid_volume,
                              weighted_norm, window_half_width)
from tests.conftest import profile


def test_table_layout():
    tbl = profile(0.25, 256)
    half = tbl.n_t // 2
    assert tbl.t[0] == pytest.approx(-tbl.tau)
    assert tbl.t[half] == 0.0
    assert tbl.x[half] == 0.75
    assert tbl.x[0] == pytest.approx(0.25, abs=1e-8)
    assert tbl.z[0] == pytest.approx(-tbl.h, abs=1e-8)
    assert tbl.dt == pytest.approx(2 * tbl.tau / 256)


def test_conformality_and_conservation():
    for a in (0.05, 0.2, 0.4):
        tbl = profile(a, 256)
        assert np.max(np.abs(tbl.x ** 2 - tbl.xp ** 2 - tbl.zp ** 2)) <= 1e-9
        assert conservation_residual(tbl) <= 1e-8
        assert np.min(tbl.x) >= a - 1e-8
        assert np.max(tbl.x) <= 1 - a + 1e-10


def test_period_from_ode_matches_closed_form():
    for a in (0.05, 0.1, 0.2, 0.3, 0.4):
        tau, h = period_from_ode(a)
        assert tau == pytest.approx(period_tau(a), rel=1e-8)
        assert h == pytest.approx(height_h(a), rel=1e-8)


def test_cylinder_is_constant():
    tbl = profile(0.5, 64)
    assert np.all(tbl.x == 0.5)
    assert np.all(tbl.xp == 0.0)
    with pytest.raises(DomainError):
        period_from_ode(0.5)


def test_w1_minimum():
    for a in (0.1, 0.3):
        tbl = profile(a, 256)
        gamma = a * (1 - a)
        w1 = kernel_w1(tbl)
        assert np.min(w1) == pytest.approx(2 * math.sqrt(gamma), abs=1e-8)
        assert np.max(w1) <= 1.0 + 1e-12
        np.testing.assert_allclose(w1, tbl.zp / tbl.x)


def test_w0_normalisation_and_growth():
    for a in (0.05, 0.2):
        tbl = profile(a, 512)
        w0 = kernel_w0(tbl)
        assert w0[tbl.n_t // 2] == 1.0
        assert np.all(np.abs(w0) <= 2.0 * (1.0 + np.abs(tbl.t)))
        # even in t
        np.testing.assert_allclose(w0[1:], w0[1:][::-1], atol=1e-12)


def test_sech_envelope():
    for a in (0.01, 0.05, 0.1):
        tbl = profile(a, 512)
        envelope = (1 - a) * np.sqrt(1.0 / np.cosh(tbl.t))
        assert np.all(tbl.x <= envelope + 1e-9)


def test_closed_form_area_and_volume():
    assert unduloid_area(0.5) == pytest.approx(math.pi ** 2, rel=1e-14)
    assert unduloid_volume(0.5) == pytest.approx(math.pi ** 2 / 4, rel=1e-14)
    for a in (0.1, 0.3):
        tbl = profile(a, 512)
        area = 2 * math.pi * np.sum(tbl.x ** 2) * tbl.dt
        volume = math.pi * np.sum(tbl.x ** 2 * tbl.zp) * tbl.dt
        assert area == pytest.approx(unduloid_area(a), rel=1e-9)
        assert volume == pytest.approx(unduloid_volume(a), rel=1e-9)


def test_shifted():
    tbl = profile(0.2, 128)
    moved = tbl.shifted(2)
    np.testing.assert_allclose(moved.z - tbl.z, 4 * tbl.h)
    np.testing.assert_allclose(moved.t - tbl.t, 4 * tbl.tau)
    assert moved.x is tbl.x


def test_to_cylindrical():
    tbl = profile(0.2, 256)
    z, rho, slope = to_cylindrical(tbl)
    assert np.all(np.diff(z) > 0)
    np.testing.assert_array_equal(rho, tbl.x)
    np.testing.assert_allclose(slope[1:-1], np.gradient(rho, z)[1:-1], atol=1e-2)


def test_grid_size_checks():
    with pytest.raises(DomainError):
        solve_profile(0.2, 63)
    with pytest.raises(DomainError):
        solve_profile(0.2, 32)
    assert default_grid_size(0.1) == 1024
    assert default_grid_size(0.001) >= 256 * period_tau(0.001)


def test_weighted_norm_of_constant():
    tbl = profile(0.1, 256)
    ones = np.ones((tbl.n_t, 8))
    assert weighted_norm(ones, tbl) == pytest.approx(0.1 ** -1.5, rel=1e-6)
    assert weighted_norm(np.ones(tbl.n_t), tbl, WeightedNormSpec(mu=1.2)) == pytest.approx(0.1 ** -1.2, rel=1e-6)


def test_weighted_norm_window():
    tbl = profile(0.1, 256)
    bump = np.zeros(tbl.n_t)
    bump[tbl.n_t // 2] = 1.0
    # a unit spike at the bulge is seen from the whole window around it
    m = window_half_width(tbl, WeightedNormSpec())
    expected = np.max(tbl.x[tbl.n_t // 2 - m: tbl.n_t // 2 + m + 1] ** -1.5)
    assert weighted_norm(bump, tbl) == pytest.approx(expected, rel=1e-12)


def test_weighted_norm_rejects_bad_input():
    tbl = profile(0.5, 64)
    with pytest.raises(DomainError):
        weighted_norm(np.ones(64), tbl, WeightedNormSpec(delta=4.0))
    with pytest.raises(DomainError):
        weighted_norm(np.ones(64), tbl, k=3)
    with pytest.raises(DomainError):
        WeightedNormSpec(mu=2.5)
