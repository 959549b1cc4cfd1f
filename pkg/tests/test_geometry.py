import math

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from cmctorus.exceptions import DomainError, ImmersionError
from cmctorus.fields import d_t, d_theta
from cmctorus.geometry import (TorusGrid, assemble_jet, build_jet, gauss_curvature, jet_perturbed, mean_curvature,
                               normal_triple, rotate_jet, rotation, sample_cell_shift, second_form_norm2)
from tests.conftest import profile, straight, torus


def test_straight_unduloid_has_unit_mean_curvature():
    for a in (0.05, 0.1, 0.2, 0.3, 0.4, 0.5):
        _, jet = straight(a, 256, 16)
        mc = mean_curvature(jet).values
        assert np.max(np.abs(mc - 1.0)) <= 1e-8


def test_normal_points_inward():
    grid, jet = straight(0.2, 256, 16)
    radial = jet.X.copy()
    radial[..., 2] = 0.0
    assert np.all(np.einsum("...k,...k->...", jet.N, radial) < 0)


def test_bent_mean_curvature_defect_is_linear_in_eps():
    tbl = profile(0.1, 256)
    eps_values = np.array([1e-3, 1e-2, 1e-1])
    defects = []
    for eps in eps_values:
        jet = build_jet(TorusGrid(tbl=tbl, n_theta=16, eps=eps))
        defects.append(np.max(np.abs(mean_curvature(jet).values - 1.0)))
    slope = np.polyfit(np.log(eps_values), np.log(defects), 1)[0]
    assert slope == pytest.approx(1.0, abs=0.1)


def test_bent_mean_curvature_closed_form():
    tbl = profile(0.2, 256)
    eps = 0.05
    grid = TorusGrid(tbl=tbl, n_theta=32, eps=eps)
    mc = mean_curvature(build_jet(grid)).values
    x, xp, zp = tbl.x[:, None], tbl.xp[:, None], tbl.zp[:, None]
    s = np.sin(grid.theta)[None, :]
    P = 1 + eps * x * s
    S = np.sqrt(xp ** 2 + zp ** 2 * P ** 2) / x
    w = zp / x
    expected = (P * w / (2 * x * S) + P * (2 - w / x) / (2 * S ** 3)
                + eps * w * (1 - w ** 2) * s / (2 * S ** 3) + eps * w * s / (2 * S))
    np.testing.assert_allclose(mc, expected, atol=1e-8)


def test_torus_fields_are_symmetric():
    _, jet = torus(0.2, 16, 256, 16)
    mean_curvature(jet).check_symmetry(1e-10)
    gauss_curvature(jet).check_symmetry(1e-10)


def test_closing_condition():
    tbl = profile(0.2, 128)
    grid = TorusGrid.for_n(tbl, 8, 16)
    assert grid.eps * 8 * tbl.h == pytest.approx(math.pi)
    with pytest.raises(DomainError):
        TorusGrid.for_n(tbl, 3, 16)
    with pytest.raises(DomainError):
        TorusGrid(tbl=tbl, n_theta=24)
    with pytest.raises(DomainError):
        TorusGrid(tbl=tbl, n_theta=16, eps=0.1, n=8)


def test_cylinder_offset():
    grid, jet = straight(0.5, 64, 16)
    # N points to the axis: the offset cylinder has radius 0.4
    shifted = jet_perturbed(jet, np.full(grid.shape, 0.1))
    np.testing.assert_allclose(mean_curvature(shifted).values, 1.25, atol=1e-10)


def test_normal_derivatives_match_differences():
    grid, jet = torus(0.2, 16, 512, 32)
    inner = slice(4, -4)
    Nt = np.stack([d_t(jet.N[..., k], grid.tbl.dt) for k in range(3)], axis=-1)
    Nth = np.stack([d_theta(jet.N[..., k]) for k in range(3)], axis=-1)
    np.testing.assert_allclose(jet.Nt[inner], Nt[inner], atol=1e-6)
    np.testing.assert_allclose(jet.Nth, Nth, atol=1e-8)


def test_normal_triple_is_gauss_times_area():
    _, jet = torus(0.1, 16, 256, 16)
    np.testing.assert_allclose(normal_triple(jet), gauss_curvature(jet).values * jet.area_elem,
                               rtol=1e-10, atol=1e-12)


def test_second_form_norm_from_curvatures():
    _, jet = torus(0.3, 16, 256, 16)
    H = mean_curvature(jet).values
    K = gauss_curvature(jet).values
    np.testing.assert_allclose(second_form_norm2(jet), 4 * H ** 2 - 2 * K, rtol=1e-10)


def test_rotation_leaves_curvature_unchanged():
    _, jet = torus(0.2, 16, 128, 16)
    R = Rotation.from_rotvec([0.3, -0.5, 0.8]).as_matrix()
    rotated = rotate_jet(jet, R)
    np.testing.assert_allclose(np.linalg.norm(rotated.X, axis=-1), np.linalg.norm(jet.X, axis=-1), rtol=1e-13)
    rebuilt = assemble_jet(rotated.X, rotated.Xt, rotated.Xth, rotated.Xtt, rotated.Xtth, rotated.Xthth)
    np.testing.assert_allclose(mean_curvature(rebuilt).values, mean_curvature(jet).values, rtol=1e-12)
    np.testing.assert_allclose(rebuilt.N, rotated.N, atol=1e-14)


def test_degenerate_parametrization():
    shape = (8, 4, 3)
    X = np.zeros(shape)
    Xt = np.zeros(shape)
    Xt[..., 0] = 1.0
    Xth = np.zeros(shape)
    Xth[..., 1] = 1.0
    Xth[2, 3] = Xt[2, 3]
    with pytest.raises(ImmersionError) as info:
        assemble_jet(X, Xt, Xth, X, X, X)
    assert info.value.index == (2, 3)


def test_cell_shift_is_rotation():
    grid, jet = torus(0.2, 16, 128, 16)
    for k in (1, 5):
        moved = sample_cell_shift(grid, k)
        rotated = rotate_jet(jet, rotation(2 * np.pi * k / 16))
        np.testing.assert_allclose(moved.X, rotated.X, atol=1e-10)
        np.testing.assert_allclose(moved.N, rotated.N, atol=1e-10)
        np.testing.assert_allclose(mean_curvature(moved).values, mean_curvature(jet).values, atol=1e-10)
