import numpy as np
import pytest

from cmctorus.exceptions import SolvabilityError
from cmctorus.fields import SymField, theta_grid
from cmctorus.geometry import build_jet, jet_perturbed, mean_curvature, TorusGrid
from cmctorus.jacobi import (LimitOperator, assemble_full, kernel_pair, kernel_residual, project_kernel,
                             solve_projected, uniform_bound_ratio)
from cmctorus.profile import default_grid_size
from tests.conftest import profile, smooth_symmetric, straight, torus


def test_full_operator_reduces_to_limit_when_straight():
    grid, jet = straight(0.1, 256, 16)
    dev = assemble_full(grid, jet).deviation()
    assert dev["b"] <= 1e-8
    assert dev["c"] <= 1e-7
    assert dev["d"] <= 1e-7
    assert dev["e"] <= 1e-12


def test_full_operator_deviation_is_small_for_small_bend():
    tbl = profile(0.1, 256)
    grid = TorusGrid(tbl=tbl, n_theta=16, eps=1e-7)
    dev = assemble_full(grid, build_jet(grid)).deviation()
    assert max(dev.values()) <= 1e-6


def test_full_operator_deviation_scales_with_eps():
    grid, jet = torus(0.1, 16, 256, 16)
    dev = assemble_full(grid, jet).deviation()
    assert dev["b"] / grid.eps <= 3.0


def test_full_operator_is_the_linearized_mean_curvature(rng):
    grid, jet = torus(0.2, 16, 256, 16)
    phi = smooth_symmetric(grid.tbl, grid.n_theta, rng)
    h = 1e-6
    plus = mean_curvature(jet_perturbed(jet, h * phi)).values
    minus = mean_curvature(jet_perturbed(jet, -h * phi)).values
    derivative = 2.0 * jet.G * (plus - minus) / (2.0 * h)
    applied = assemble_full(grid, jet).apply(phi).values
    np.testing.assert_allclose(derivative, applied, atol=1e-6 * max(1.0, np.max(np.abs(applied))))


def test_kernel_residual_converges():
    op = LimitOperator(profile(0.1, 128), 16)
    for which in (0, 1):
        residuals, orders = op.residual_order([128, 256, 512], which=which, seam_band=3)
        # fourth-order differences in t: at least second order, at most the design order
        assert min(orders) >= 1.7
        assert orders[-1] <= 5.0
        assert residuals[-1] <= 1e-5


def test_sin_theta_is_exact_kernel_of_the_cylinder():
    tbl = profile(0.5, 64)
    op = LimitOperator(tbl, 16)
    field = np.repeat(np.sin(theta_grid(16))[None, :], 64, axis=0)
    assert np.max(np.abs(op.apply(field).values)) <= 1e-12
    assert kernel_residual(op, 1) <= 1e-12


def test_projection_splits_off_kernel():
    tbl = profile(0.2, 128)
    ker = kernel_pair(tbl, 16)
    c0, c1, rest = project_kernel(ker.w0_field, ker)
    assert c0 == pytest.approx(1.0, abs=1e-12)
    assert abs(c1) <= 1e-12
    assert rest.sup() <= 1e-12
    assert abs(ker.gram[0, 1]) <= 1e-10 * np.sqrt(ker.gram[0, 0] * ker.gram[1, 1])

    f = SymField(np.cos(3 * theta_grid(16))[None, :] + tbl.x[:, None] ** 2)
    c0, c1, rest = project_kernel(f, ker)
    again = project_kernel(rest, ker)
    assert abs(again[0]) <= 1e-12 and abs(again[1]) <= 1e-12
    np.testing.assert_allclose(again[2].values, rest.values, atol=1e-13)


def test_limit_operator_is_symmetric(rng):
    op = LimitOperator(profile(0.2, 128), 16)
    u = rng.normal(size=(128, 16))
    v = rng.normal(size=(128, 16))
    lu, lv = op.apply(u).values, op.apply(v).values
    scale = np.linalg.norm(lu) * np.linalg.norm(v)
    assert abs(np.sum(lu * v) - np.sum(u * lv)) <= 1e-12 * scale


def test_limit_operator_keeps_theta_modes_apart():
    tbl = profile(0.2, 128)
    op = LimitOperator(tbl, 16)
    theta = theta_grid(16)
    f = np.cos(2 * np.pi * tbl.t / tbl.tau)[:, None] * np.cos(2 * theta)[None, :]
    out = op.apply(f).values
    amplitude = out @ np.cos(2 * theta) / np.sum(np.cos(2 * theta) ** 2)
    rest = out - amplitude[:, None] * np.cos(2 * theta)[None, :]
    assert np.max(np.abs(rest)) <= 1e-12 * np.max(np.abs(out))


def test_manufactured_solution_is_recovered(rng):
    tbl = profile(0.2, 512)
    op = LimitOperator(tbl, 32)
    _, _, psi = project_kernel(SymField(smooth_symmetric(tbl, 32, rng)), op.kernel)
    phi = op.solve_projected(op.apply(psi))
    assert np.max(np.abs(phi.values - psi.values)) <= 1e-8 * psi.sup()


def test_solve_then_apply(rng):
    tbl = profile(0.1, 256)
    op = LimitOperator(tbl, 16)
    _, _, f = op.project_range(SymField(smooth_symmetric(tbl, 16, rng)))
    phi = solve_projected(f, tbl, operator=op)
    assert np.max(np.abs(op.apply(phi).values - f.values)) <= 1e-8 * f.sup()
    c0, c1, _ = project_kernel(phi, op.kernel)
    assert abs(c0) <= 1e-10 * phi.sup() and abs(c1) <= 1e-10 * phi.sup()
    phi.check_symmetry(1e-10)


@pytest.mark.parametrize("a", [0.1, 0.03, 0.01])
def test_axial_mode_is_solved_exactly_at_small_necks(a, rng):
    tbl = profile(a, 1024)
    op = LimitOperator(tbl, 16)
    f = np.zeros(tbl.n_t)
    for k in range(6):
        f += rng.normal() * np.cos(k * np.pi * tbl.t / tbl.tau)
    _, _, g = op.project_range(SymField(np.repeat(f[:, None], 16, axis=1)))
    phi = op.solve_projected(g)
    assert np.max(np.abs(op.apply(phi).values - g.values)) <= 1e-8 * g.sup()
    assert abs(project_kernel(phi, op.kernel)[0]) <= 1e-10 * phi.sup()


def test_range_projection_recovers_multipliers(rng):
    tbl = profile(0.2, 256)
    op = LimitOperator(tbl, 16)
    _, _, psi = project_kernel(SymField(smooth_symmetric(tbl, 16, rng)), op.kernel)
    solvable = op.apply(psi).values
    c0, w1 = op.multiplier_fields()
    lam0, lam1, rest = op.project_range(solvable + 2.0 * c0.values - 3.0 * w1.values)
    assert lam0 == pytest.approx(2.0, rel=1e-8)
    assert lam1 == pytest.approx(-3.0, rel=1e-8)
    np.testing.assert_allclose(rest.values, solvable, atol=1e-8 * np.max(np.abs(solvable)))
    assert max(op.solvability_defects(rest)) <= 1e-10


def test_constant_coefficient_mode():
    tbl = profile(0.5, 128)
    op = LimitOperator(tbl, 16)
    theta = theta_grid(16)
    dt = tbl.dt
    k = 3
    g = np.cos(k * tbl.t)
    # discrete symbol of the 4th-order second difference on cos(k t)
    sigma = (-2 * np.cos(2 * k * dt) + 32 * np.cos(k * dt) - 30) / (12 * dt * dt)
    f = g[:, None] * np.sin(3 * theta)[None, :]
    phi = op.solve_projected(f)
    exact = f / (sigma + 1.0 - 9.0)
    assert np.max(np.abs(phi.values - exact)) <= 1e-8 * np.max(np.abs(exact))


def test_kernel_content_is_rejected():
    tbl = profile(0.2, 128)
    op = LimitOperator(tbl, 16)
    with pytest.raises(SolvabilityError):
        op.solve_projected(op.multiplier_fields()[0])
    with pytest.raises(SolvabilityError):
        op.solve_projected(op.kernel.w1_field)


def test_seam_defect_sits_at_the_neck():
    tbl = profile(0.2, 256)
    op = LimitOperator(tbl, 16)
    defect = np.abs(op.seam_defect)
    assert np.argmax(defect) in (0, 1, tbl.n_t - 1)
    assert np.max(defect[16:-16]) <= 1e-4 * np.max(defect)


@pytest.mark.slow
def test_uniform_bound_ratio_does_not_grow():
    ratios = []
    for a in (0.1, 0.03, 0.01, 0.003):
        op = LimitOperator(profile(a, default_grid_size(a)), 16)
        ratios.append(uniform_bound_ratio(op, np.random.default_rng(1), samples=4))
    assert all(np.isfinite(ratios))
    assert max(ratios) <= 1.25 * ratios[0]
