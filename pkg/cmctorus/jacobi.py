import math
import logging
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft
from scipy import sparse
from scipy.sparse.linalg import splu

from cmctorus.exceptions import LinearSolveError, SolvabilityError
from cmctorus.fields import (SymField, d_t, d_theta, d_thetatheta, d_tt, fd4_second_matrix, theta_grid,
                             values_of)
from cmctorus.geometry import second_form_norm2
from cmctorus.profile import WeightedNormSpec, solve_profile, weighted_norm

SOLVABILITY_TOL = 1e-8
SEAM_DEFECT_FLOOR = 1e-9


@dataclass(frozen=True, eq=False)
class JacobiCoeffs:
    """
    Coefficients of 2x^2 times the linearized mean curvature,
    b phi_tt + phi_thth + c phi + d phi_t + e phi_th.
    """
    b: SymField
    c: SymField
    d: SymField
    e: SymField
    p: np.ndarray
    dt: float

    def apply(self, phi):
        f = values_of(phi)
        out = (self.b.values * d_tt(f, self.dt) + d_thetatheta(f) + self.c.values * f
               + self.d.values * d_t(f, self.dt) + self.e.values * d_theta(f))
        return SymField(out)

    def deviation(self):
        """Sup norms of b - 1, c - 2p, d, e."""
        return {"b": float(np.max(np.abs(self.b.values - 1.0))),
                "c": float(np.max(np.abs(self.c.values - 2.0 * self.p[:, None]))),
                "d": self.d.sup(), "e": self.e.sup()}


def assemble_full(grid, jet):
    """
    Jacobi coefficients of the bent surface from its analytic jet.

    With S = |X_t|/|X_theta| and x^2 = G: b = G/E, d = -S_t/S^3, e = S_theta/S, c = G |II|^2.
    """
    tbl = grid.tbl
    E, G = jet.E, jet.G
    Et = 2.0 * np.einsum("...k,...k->...", jet.Xt, jet.Xtt)
    Gt = 2.0 * np.einsum("...k,...k->...", jet.Xth, jet.Xtth)
    Eth = 2.0 * np.einsum("...k,...k->...", jet.Xt, jet.Xtth)
    Gth = 2.0 * np.einsum("...k,...k->...", jet.Xth, jet.Xthth)
    b = G / E
    d = 0.5 * (Gt / G - Et / E) * b
    e = 0.5 * (Eth / E - Gth / G)
    c = G * second_form_norm2(jet)
    return JacobiCoeffs(b=SymField(b), c=SymField(c), d=SymField(d), e=SymField(e), p=tbl.p, dt=tbl.dt)


@dataclass(frozen=True, eq=False)
class KernelPair:
    w0_field: SymField
    w1_field: SymField
    gram: np.ndarray
    weight: float

    def fields(self):
        return (self.w0_field, self.w1_field)


def kernel_pair(tbl, n_theta):
    """w_{a,0} = w0(t) and w_{a,1} = w1(t) sin(theta) with their Gram matrix."""
    theta = theta_grid(n_theta)
    w0 = np.repeat(tbl.w0[:, None], n_theta, axis=1)
    w1 = tbl.w1[:, None] * np.sin(theta)[None, :]
    weight = tbl.dt * 2.0 * np.pi / n_theta
    gram = weight * np.array([[np.sum(w0 * w0), np.sum(w0 * w1)], [np.sum(w1 * w0), np.sum(w1 * w1)]])
    return KernelPair(w0_field=SymField(w0), w1_field=SymField(w1), gram=gram, weight=weight)


def project_kernel(f, ker):
    """
    Split f = coeff0 w0 + coeff1 w1 + remainder with remainder orthogonal to both.

    Returns:
        (coeff0, coeff1, remainder)
    """
    v = values_of(f)
    rhs = ker.weight * np.array([np.sum(v * ker.w0_field.values), np.sum(v * ker.w1_field.values)])
    coeff0, coeff1 = np.linalg.solve(ker.gram, rhs)
    remainder = v - coeff0 * ker.w0_field.values - coeff1 * ker.w1_field.values
    if isinstance(f, SymField):
        return float(coeff0), float(coeff1), f.with_values(remainder)
    return float(coeff0), float(coeff1), SymField(remainder)


class LimitOperator:
    """
    The limit Jacobi operator Delta + 2p_a on the periodic grid.

    4th-order differences in t, spectral in theta. Inversion goes mode by mode
    in theta on the even half-grid t_k = k dt, k = 0..n_t/2; modes 0 and 1 are
    bordered so that the solution stays orthogonal to w0 and w1 sin(theta).

    w0 is not periodic (its slope jumps at t = +-tau), so mode 0 borders with
    the seam defect c0 = L_a w0 of its periodic samples: a right-hand side f
    is solved exactly when it carries no c0-content along the cokernel
    functional of that border. project_range splits f accordingly.
    """

    def __init__(self, tbl, n_theta):
        self.tbl = tbl
        self.n_theta = n_theta
        self.kernel = kernel_pair(tbl, n_theta)
        n_t = tbl.n_t
        half = n_t // 2
        self._half = half
        self._d2 = fd4_second_matrix(n_t, tbl.dt)
        # rows of the full grid at t = k dt, k = 0..half (k = half is t = tau = index 0)
        self._rows = (half + np.arange(half + 1)) % n_t
        cols = np.abs(np.arange(n_t) - half)
        self._extend = sparse.csr_matrix((np.ones(n_t), (np.arange(n_t), cols)), shape=(n_t, half + 1))
        self._omega = np.full(half + 1, 2.0)
        self._omega[0] = self._omega[-1] = 1.0
        self._factors = {}
        self._cokernels = {}
        self.seam_defect = self._seam_defect()

    @property
    def p(self):
        return self.tbl.p

    def apply(self, phi):
        f = values_of(phi)
        out = d_tt(f, self.tbl.dt) + d_thetatheta(f) + 2.0 * self.tbl.p[:, None] * f
        return SymField(out)

    def mode_matrix(self, j):
        """Full periodic 1D operator d_tt + 2p - j^2 for theta-mode j."""
        return (self._d2 + sparse.diags(2.0 * self.tbl.p - j * j)).tocsr()

    def _seam_defect(self):
        w0 = self.tbl.w0
        defect = self.mode_matrix(0) @ w0
        scale = np.max(np.abs(w0))
        # at a = 1/2 the samples of w0 are a discrete kernel vector up to round-off
        if np.max(np.abs(defect)) <= SEAM_DEFECT_FLOOR * scale:
            return w0.copy()
        return defect * (scale / np.max(np.abs(defect)))

    def _bordering(self, j):
        """(column, constraint) of the border for theta-mode j, None for unbordered modes."""
        if j == 0:
            return self.seam_defect, self.tbl.w0
        if j == 1:
            return self.tbl.w1, self.tbl.w1
        return None

    def _factor(self, j):
        if j in self._factors:
            return self._factors[j]
        full = self.mode_matrix(j)
        reduced = (full[self._rows, :] @ self._extend).tocsc()
        border = self._bordering(j)
        if border is not None:
            column, constraint = border
            col = sparse.csc_matrix(column[self._rows][:, None])
            row = sparse.csc_matrix((self._omega * constraint[self._rows])[None, :])
            reduced = sparse.bmat([[reduced, col], [row, None]], format="csc")
        try:
            lu = splu(reduced)
        except RuntimeError as e:
            raise LinearSolveError(f"Factorization of theta-mode {j} failed: {e}")
        self._factors[j] = lu
        return lu

    def _solve_mode(self, j, rhs_half):
        lu = self._factor(j)
        if self._bordering(j) is not None:
            sol = lu.solve(np.append(rhs_half, 0.0))
            return sol[:-1], sol[-1]
        return lu.solve(rhs_half), 0.0

    def cokernel(self, j):
        """
        Even t-profile v with sum(v * f) equal to the border multiplier of theta-mode j for even f.

        f is solved exactly in that mode iff this sum vanishes.
        """
        if j in self._cokernels:
            return self._cokernels[j]
        lu = self._factor(j)
        unit = np.zeros(self._half + 2)
        unit[-1] = 1.0
        q = lu.solve(unit, trans="T")[:-1]
        # each half-grid row k stands for omega_k rows of the full grid
        v = self._extend @ (q / self._omega)
        self._cokernels[j] = v
        return v

    def multiplier_fields(self):
        """Directions (c0, w1 sin(theta)) along which the residual carries its multipliers."""
        c0 = np.repeat(self.seam_defect[:, None], self.n_theta, axis=1)
        return SymField(c0), self.kernel.w1_field

    def cokernel_fields(self):
        """(v0, v1 sin(theta)): f is exactly solvable iff it is orthogonal to both in plain grid sums."""
        theta = theta_grid(self.n_theta)
        v0 = np.repeat(self.cokernel(0)[:, None], self.n_theta, axis=1)
        v1 = self.cokernel(1)[:, None] * np.sin(theta)[None, :]
        return SymField(v0), SymField(v1)

    def project_range(self, f):
        """
        Split f = lam0 c0 + lam1 w1 sin(theta) + g with g exactly solvable.

        Returns:
            (lam0, lam1, g)
        """
        v = values_of(f)
        rest = v.copy()
        lams = []
        for direction, test in zip(self.multiplier_fields(), self.cokernel_fields()):
            # the two test fields live in different theta-modes, so the splits decouple
            lam = float(np.sum(test.values * v) / np.sum(test.values * direction.values))
            rest -= lam * direction.values
            lams.append(lam)
        if isinstance(f, SymField):
            return lams[0], lams[1], f.with_values(rest)
        return lams[0], lams[1], SymField(rest)

    def solvability_defects(self, f):
        """Relative c0- and w1-content of f, both zero when f is exactly solvable."""
        g = values_of(f)
        norm = np.sqrt(np.sum(g * g))
        return [abs(np.sum(g * d.values)) / max(norm * np.sqrt(np.sum(d.values ** 2)), 1e-300)
                for d in self.cokernel_fields()]

    def solve_projected(self, f, check=True):
        """
        The symmetric kernel-orthogonal solution of Delta phi + 2p phi = f.

        f must be exactly solvable (split it with project_range first). Each
        theta-mode is solved on the even half-grid; modes 0 and 1 carry one
        border constraint each, so phi is orthogonal to w0 and w1 sin(theta).
        """
        g = values_of(f)
        if check:
            defects = self.solvability_defects(g)
            if max(defects) > SOLVABILITY_TOL:
                raise SolvabilityError(f"Right-hand side has multiplier content {max(defects):.3e}")
        coeffs = sfft.rfft(g, axis=1)
        out = np.zeros_like(coeffs)
        for j in range(coeffs.shape[1]):
            col = coeffs[self._rows, j]
            re, _ = self._solve_mode(j, col.real)
            im, _ = self._solve_mode(j, col.imag)
            out[:, j] = self._extend @ re + 1j * (self._extend @ im)
        phi = sfft.irfft(out, n=self.n_theta, axis=1)
        _, _, phi = project_kernel(SymField(phi), self.kernel)
        return phi

    def residual_order(self, sizes, which=0, seam_band=3):
        """
        Observed convergence order of the kernel residual under grid refinement.

        Each size in sizes is an n_t for a fresh profile at the same a; seam_band
        rows on either side of t = +-tau are left out (w0 has a kink there).

        Returns:
            (residuals, orders) with len(orders) == len(sizes) - 1
        """
        residuals = []
        for n_t in sizes:
            op = LimitOperator(solve_profile(self.tbl.a, n_t, rtol=self.tbl.rtol), self.n_theta)
            residuals.append(kernel_residual(op, which, seam_band))
        orders = [math.log(residuals[i] / residuals[i + 1]) / math.log(sizes[i + 1] / sizes[i])
                  for i in range(len(sizes) - 1)]
        return residuals, orders


def assemble_limit(tbl, n_theta):
    return LimitOperator(tbl, n_theta)


def solve_projected(f, tbl, n_theta=None, operator=None):
    if operator is None:
        operator = LimitOperator(tbl, n_theta if n_theta is not None else values_of(f).shape[1])
    return operator.solve_projected(f)


def kernel_residual(operator, which=0, seam_band=0):
    """Sup norm of L_a applied to a kernel field, optionally ignoring seam_band rows on each side of t = +-tau."""
    field = operator.kernel.fields()[which]
    res = np.abs(operator.apply(field).values)
    if seam_band:
        res = res[seam_band:-seam_band]
    return float(np.max(res))


def exactly_solvable(operator, f):
    """
    Remove the c0- and w1-content of f along smooth directions.

    Mode 0 is corrected with L_a(x^2), whose preimage x^2 is smooth and overlaps
    w0; mode 1 with w1 sin(theta). Unlike project_range, nothing is added at the seam.
    """
    v = values_of(f).copy()
    bump = operator.apply(np.repeat((operator.tbl.x ** 2)[:, None], operator.n_theta, axis=1)).values
    directions = (bump, operator.kernel.w1_field.values)
    for direction, test in zip(directions, operator.cokernel_fields()):
        v -= np.sum(test.values * v) / np.sum(test.values * direction) * direction
    return SymField(v)


def uniform_bound_ratio(operator, rng, samples=4, spec=None, modes=6):
    """
    Largest observed ||phi||_{a,2,mu} / ||f||_{a,0,mu} over random symmetric solvable f.

    f is built from smooth even modes cos(k pi t / tau) times sin(j theta) (j odd)
    or cos(j theta) (j even), then made exactly solvable.
    """
    if spec is None:
        spec = WeightedNormSpec()
    tbl = operator.tbl
    theta = theta_grid(operator.n_theta)
    ratios = []
    for _ in range(samples):
        f = np.zeros((tbl.n_t, operator.n_theta))
        for k in range(modes):
            for j in range(4):
                ang = np.sin(j * theta) if j % 2 else np.cos(j * theta)
                f += rng.normal() * np.cos(k * np.pi * tbl.t / tbl.tau)[:, None] * ang[None, :]
        g = exactly_solvable(operator, f)
        g = g.with_values(g.values / weighted_norm(g, tbl, spec, k=0))
        phi = operator.solve_projected(g)
        ratios.append(weighted_norm(phi, tbl, spec, k=2) / weighted_norm(g, tbl, spec, k=0))
    logging.debug(f"Uniform bound ratios for a={tbl.a}: {ratios}")
    return max(ratios)
