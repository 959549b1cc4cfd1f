import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from cmctorus.exceptions import DomainError, ImmersionError, InternalError
from cmctorus.fields import SymField, d_t, d_theta, d_thetatheta, d_tt, theta_grid, values_of
from cmctorus.profile import ProfileTable

DEGENERACY_GUARD = 1e-14


def rotation(sigma):
    """Rotation R_sigma about the x1-axis."""
    c, s = math.cos(sigma), math.sin(sigma)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rotations(sigmas):
    """Stack of rotations about the x1-axis, shape (len(sigmas), 3, 3)."""
    sigmas = np.asarray(sigmas, dtype=float)
    c, s = np.cos(sigmas), np.sin(sigmas)
    out = np.zeros(sigmas.shape + (3, 3))
    out[..., 0, 0] = 1.0
    out[..., 1, 1] = c
    out[..., 1, 2] = -s
    out[..., 2, 1] = s
    out[..., 2, 2] = c
    return out


@dataclass(frozen=True, eq=False)
class TorusGrid:
    """
    Parameter grid of the bent unduloid X_{eps,a} (eps = 0 is the straight unduloid).

    When n is given, eps = pi / (n h_a) so that n periods close up into a torus.
    """
    tbl: ProfileTable
    n_theta: int
    eps: float = 0.0
    n: Optional[int] = None

    def __post_init__(self):
        if self.n_theta < 16 or self.n_theta & (self.n_theta - 1):
            raise DomainError(f"n_theta={self.n_theta} must be a power of two, at least 16")
        if self.eps < 0:
            raise DomainError(f"eps={self.eps} must be non-negative")
        if self.n is not None and abs(self.eps * self.n * self.tbl.h - math.pi) > 1e-12:
            raise DomainError(f"eps={self.eps} does not close {self.n} periods of height {2 * self.tbl.h}")
        if self.eps * float(np.max(self.tbl.x)) >= 1.0:
            raise DomainError(f"Tube reaches the axis: eps * max x = {self.eps * np.max(self.tbl.x)}")

    @classmethod
    def straight(cls, tbl, n_theta):
        return cls(tbl=tbl, n_theta=n_theta, eps=0.0)

    @classmethod
    def for_n(cls, tbl, n, n_theta):
        if n < 4:
            raise DomainError(f"Number of periods n={n} must be at least 4")
        return cls(tbl=tbl, n_theta=n_theta, eps=math.pi / (n * tbl.h), n=n)

    @property
    def theta(self):
        return theta_grid(self.n_theta)

    @property
    def dtheta(self):
        return 2.0 * math.pi / self.n_theta

    @property
    def shape(self):
        return (self.tbl.n_t, self.n_theta)

    @property
    def cell_weight(self):
        return self.tbl.dt * self.dtheta


@dataclass(frozen=True, eq=False)
class SurfaceJet:
    """
    Position, derivatives up to second order, unit normal and fundamental forms on a grid.

    Vector fields have shape (n_t, n_theta, 3). Analytic jets also carry the
    derivatives of the unit normal, which jet_perturbed needs.
    """
    X: np.ndarray
    Xt: np.ndarray
    Xth: np.ndarray
    Xtt: np.ndarray
    Xtth: np.ndarray
    Xthth: np.ndarray
    N: np.ndarray
    E: np.ndarray
    F: np.ndarray
    G: np.ndarray
    L: np.ndarray
    M: np.ndarray
    Nn: np.ndarray
    area_elem: np.ndarray
    Nt: Optional[np.ndarray] = None
    Nth: Optional[np.ndarray] = None
    Ntt: Optional[np.ndarray] = None
    Ntth: Optional[np.ndarray] = None
    Nthth: Optional[np.ndarray] = None
    dt: Optional[float] = None

    @property
    def EFG(self):
        return self.E, self.F, self.G

    @property
    def LMN(self):
        return self.L, self.M, self.Nn

    @property
    def has_normal_derivatives(self):
        return self.Nt is not None


def _dot(u, v):
    return np.einsum("...k,...k->...", u, v)


def _unit_normal_jet(m, mt, mth, mtt, mtth, mthth):
    """Derivatives of u = m/|m| up to second order from those of m."""
    r = np.linalg.norm(m, axis=-1)[..., None]
    u = m / r

    def first(ma):
        return (ma - u * _dot(u, ma)[..., None]) / r

    def second(ma, mab, ua, ub, rb):
        num = mab - ub * _dot(u, ma)[..., None] - u * (_dot(ub, ma) + _dot(u, mab))[..., None]
        return num / r - ua * rb / r

    ut, uth = first(mt), first(mth)
    rt, rth = _dot(u, mt)[..., None], _dot(u, mth)[..., None]
    utt = second(mt, mtt, ut, ut, rt)
    utth = second(mt, mtth, ut, uth, rth)
    uthth = second(mth, mthth, uth, uth, rth)
    return u, ut, uth, utt, utth, uthth


def assemble_jet(X, Xt, Xth, Xtt, Xtth, Xthth, third=None, dt=None, check=True):
    """
    Build a SurfaceJet from position derivatives.

    third, when given, is (Xttt, Xttth, Xtthth, Xththth) and enables the normal derivatives.
    """
    m = np.cross(Xt, Xth)
    E, F, G = _dot(Xt, Xt), _dot(Xt, Xth), _dot(Xth, Xth)
    det = E * G - F * F
    if check:
        bad = det <= DEGENERACY_GUARD * np.maximum(E * G, DEGENERACY_GUARD)
        if np.any(bad):
            index = tuple(int(i) for i in np.argwhere(bad)[0])
            raise ImmersionError(f"Parametrization degenerates at grid point {index}", index=index)
    extra = {}
    if third is not None:
        Xttt, Xttth, Xtthth, Xththth = third
        mt = np.cross(Xtt, Xth) + np.cross(Xt, Xtth)
        mth = np.cross(Xtth, Xth) + np.cross(Xt, Xthth)
        mtt = np.cross(Xttt, Xth) + 2.0 * np.cross(Xtt, Xtth) + np.cross(Xt, Xttth)
        mtth = np.cross(Xttth, Xth) + np.cross(Xtt, Xthth) + np.cross(Xt, Xtthth)
        mthth = np.cross(Xtthth, Xth) + 2.0 * np.cross(Xtth, Xthth) + np.cross(Xt, Xththth)
        N, Nt, Nth, Ntt, Ntth, Nthth = _unit_normal_jet(m, mt, mth, mtt, mtth, mthth)
        extra = dict(Nt=Nt, Nth=Nth, Ntt=Ntt, Ntth=Ntth, Nthth=Nthth)
    else:
        N = m / np.linalg.norm(m, axis=-1)[..., None]
    return SurfaceJet(X=X, Xt=Xt, Xth=Xth, Xtt=Xtt, Xtth=Xtth, Xthth=Xthth, N=N,
                      E=E, F=F, G=G, L=_dot(N, Xtt), M=_dot(N, Xtth), Nn=_dot(N, Xthth),
                      area_elem=np.linalg.norm(m, axis=-1), dt=dt, **extra)


def _frame_derivatives(tbl, eps, theta):
    """
    Derivatives of the untwisted frame quantities U, V = DU, W = U_theta, ...

    D = d/dt + eps z' J with J v = e1 x v. World derivatives are R_{eps z} times these.
    """
    col = lambda arr: arr[:, None]
    x, xp, xpp, xppp = col(tbl.x), col(tbl.xp), col(tbl.xpp), col(tbl.xppp)
    zp, zpp, zppp = col(tbl.zp), col(tbl.zpp), col(tbl.zppp)
    c, s = np.cos(theta)[None, :], np.sin(theta)[None, :]
    zero = np.zeros_like(x * c)
    P = 1.0 + eps * x * s
    kappa = eps * zp

    def vec(a, b, d):
        return np.stack(np.broadcast_arrays(a, b, d), axis=-1)

    V = vec(xp * c, xp * s, zp * P)
    W = vec(-x * s, x * c, zero)
    A1, A2, A3 = xpp * c, xpp * s - eps * zp ** 2 * P, zpp * P + 2.0 * eps * zp * xp * s
    A = vec(A1, A2, A3)
    B = vec(-xp * s, xp * c, eps * zp * x * c)
    Wth = vec(-x * c, -x * s, zero)
    A1t = xppp * c
    A2t = xppp * s - 2.0 * eps * zp * zpp * P - eps ** 2 * zp ** 2 * xp * s
    A3t = zppp * P + eps * zpp * xp * s + 2.0 * eps * (zpp * xp + zp * xpp) * s
    DA = vec(A1t, A2t - kappa * A3, A3t + kappa * A2)
    Ath = vec(-xpp * s, xpp * c - eps ** 2 * zp ** 2 * x * c, eps * zpp * x * c + 2.0 * eps * zp * xp * c)
    Bth = vec(-xp * c, -xp * s, -eps * zp * x * s)
    Wthth = vec(x * s, -x * c, zero)
    return dict(V=V, W=W, A=A, B=B, Wth=Wth, DA=DA, Ath=Ath, Bth=Bth, Wthth=Wthth)


def _rotate(Rs, vec):
    return np.einsum("tab,tjb->tja", Rs, vec)


def jet_torus(grid, check=True):
    """
    Analytic jet of X = R_{eps z}(x cos, 1/eps + x sin, 0); at eps = 0 the straight unduloid (x cos, x sin, z).

    All derivatives come from the profile ODE, none are numerical.
    """
    tbl, eps = grid.tbl, grid.eps
    theta = grid.theta
    if check and eps > 0 and np.any(1.0 + eps * np.outer(tbl.x, np.sin(theta)) <= 0):
        raise ImmersionError("1 + eps x sin(theta) <= 0 somewhere on the grid")
    fr = _frame_derivatives(tbl, eps, theta)
    x, z = tbl.x[:, None], tbl.z[:, None]
    c, s = np.cos(theta)[None, :], np.sin(theta)[None, :]
    if eps == 0.0:
        U = np.stack(np.broadcast_arrays(x * c, x * s, z + 0.0 * c), axis=-1)
        Rs = np.broadcast_to(np.eye(3), (tbl.n_t, 3, 3))
    else:
        U = np.stack(np.broadcast_arrays(x * c, 1.0 / eps + x * s, 0.0 * x * c), axis=-1)
        Rs = rotations(eps * tbl.z)
    world = {key: _rotate(Rs, value) for key, value in fr.items()}
    return assemble_jet(_rotate(Rs, U), world["V"], world["W"], world["A"], world["B"], world["Wth"],
                        third=(world["DA"], world["Ath"], world["Bth"], world["Wthth"]), dt=tbl.dt, check=check)


def jet_unduloid(grid, check=True):
    """Analytic jet of the straight unduloid X_a."""
    if grid.eps != 0.0:
        raise DomainError(f"jet_unduloid needs eps = 0, got {grid.eps}")
    return jet_torus(grid, check=check)


def build_jet(grid, check=True):
    return jet_torus(grid, check=check)


def sample_cell_shift(grid, periods, check=True):
    """
    Jet of the cell advanced by whole periods, evaluated from the shifted profile table.

    On a closed torus this equals the base jet rotated by R_{2 pi periods / n}.
    """
    return jet_torus(replace(grid, tbl=grid.tbl.shifted(periods)), check=check)


def jet_perturbed(base, phi, check=True):
    """
    Jet of Y = X + phi N.

    phi is differentiated with 4th-order differences in t (spacing dt) and
    spectrally in theta; X and N derivatives come from the analytic base jet.

    Parameters:
        base (SurfaceJet): analytic jet carrying normal derivatives.
        phi (SymField or array): normal displacement on the same grid.
        check (bool): raise ImmersionError when Y degenerates.

    Returns:
        SurfaceJet without normal derivatives.
    """
    if not base.has_normal_derivatives:
        raise InternalError("Perturbing a jet requires the normal derivatives of the base jet")
    dt = base.dt
    f = values_of(phi)
    ft, fth = d_t(f, dt), d_theta(f)
    ftt, fthth = d_tt(f, dt), d_thetatheta(f)
    ftth = d_t(fth, dt)
    e = lambda arr: arr[..., None]
    N = base.N
    Y = base.X + e(f) * N
    Yt = base.Xt + e(ft) * N + e(f) * base.Nt
    Yth = base.Xth + e(fth) * N + e(f) * base.Nth
    Ytt = base.Xtt + e(ftt) * N + 2.0 * e(ft) * base.Nt + e(f) * base.Ntt
    Ytth = base.Xtth + e(ftth) * N + e(ft) * base.Nth + e(fth) * base.Nt + e(f) * base.Ntth
    Ythth = base.Xthth + e(fthth) * N + 2.0 * e(fth) * base.Nth + e(f) * base.Nthth
    return assemble_jet(Y, Yt, Yth, Ytt, Ytth, Ythth, dt=dt, check=check)


def mean_curvature(jet):
    """Pointwise (E Nn - 2 F M + G L) / (2 (E G - F^2))."""
    det = jet.E * jet.G - jet.F ** 2
    bad = det < DEGENERACY_GUARD * jet.E * jet.G
    if np.any(bad):
        index = tuple(int(i) for i in np.argwhere(bad)[0])
        raise ImmersionError(f"E G - F^2 below {DEGENERACY_GUARD} at {index}", index=index)
    return SymField((jet.E * jet.Nn - 2.0 * jet.F * jet.M + jet.G * jet.L) / (2.0 * det))


def gauss_curvature(jet):
    """Pointwise (L Nn - M^2) / (E G - F^2)."""
    det = jet.E * jet.G - jet.F ** 2
    bad = det < DEGENERACY_GUARD * jet.E * jet.G
    if np.any(bad):
        index = tuple(int(i) for i in np.argwhere(bad)[0])
        raise ImmersionError(f"E G - F^2 below {DEGENERACY_GUARD} at {index}", index=index)
    return SymField((jet.L * jet.Nn - jet.M ** 2) / det)


def second_form_norm2(jet):
    """|II|^2 = tr((g^-1 II)^2)."""
    det = jet.E * jet.G - jet.F ** 2
    ginv = np.stack([np.stack([jet.G, -jet.F], -1), np.stack([-jet.F, jet.E], -1)], -2) / det[..., None, None]
    second = np.stack([np.stack([jet.L, jet.M], -1), np.stack([jet.M, jet.Nn], -1)], -2)
    shape_op = ginv @ second
    return np.einsum("...ij,...ji->...", shape_op, shape_op)


def normal_triple(jet):
    """N . N_t ^ N_theta = (L Nn - M^2) / |X_t ^ X_theta|."""
    return (jet.L * jet.Nn - jet.M ** 2) / jet.area_elem


def rotate_jet(jet, R):
    """The jet of R X for a fixed orthogonal R."""
    rot = lambda v: None if v is None else v @ R.T
    return SurfaceJet(X=rot(jet.X), Xt=rot(jet.Xt), Xth=rot(jet.Xth), Xtt=rot(jet.Xtt), Xtth=rot(jet.Xtth),
                      Xthth=rot(jet.Xthth), N=rot(jet.N), E=jet.E, F=jet.F, G=jet.G, L=jet.L, M=jet.M,
                      Nn=jet.Nn, area_elem=jet.area_elem, dt=jet.dt, Nt=rot(jet.Nt), Nth=rot(jet.Nth),
                      Ntt=rot(jet.Ntt), Ntth=rot(jet.Ntth), Nthth=rot(jet.Nthth))


def normal_projection(base, jet):
    """N . Y_t ^ Y_theta / (|X_t| |X_theta|) with N and X from the base jet, Y from jet."""
    proj = _dot(base.N, np.cross(jet.Xt, jet.Xth))
    return proj / np.sqrt(base.E * base.G)
