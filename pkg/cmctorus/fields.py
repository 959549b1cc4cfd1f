import math
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft
from scipy import sparse

from cmctorus.exceptions import SymmetryError

SYMMETRY_TOL = 1e-12


def theta_grid(n_theta):
    """theta_j = -pi + j 2pi/n_theta, j = 0..n_theta-1."""
    return -math.pi + np.arange(n_theta) * (2.0 * math.pi / n_theta)


def even_partner(n_t):
    """Index of -t_i on the periodic t-grid starting at -tau."""
    return (-np.arange(n_t)) % n_t


def mirror_partner(n_theta):
    """Index of pi - theta_j on the theta-grid starting at -pi."""
    return (n_theta // 2 - np.arange(n_theta)) % n_theta


@dataclass(frozen=True, eq=False)
class SymField:
    """
    Scalar grid function on [-tau, tau) x [-pi, pi), periodic in both variables.

    even_t flags phi(-t, .) = phi(t, .); theta_mirror flags phi(., pi - theta) = phi(., theta).
    Flags are claims about the values; check_symmetry verifies them.
    """
    values: np.ndarray
    even_t: bool = True
    theta_mirror: bool = True

    @property
    def shape(self):
        return self.values.shape

    def symmetry_defect(self):
        v = self.values
        defect = 0.0
        if self.even_t:
            defect = max(defect, float(np.max(np.abs(v - v[even_partner(v.shape[0]), :]))))
        if self.theta_mirror:
            defect = max(defect, float(np.max(np.abs(v - v[:, mirror_partner(v.shape[1])]))))
        return defect

    def check_symmetry(self, tol=SYMMETRY_TOL):
        scale = max(1.0, float(np.max(np.abs(self.values))))
        defect = self.symmetry_defect()
        if defect > tol * scale:
            raise SymmetryError(f"Symmetry flags violated by {defect:.3e} (scale {scale:.3e})")
        return self

    def symmetrized(self):
        v = self.values
        if self.even_t:
            v = 0.5 * (v + v[even_partner(v.shape[0]), :])
        if self.theta_mirror:
            v = 0.5 * (v + v[:, mirror_partner(v.shape[1])])
        return SymField(v, self.even_t, self.theta_mirror)

    def with_values(self, values):
        return SymField(np.asarray(values, dtype=float), self.even_t, self.theta_mirror)

    def sup(self):
        return float(np.max(np.abs(self.values)))


def values_of(f):
    return f.values if isinstance(f, SymField) else np.asarray(f, dtype=float)


# 4th-order central differences, periodic in t (axis 0)

def d_t(f, h):
    return (-np.roll(f, -2, axis=0) + 8.0 * np.roll(f, -1, axis=0)
            - 8.0 * np.roll(f, 1, axis=0) + np.roll(f, 2, axis=0)) / (12.0 * h)


def d_tt(f, h):
    return (-np.roll(f, -2, axis=0) + 16.0 * np.roll(f, -1, axis=0) - 30.0 * f
            + 16.0 * np.roll(f, 1, axis=0) - np.roll(f, 2, axis=0)) / (12.0 * h * h)


def fd4_second_matrix(n, h):
    """Sparse periodic matrix of d_tt."""
    offsets = [-2, -1, 0, 1, 2]
    coeffs = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / (12.0 * h * h)
    mat = sparse.diags(list(coeffs), offsets, shape=(n, n), format="lil")
    # wrap-around entries
    mat[0, n - 2] = coeffs[0]
    mat[0, n - 1] = coeffs[1]
    mat[1, n - 1] = coeffs[0]
    mat[n - 1, 0] = coeffs[3]
    mat[n - 1, 1] = coeffs[4]
    mat[n - 2, 0] = coeffs[4]
    return mat.tocsr()


# Spectral derivatives in theta (axis 1)

def _wavenumbers(n_theta):
    return np.arange(n_theta // 2 + 1, dtype=float)


def d_theta(f):
    n = f.shape[1]
    k = _wavenumbers(n)
    ik = 1j * k
    ik[-1] = 0.0  # Nyquist
    return sfft.irfft(ik * sfft.rfft(f, axis=1), n=n, axis=1)


def d_thetatheta(f):
    n = f.shape[1]
    k = _wavenumbers(n)
    return sfft.irfft(-(k * k) * sfft.rfft(f, axis=1), n=n, axis=1)


def derivatives(f, h, order=2):
    """
    Grid derivatives of a field up to the given order.

    Returns:
        dict with keys among 'f', 't', 'th', 'tt', 'tth', 'thth'.
    """
    f = values_of(f)
    out = {"f": f}
    if order >= 1:
        out["t"] = d_t(f, h)
        out["th"] = d_theta(f)
    if order >= 2:
        out["tt"] = d_tt(f, h)
        out["tth"] = d_t(out["th"], h)
        out["thth"] = d_thetatheta(f)
    return out


def inner(f, g, weight=1.0):
    return weight * float(np.sum(values_of(f) * values_of(g)))
