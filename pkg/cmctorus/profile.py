import math
import logging
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import solve_ivp
from scipy.ndimage import maximum_filter1d

from cmctorus.elliptic import as_neck, ellip_e, ellip_k, height_h, period_tau
from cmctorus.exceptions import DomainError, IntegrationError, ProfileError
from cmctorus.fields import derivatives, values_of

DEFAULT_RTOL = 1e-12
DEFAULT_ATOL = 1e-14
MIN_GRID = 64


@dataclass(frozen=True, eq=False)
class ProfileTable:
    """
    One period of the conformal unduloid profile sampled on t_i = -tau + i*dt.

    The point t = tau is identified with t = -tau, so index 0 holds the neck
    at -tau with z[0] = -h, and index n_t/2 holds the bulge at t = 0.
    """
    a: float
    gamma: float
    tau: float
    h: float
    t: np.ndarray
    x: np.ndarray
    xp: np.ndarray
    z: np.ndarray
    zp: np.ndarray
    w0: np.ndarray
    w0p: np.ndarray
    w1: np.ndarray
    rtol: float = DEFAULT_RTOL

    @property
    def n_t(self):
        return self.t.shape[0]

    @property
    def dt(self):
        return 2.0 * self.tau / self.n_t

    @property
    def xpp(self):
        return (1.0 - 2.0 * self.gamma) * self.x - 2.0 * self.x ** 3

    @property
    def xppp(self):
        return (1.0 - 2.0 * self.gamma) * self.xp - 6.0 * self.x ** 2 * self.xp

    @property
    def zpp(self):
        return 2.0 * self.x * self.xp

    @property
    def zppp(self):
        return 2.0 * self.xp ** 2 + 2.0 * self.x * self.xpp

    @property
    def p(self):
        return self.x ** 2 + self.gamma ** 2 / self.x ** 2

    def shifted(self, periods):
        """The same table translated by whole periods: t -> t + 2k tau, z -> z + 2k h."""
        return replace(self, t=self.t + 2.0 * periods * self.tau, z=self.z + 2.0 * periods * self.h)


@dataclass(frozen=True)
class WeightedNormSpec:
    mu: float = 1.5
    delta: float = 1.0

    def __post_init__(self):
        if not (1.0 < self.mu < 2.0):
            raise DomainError(f"Weight exponent mu={self.mu} outside (1, 2)")
        if self.delta <= 0:
            raise DomainError(f"Window half-width delta={self.delta} must be positive")


def default_grid_size(a):
    """1024 points per period down to a = 0.01, 256 per unit of tau below."""
    neck = as_neck(a)
    if neck.a >= 0.01:
        return 1024
    return 256 * int(math.ceil(period_tau(neck)))


def _rhs(gamma):
    def rhs(t, y):
        x, xp, _, w, wp = y
        p = x * x + gamma * gamma / (x * x)
        return [xp, (1.0 - 2.0 * gamma) * x - 2.0 * x ** 3, gamma + x * x, wp, -2.0 * p * w]
    return rhs


def solve_profile(a, n_t=None, rtol=DEFAULT_RTOL, validate=True):
    """
    Integrate the conformal unduloid system over [0, tau_a] and extend by parity.

    Parameters:
        a (float or NeckSize): neck size in (0, 1/2].
        n_t (int, optional): even number of t-samples per period, at least 64. Defaults to default_grid_size(a).
        rtol (float, optional): local tolerance of the Runge-Kutta integrator.
        validate (bool, optional): check the table invariants before returning it.

    Returns:
        ProfileTable

    Example:
        tbl = solve_profile(0.1, 256)
        tbl.x[0]
        Result: 0.1 (to 1e-8)
    """
    neck = as_neck(a)
    if n_t is None:
        n_t = default_grid_size(neck)
    if n_t < MIN_GRID or n_t % 2:
        raise DomainError(f"Grid size n_t={n_t} must be even and at least {MIN_GRID}")

    gamma = neck.gamma
    tau = period_tau(neck)
    half = n_t // 2
    t_half = np.linspace(0.0, tau, half + 1)

    sol = solve_ivp(_rhs(gamma), (0.0, tau), [1.0 - neck.a, 0.0, 0.0, 1.0, 0.0], method="DOP853",
                    t_eval=t_half, rtol=rtol, atol=DEFAULT_ATOL)
    if not sol.success:
        raise IntegrationError(f"Profile integration failed for a={neck.a}, n_t={n_t}: {sol.message}")
    logging.debug(f"Profile a={neck.a} integrated with {sol.nfev} evaluations")

    # i < half maps to -t_half[half - i], i >= half to t_half[i - half]
    idx = np.arange(n_t)
    k = np.abs(idx - half)
    sign = np.where(idx < half, -1.0, 1.0)
    x, xp, z, w0, w0p = sol.y[:, k]
    x = x.copy()
    tbl = ProfileTable(a=neck.a, gamma=gamma, tau=tau, h=height_h(neck), t=sign * t_half[k],
                       x=x, xp=sign * xp, z=sign * z, zp=gamma + x * x, w0=w0.copy(), w0p=sign * w0p,
                       w1=(gamma + x * x) / x, rtol=rtol)
    if validate:
        validate_profile(tbl)
    return tbl


def validate_profile(tbl, tol=1e-8):
    """Raise ProfileError if a table invariant fails."""
    half = tbl.n_t // 2
    conformal = float(np.max(np.abs(tbl.x ** 2 - tbl.xp ** 2 - tbl.zp ** 2)))
    if conformal > 1e-9:
        raise ProfileError(f"Conformality residual {conformal:.3e} for a={tbl.a}")
    if np.min(tbl.x) < tbl.a - tol or np.max(tbl.x) > 1.0 - tbl.a + tol:
        raise ProfileError(f"Profile leaves [a, 1-a] for a={tbl.a}")
    if abs(tbl.x[0] - tbl.a) > tol:
        raise ProfileError(f"x(tau) = {tbl.x[0]} differs from a = {tbl.a}")
    if abs(tbl.z[0] + tbl.h) > tol * max(1.0, tbl.h):
        raise ProfileError(f"z(-tau) = {tbl.z[0]} differs from -h = {-tbl.h}")
    if tbl.n_t % 4 == 0:
        quarter = half + tbl.n_t // 4
        if abs(tbl.x[quarter] ** 2 - tbl.gamma) > tol:
            raise ProfileError(f"x(tau/2)^2 = {tbl.x[quarter] ** 2} differs from gamma = {tbl.gamma}")
    return tbl


def kernel_w0(tbl):
    """Even Jacobi seed w_{a,0}^+ with w0(0) = 1."""
    return tbl.w0


def kernel_w1(tbl):
    """Even Jacobi seed w_{a,1}^+ = z'/x."""
    return tbl.w1


def period_from_ode(a, rtol=DEFAULT_RTOL):
    """
    Measure (tau_a, z(tau_a)) by integrating until x' crosses zero upwards.

    The event is located by root finding on the dense output. Independent
    cross-check of period_tau and height_h.
    """
    neck = as_neck(a)
    if neck.a == 0.5:
        raise DomainError("The cylinder a = 1/2 has constant profile and no measurable neck")
    gamma = neck.gamma

    def rhs(t, y):
        x, xp, _ = y
        return [xp, (1.0 - 2.0 * gamma) * x - 2.0 * x ** 3, gamma + x * x]

    def neck_event(t, y):
        return y[1]
    neck_event.terminal = True
    neck_event.direction = 1.0

    sol = solve_ivp(rhs, (0.0, 2.0 * period_tau(neck)), [1.0 - neck.a, 0.0, 0.0], method="DOP853",
                    events=neck_event, rtol=rtol, atol=DEFAULT_ATOL)
    if not sol.success or len(sol.t_events[0]) == 0:
        raise IntegrationError(f"No neck found for a={neck.a}: {sol.message}")
    return float(sol.t_events[0][0]), float(sol.y_events[0][0][2])


def to_cylindrical(tbl):
    """The profile as a graph over the axis: (z, rho, drho/dz) with rho(z) = x and drho/dz = x'/z'."""
    return tbl.z, tbl.x, tbl.xp / tbl.zp


def conservation_residual(tbl):
    """Max deviation of rho^2 - rho/sqrt(1 + rho'^2) from -gamma."""
    _, rho, slope = to_cylindrical(tbl)
    quantity = rho ** 2 - rho / np.sqrt(1.0 + slope ** 2)
    return float(np.max(np.abs(quantity + tbl.gamma)))


def unduloid_area(a):
    """Area of one period, 4 pi (1-a) E(k_a)."""
    neck = as_neck(a)
    return 4.0 * math.pi * (1.0 - neck.a) * ellip_e(neck.modulus)


def unduloid_volume(a):
    """Volume enclosed by one period, pi * integral of x^2 z' dt."""
    neck = as_neck(a)
    a = neck.a
    m = neck.modulus
    return 2.0 * math.pi / 3.0 * (1.0 - a) * ((2.0 - a + a * a) * ellip_e(m) - a * a * ellip_k(m))


def window_half_width(tbl, spec):
    if spec.delta > tbl.tau + 1e-12:
        raise DomainError(f"Window delta={spec.delta} larger than the half-period tau={tbl.tau}")
    return int(math.floor(spec.delta / tbl.dt + 1e-9))


def local_sup(f, tbl, k=0):
    """Per-row max over theta of |f| and its grid derivatives up to order k."""
    v = values_of(f)
    if v.ndim == 1:
        v = v[:, None]
    ders = derivatives(v, tbl.dt, order=k)
    return np.max(np.stack([np.max(np.abs(d), axis=1) for d in ders.values()]), axis=0)


def weighted_norm(f, tbl, spec=None, k=0):
    """
    Discrete weighted norm sup_s x(s)^(-mu) max_{|t-s| <= delta} (|f| + derivatives up to k).

    Parameters:
        f (SymField or array): field on the table grid, (n_t, n_theta) or (n_t,) for theta-independent fields.
        tbl (ProfileTable): profile providing the weight x.
        spec (WeightedNormSpec, optional): mu and delta, defaults 1.5 and 1.
        k (int): derivative order 0, 1 or 2.

    Returns:
        float
    """
    if spec is None:
        spec = WeightedNormSpec()
    if k not in (0, 1, 2):
        raise DomainError(f"Derivative order k={k} not in {{0, 1, 2}}")
    m = window_half_width(tbl, spec)
    local = local_sup(f, tbl, k)
    size = min(2 * m + 1, tbl.n_t)
    windowed = maximum_filter1d(local, size=size, mode="wrap")
    return float(np.max(tbl.x ** (-spec.mu) * windowed))
