import math
import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.integrate import quad_vec

from cmctorus.elliptic import height_derivative
from cmctorus.exceptions import ConvergenceError, DomainError, LinearSolveError, NoRootError, QuadratureError
from cmctorus.geometry import TorusGrid, build_jet, mean_curvature
from cmctorus.jacobi import LimitOperator
from cmctorus.profile import solve_profile
from cmctorus.reduction import FixedPointOptions, ReductionResult, fixed_point

QUAD_EPSABS = 1e-13
QUAD_EPSREL = 1e-12


@dataclass
class EnergyReport:
    area: float
    volume: float
    h_energy: Optional[float] = None
    a_derivative_energy: Optional[float] = None


def _cells(grid):
    return grid.n if grid.n is not None else 1


def _flux(jet):
    """X . X_t ^ X_theta."""
    return np.einsum("...k,...k->...", jet.X, jet.N) * jet.area_elem


def area_volume(grid, jet):
    """
    Area and algebraic volume (1/3) int X . X_t ^ X_theta of the surface.

    One cell is integrated and multiplied by n for a closed torus; the
    straight unduloid (n is None) reports a single period.
    """
    w = grid.cell_weight
    cells = _cells(grid)
    area = cells * w * float(np.sum(jet.area_elem))
    volume = cells * w * float(np.sum(_flux(jet))) / 3.0
    return EnergyReport(area=area, volume=volume)


def profile_volume(tbl):
    """pi int x^2 z' dt over one period: the volume swept by the profile discs."""
    return math.pi * tbl.dt * float(np.sum(tbl.x ** 2 * tbl.zp))


def ray_average(H, X):
    """
    m_H(X) = int_0^1 H(sX) s^2 ds, with H frozen at its floor value along the part of the ray inside the floor.

    Parameters:
        H (PrescribedCurvature): radial curvature.
        X (array): points, shape (..., 3).

    Returns:
        array of shape X.shape[:-1]
    """
    r = np.linalg.norm(X, axis=-1)
    if H.is_constant:
        return np.full(r.shape, 1.0 / 3.0)
    flat = r.ravel()
    s0 = np.minimum(1.0, H.floor / flat)
    inner = float(H.radial(H.floor)) * s0 ** 3 / 3.0

    def integrand(v):
        s = s0 + (1.0 - s0) * v
        return H.radial(np.maximum(s * flat, H.floor)) * s * s * (1.0 - s0)

    outer, err, info = quad_vec(integrand, 0.0, 1.0, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, norm="max",
                                full_output=True)
    if not info.success:
        raise QuadratureError(f"Ray integral of H did not converge (error estimate {err:.3e})")
    return (inner + outer).reshape(r.shape)


def h_energy(grid, jet, H):
    """A + 2 int m_H(X) X . X_t ^ X_theta, over the whole torus when n is set."""
    w = grid.cell_weight
    cell = float(np.sum(jet.area_elem)) + 2.0 * float(np.sum(ray_average(H, jet.X) * _flux(jet)))
    return _cells(grid) * w * cell


def energy_report(grid, jet, H):
    report = area_volume(grid, jet)
    report.h_energy = h_energy(grid, jet, H)
    return report


def _torus(n, a, n_t, n_theta):
    tbl = solve_profile(a, n_t)
    grid = TorusGrid.for_n(tbl, n, n_theta)
    return grid, build_jet(grid)


def energy_a_derivative(n, a, n_t=512, n_theta=32, closed_family=False):
    """
    int (M(X_{n,a}) - 1) nu dt dtheta over one cell for H = 1.

    By default nu = x^2 w0 (1 + eps x sin(theta)). With closed_family the
    normal velocity of the closed tori X_{n,a} is used instead, which also
    carries d eps/da = -eps h'/h; that form equals -(1/2n) dE_1/da.
    """
    grid, jet = _torus(n, a, n_t, n_theta)
    tbl = grid.tbl
    eps = grid.eps
    x, xp, z, zp = (v[:, None] for v in (tbl.x, tbl.xp, tbl.z, tbl.zp))
    s = np.sin(grid.theta)[None, :]
    P = 1.0 + eps * x * s
    nu = x * x * tbl.w0[:, None] * P
    if closed_family:
        log_rate = -height_derivative(a) / tbl.h
        nu = nu + x * log_rate * P * (zp * s / eps + z * xp)
    excess = mean_curvature(jet).values - 1.0
    return grid.cell_weight * float(np.sum(excess * nu))


def energy_one(n, a, n_t=512, n_theta=32):
    """E_1(X_{n,a}) = A + 2V."""
    grid, jet = _torus(n, a, n_t, n_theta)
    report = area_volume(grid, jet)
    return report.area + 2.0 * report.volume


def energy_fd_derivative(n, a, step=1e-4, n_t=512, n_theta=32):
    """-(1/2n) dE_1/da by central differences with step step*a."""
    d = step * a
    slope = (energy_one(n, a + d, n_t, n_theta) - energy_one(n, a - d, n_t, n_theta)) / (2.0 * d)
    return -slope / (2.0 * n)


def kernel_mass(tbl):
    """int x^2 w0 dt dtheta over one period; 2 pi + O(a)."""
    return 2.0 * math.pi * tbl.dt * float(np.sum(tbl.x ** 2 * tbl.w0))


def area_expansion_defect(n, a, area):
    """(A - 4 pi n (1 - a - a^2 log(a) / 2)) / (4 pi n)."""
    return (area - 4.0 * math.pi * n * (1.0 - a - 0.5 * a * a * math.log(a))) / (4.0 * math.pi * n)


def volume_expansion_defect(n, a, volume):
    """(V + (2 pi n / 3)(2 - 3a)) / (2 pi n / 3)."""
    scale = 2.0 * math.pi * n / 3.0
    return (volume + scale * (2.0 - 3.0 * a)) / scale


# Neck-size matching on b = a n^gamma log n

def neck_from_b(b, n, gamma):
    return b / (n ** gamma * math.log(n))


def b_from_neck(a, n, gamma):
    return a * n ** gamma * math.log(n)


def leading_b(A, gamma):
    """Root b_c = |A| pi^gamma / gamma of the leading balance -gamma b - A pi^gamma = 0."""
    return abs(A) * math.pi ** gamma / gamma


@dataclass
class MatchOptions:
    n_t: int = 512
    n_theta: int = 32
    sweep_points: int = 9
    sweep_factor: float = 8.0
    max_bisect: int = 30
    tol_b: float = 1e-6
    tol_match: float = 1e-8
    retry_anderson: int = 2
    fixed_point: FixedPointOptions = field(default_factory=FixedPointOptions)


@dataclass
class NeckRoot:
    a: float
    b: float
    bracket: tuple
    sweep: list
    iterations: int
    value: object


@dataclass
class MatchResult:
    n: int
    a_n: float
    b_n: float
    lambda0_res: float
    lambda1_res: Optional[float]
    bracket: tuple
    reduction: Optional[ReductionResult]
    sweep: list = field(default_factory=list)
    converged: bool = True

    @property
    def lambda1_ratio(self):
        """|lambda1| at the root over the largest |lambda0| of the sweep."""
        scale = max((abs(s["lambda0"]) for s in self.sweep if np.isfinite(s["lambda0"])), default=0.0)
        if self.lambda1_res is None or scale == 0.0:
            return None
        return abs(self.lambda1_res) / scale

    def summary(self):
        return {"n": self.n, "a_n": self.a_n, "b_n": self.b_n, "lambda0_res": self.lambda0_res,
                "lambda1": self.lambda1_res, "lambda1_ratio": self.lambda1_ratio, "converged": self.converged,
                "bracket": list(self.bracket), "sweep": self.sweep}


def _lambda0(value):
    return float(getattr(value, "lambda0", value))


def bisect_neck(lambda0_fn, n, gamma, b_c, opts=None):
    """
    Locate a sign change of lambda0 along a geometric b-sweep, then bisect in b.

    Sweep points whose reduction fails are kept in the sweep with lambda0 = nan
    and an error message; the bracket joins the nearest finite values.

    Parameters:
        lambda0_fn (callable): a -> lambda0, or a -> ReductionResult.
        n (int): number of periods.
        gamma (float): decay exponent of H.
        b_c (float): sweep center.
        opts (MatchOptions, optional)

    Returns:
        NeckRoot
    """
    opts = opts or MatchOptions()
    values = {}

    def evaluate(b):
        a = neck_from_b(b, n, gamma)
        if a not in values:
            values[a] = lambda0_fn(a)
        return a, _lambda0(values[a])

    bs = [b for b in np.geomspace(b_c / opts.sweep_factor, b_c * opts.sweep_factor, opts.sweep_points)
          if neck_from_b(b, n, gamma) <= 0.5]
    if len(bs) < 2:
        raise NoRootError(f"Sweep around b={b_c:.4g} leaves a <= 1/2 for n={n}")
    sweep = []
    bracket = None
    last = None
    for b in bs:
        try:
            a, lam = evaluate(b)
        except (ConvergenceError, DomainError, LinearSolveError) as e:
            a = neck_from_b(b, n, gamma)
            logging.warning(f"Sweep point a={a:.4g} (b={b:.4g}) failed: {e}")
            sweep.append({"a": a, "b": float(b), "lambda0": math.nan, "error": str(e)})
            continue
        sweep.append({"a": a, "b": float(b), "lambda0": lam})
        if lam == 0.0:
            return NeckRoot(a=a, b=float(b), bracket=(a, a), sweep=sweep, iterations=0, value=values[a])
        if last is not None and np.sign(last["lambda0"]) != np.sign(lam):
            bracket = (last["b"], float(b))
            break
        last = sweep[-1]
    if bracket is None:
        failed = sum(1 for s in sweep if not np.isfinite(s["lambda0"]))
        raise NoRootError(f"lambda0 keeps one sign over b in [{bs[0]:.4g}, {bs[-1]:.4g}] for n={n} "
                          f"({failed} of {len(sweep)} sweep points failed)", sweep)

    lo, hi = bracket
    f_lo = evaluate(lo)[1]
    mid = 0.5 * (lo + hi)
    final = (lo, hi)
    iterations = 0
    for iterations in range(1, opts.max_bisect + 1):
        mid = 0.5 * (lo + hi)
        final = (lo, hi)
        _, f_mid = evaluate(mid)
        if abs(f_mid) <= opts.tol_match or hi - lo <= opts.tol_b * b_c:
            break
        if np.sign(f_mid) == np.sign(f_lo):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    a_mid = neck_from_b(mid, n, gamma)
    return NeckRoot(a=a_mid, b=mid, bracket=(neck_from_b(final[0], n, gamma), neck_from_b(final[1], n, gamma)),
                    sweep=sweep, iterations=iterations, value=values[a_mid])


def reduce_at(n, a, H, opts=None):
    """
    Full reduction on the closed n-torus of neck size a.

    A plain Picard run that fails is repeated once with Anderson mixing of
    depth opts.retry_anderson.
    """
    opts = opts or MatchOptions()
    grid, jet = _torus(n, a, opts.n_t, opts.n_theta)
    operator = LimitOperator(grid.tbl, grid.n_theta)
    try:
        return fixed_point(grid, H, opts.fixed_point, base=jet, operator=operator)
    except ConvergenceError as e:
        if opts.fixed_point.anderson_depth or not opts.retry_anderson:
            raise
        logging.info(f"Picard failed at n={n}, a={a:.4g} ({e}); retrying with Anderson depth {opts.retry_anderson}")
    mixed = replace(opts.fixed_point, anderson_depth=opts.retry_anderson)
    return fixed_point(grid, H, mixed, base=jet, operator=operator)


def match_neck(n, H, opts=None, lambda0_fn=None, bracket_hint=None):
    """
    Find a_n with lambda0(a_n) = 0 for the n-torus.

    Parameters:
        n (int): number of periods.
        H (PrescribedCurvature): prescribed curvature, A < 0 expected.
        opts (MatchOptions, optional)
        lambda0_fn (callable, optional): replaces the full reduction, a -> lambda0 or ReductionResult.
        bracket_hint (float, optional): sweep center in b, defaults to leading_b(A, gamma).

    Returns:
        MatchResult, with converged False when bisection stopped on the bracket
        width before |lambda0| reached tol_match
    """
    opts = opts or MatchOptions()
    if H.A >= 0:
        logging.warning(f"A={H.A} is not negative; no neck size is expected to match")
    if lambda0_fn is None:
        lambda0_fn = lambda a: reduce_at(n, a, H, opts)
    b_c = bracket_hint if bracket_hint is not None else leading_b(H.A if H.A != 0 else 1.0, H.gamma)

    root = bisect_neck(lambda0_fn, n, H.gamma, b_c, opts)
    reduction = root.value if isinstance(root.value, ReductionResult) else None
    lambda0 = _lambda0(root.value)
    converged = abs(lambda0) <= opts.tol_match
    if not converged:
        logging.warning(f"Bisection stopped at |lambda0| = {abs(lambda0):.3e} > {opts.tol_match:.1e} "
                        f"on the bracket width limit")
    return MatchResult(n=n, a_n=root.a, b_n=b_from_neck(root.a, n, H.gamma), lambda0_res=lambda0,
                       lambda1_res=reduction.lambda1 if reduction is not None else None,
                       bracket=root.bracket, reduction=reduction, sweep=root.sweep, converged=converged)
