import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from cmctorus.anderson import AndersonAcceleration
from cmctorus.exceptions import ConvergenceError, DomainError, SymmetryError
from cmctorus.fields import SymField, values_of
from cmctorus.geometry import TorusGrid, build_jet, jet_perturbed, mean_curvature
from cmctorus.jacobi import LimitOperator, project_kernel
from cmctorus.profile import WeightedNormSpec, solve_profile, weighted_norm

ITERATE_SYMMETRY_TOL = 1e-10
REMAINDER_STEP = 1e-6


@dataclass(frozen=True)
class PrescribedCurvature:
    """
    Radial curvature function H(X) = 1 + A |X|^(-gamma) + remainder(|X|), defined for |X| >= floor.

    Example:
        PrescribedCurvature(A=-1.0, gamma=1.0).value(np.array([10.0, 0.0, 0.0]))
        Result: 0.9
    """
    A: float = 0.0
    gamma: float = 1.0
    beta: Optional[float] = None
    remainder: Optional[Callable] = None
    floor: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.gamma < 2.0):
            raise DomainError(f"Decay exponent gamma={self.gamma} outside (0, 2)")
        if self.beta is not None and self.beta <= 0:
            raise DomainError(f"Remainder exponent beta={self.beta} must be positive")
        if self.floor <= 0:
            raise DomainError(f"Radius floor {self.floor} must be positive")

    @property
    def is_constant(self):
        return self.A == 0.0 and self.remainder is None

    def radial(self, r):
        r = np.asarray(r, dtype=float)
        if self.is_constant:
            return np.ones_like(r)
        if np.any(r < self.floor):
            raise DomainError(f"|X| = {float(np.min(r)):.4g} below the radius floor {self.floor}")
        out = 1.0 + self.A * r ** (-self.gamma)
        if self.remainder is not None:
            out = out + self.remainder(r)
        return out

    def radial_extended(self, r):
        """H frozen at the floor value inside the floor radius."""
        return self.radial(np.maximum(np.asarray(r, dtype=float), self.floor))

    def radial_derivative(self, r):
        r = np.asarray(r, dtype=float)
        if self.is_constant:
            return np.zeros_like(r)
        out = -self.A * self.gamma * r ** (-self.gamma - 1.0)
        if self.remainder is not None:
            step = REMAINDER_STEP * r
            out = out + (self.remainder(r + step) - self.remainder(r - step)) / (2.0 * step)
        return out

    def value(self, X):
        return self.radial(np.linalg.norm(X, axis=-1))

    def gradient(self, X):
        X = np.asarray(X, dtype=float)
        r = np.linalg.norm(X, axis=-1)
        return (self.radial_derivative(r) / r)[..., None] * X


def eval_H(H, X):
    return H.value(X)


@dataclass
class FixedPointOptions:
    tol: float = 1e-10
    max_iter: int = 200
    anderson_depth: int = 0
    divergence_window: int = 5
    norm: WeightedNormSpec = field(default_factory=WeightedNormSpec)
    callback: Optional[Callable] = None


@dataclass(frozen=True, eq=False)
class ReductionResult:
    phi: SymField
    lambda0: float
    lambda1: float
    iterations: int
    residual_orth: float
    residual_full: float
    phi_norm_weighted: float
    a: float
    eps: float
    trace: list = field(default_factory=list)

    def summary(self):
        return {"a": self.a, "eps": self.eps, "lambda0": self.lambda0, "lambda1": self.lambda1,
                "iterations": self.iterations, "residual_orth": self.residual_orth,
                "residual_full": self.residual_full, "phi_norm_weighted": self.phi_norm_weighted}


def residual(grid, phi, H, base=None):
    """Pointwise M(Y) - H(Y) for Y = X + phi N."""
    if base is None:
        base = build_jet(grid)
    jet = jet_perturbed(base, phi)
    return SymField(mean_curvature(jet).values - H.value(jet.X))


def _weighted_residual(grid, phi, H, base):
    return 2.0 * grid.tbl.x[:, None] ** 2 * residual(grid, phi, H, base).values


def fixed_point(grid, H, opts=None, base=None, operator=None):
    """
    Picard iteration phi <- L_a^-1 P[L_a phi - 2x^2 (M(Y) - H(Y))] from phi = 0.

    P splits off the multiplier directions (c0, w1 sin(theta)) along the
    cokernel of the bordered limit operator (LimitOperator.project_range), so
    every solve is exact and the iterate stays orthogonal to w0 and w1 sin(theta).
    With anderson_depth > 0 the Picard map is mixed by AndersonAcceleration.

    Parameters:
        grid (TorusGrid): surface to perturb.
        H (PrescribedCurvature): any object with value(X) works.
        opts (FixedPointOptions, optional): tolerances and callback for trace records.
        base (SurfaceJet, optional): analytic jet of grid, built when missing.
        operator (LimitOperator, optional): reused factorizations.

    Returns:
        ReductionResult
    """
    opts = opts or FixedPointOptions()
    tbl = grid.tbl
    base = base if base is not None else build_jet(grid)
    operator = operator if operator is not None else LimitOperator(tbl, grid.n_theta)
    phi = SymField(np.zeros(grid.shape))
    accel = AndersonAcceleration(phi.values.size, opts.anderson_depth) if opts.anderson_depth else None

    trace = []
    previous = None
    growth = 0
    converged = False
    for k in range(opts.max_iter):
        try:
            weighted = _weighted_residual(grid, phi, H, base)
        except DomainError as e:
            if k == 0:
                raise
            raise ConvergenceError(f"Fixed point left the domain of H at a={tbl.a}, eps={grid.eps} "
                                   f"after {k} iterations: {e}", trace) from e
        lam0, lam1, _ = project_kernel(SymField(weighted), operator.kernel)
        _, _, orth = operator.project_range(SymField(weighted))
        forcing = operator.apply(phi).values - weighted
        _, _, forcing = operator.project_range(SymField(forcing))
        mapped = operator.solve_projected(forcing)

        if accel is not None:
            flat = accel.apply(mapped.values.ravel(), (mapped.values - phi.values).ravel(), k)
            mapped = SymField(flat.reshape(grid.shape))
        try:
            new = mapped.check_symmetry(ITERATE_SYMMETRY_TOL).symmetrized()
        except SymmetryError as e:
            raise ConvergenceError(f"Fixed point iterate lost its symmetry at a={tbl.a}, eps={grid.eps} "
                                   f"after {k + 1} iterations: {e}", trace) from e

        step = weighted_norm(SymField(new.values - phi.values), tbl, opts.norm, k=2)
        record = {"iteration": k + 1, "step": step, "residual_orth": orth.sup(),
                  "lambda0": lam0, "lambda1": lam1, "phi_norm": weighted_norm(new, tbl, opts.norm, k=2)}
        trace.append(record)
        if opts.callback is not None:
            opts.callback(record)
        logging.debug(f"Fixed point iteration {k + 1}: step {step:.3e}, lambda0 {lam0:.3e}")
        phi = new

        if step <= opts.tol:
            converged = True
            break
        if not np.isfinite(step):
            raise ConvergenceError(f"Fixed point step is not finite at a={tbl.a}, eps={grid.eps}", trace)
        if previous is not None and step > previous:
            growth += 1
            if growth >= opts.divergence_window:
                raise ConvergenceError(f"Fixed point diverges at a={tbl.a}, eps={grid.eps}: step grew "
                                       f"{growth} times in a row", trace)
        else:
            growth = 0
        previous = step

    if not converged:
        raise ConvergenceError(f"Fixed point not converged after {opts.max_iter} iterations "
                               f"(last step {trace[-1]['step']:.3e})", trace)

    weighted = _weighted_residual(grid, phi, H, base)
    lam0, lam1, _ = project_kernel(SymField(weighted), operator.kernel)
    _, _, orth = operator.project_range(SymField(weighted))
    full = float(np.max(np.abs(weighted / (2.0 * tbl.x[:, None] ** 2))))
    return ReductionResult(phi=phi, lambda0=lam0, lambda1=lam1, iterations=len(trace),
                           residual_orth=orth.sup(), residual_full=full,
                           phi_norm_weighted=weighted_norm(phi, tbl, opts.norm, k=2),
                           a=tbl.a, eps=grid.eps, trace=trace)


def multipliers(grid, result, H, base=None, operator=None):
    """(lambda0, lambda1): kernel coefficients of 2x^2 (M(Y) - H(Y)) at the converged phi."""
    operator = operator if operator is not None else LimitOperator(grid.tbl, grid.n_theta)
    weighted = _weighted_residual(grid, result.phi, H, base if base is not None else build_jet(grid))
    lam0, lam1, _ = project_kernel(SymField(weighted), operator.kernel)
    return lam0, lam1


def envelope_constant(result, tbl, mu=1.5, gamma=1.0):
    """Smallest R with |phi(s, theta)| <= R eps^min(1, gamma) x(s)^mu on the grid."""
    rate = result.eps ** min(1.0, gamma)
    return float(np.max(np.abs(values_of(result.phi)) / (rate * tbl.x[:, None] ** mu)))


def scaling_study(a, H, eps_values, n_t=256, n_theta=16, opts=None):
    """
    Fit the slope of log ||phi_eps||_{a,2,mu} against log eps.

    eps need not close up a torus; the reduction only uses one period.

    Returns:
        dict with eps, norms, slope, the expected min(1, gamma), the envelope
        constant of each run and their maximum R
    """
    opts = opts or FixedPointOptions()
    tbl = solve_profile(a, n_t)
    operator = LimitOperator(tbl, n_theta)
    norms = []
    envelopes = []
    for eps in eps_values:
        grid = TorusGrid(tbl=tbl, n_theta=n_theta, eps=float(eps))
        result = fixed_point(grid, H, opts, operator=operator)
        norms.append(result.phi_norm_weighted)
        envelopes.append(envelope_constant(result, tbl, opts.norm.mu, H.gamma))
        logging.info(f"eps={eps:.4g}: ||phi|| = {result.phi_norm_weighted:.4e} in {result.iterations} iterations")
    slope = float(np.polyfit(np.log(eps_values), np.log(norms), 1)[0])
    return {"eps": [float(e) for e in eps_values], "norms": norms, "slope": slope,
            "expected": min(1.0, H.gamma), "envelopes": envelopes, "R": max(envelopes)}
