import math
import logging
from dataclasses import dataclass
from functools import lru_cache

from cmctorus.exceptions import ConvergenceError, DomainError

AGM_MAX_ITER = 40
AGM_TOL = 1e-15


@dataclass(frozen=True)
class Modulus:
    """
    Modulus k of a complete elliptic integral.

    The complementary parameter kprime2 = 1 - k^2 is the stored quantity so
    that moduli close to 1 keep full relative accuracy. Build it with
    Modulus.from_k or Modulus.from_complement, never by recomputing
    1 - k^2 from a rounded k.
    """
    k: float
    kprime2: float

    def __post_init__(self):
        if not (0.0 <= self.k <= 1.0) or not (0.0 <= self.kprime2 <= 1.0):
            raise DomainError(f"Modulus out of range: k={self.k}, kprime2={self.kprime2}")

    @classmethod
    def from_k(cls, k):
        if k < 0 or k > 1:
            raise DomainError(f"Modulus k={k} outside [0, 1]")
        return cls(k=float(k), kprime2=float((1.0 - k) * (1.0 + k)))

    @classmethod
    def from_complement(cls, kprime2):
        if kprime2 < 0 or kprime2 > 1:
            raise DomainError(f"Complementary parameter {kprime2} outside [0, 1]")
        return cls(k=math.sqrt(1.0 - kprime2), kprime2=float(kprime2))

    def complementary(self):
        return Modulus(k=math.sqrt(self.kprime2), kprime2=self.k * self.k)


def _agm(kprime2):
    """
    Run the arithmetic-geometric mean seeded with (1, sqrt(kprime2)).

    Returns:
        (agm, s) where s = sum_{n>=0} 2^(n-1) c_n^2 with c_0^2 = 1 - kprime2
        and c_{n+1} = (a_n - b_n)/2.
    """
    a, b = 1.0, math.sqrt(kprime2)
    s = 0.5 * (1.0 - kprime2)
    power = 0.5
    for _ in range(AGM_MAX_ITER):
        if abs(a - b) <= AGM_TOL * a:
            return a, s
        c = 0.5 * (a - b)
        a, b = 0.5 * (a + b), math.sqrt(a * b)
        power *= 2.0
        s += power * c * c
    raise ConvergenceError(f"AGM did not converge in {AGM_MAX_ITER} iterations (kprime2={kprime2})")


def ellip_k(m):
    """
    Complete elliptic integral of the first kind K(k).

    Parameters:
        m (Modulus): modulus with 0 <= k < 1.

    Returns:
        float: K(k) = pi / (2 agm(1, k')).

    Example:
        ellip_k(Modulus.from_k(0.0))
        Result: 1.5707963267948966
    """
    if m.kprime2 <= 0.0:
        raise DomainError("K(k) diverges at k = 1")
    agm, _ = _agm(m.kprime2)
    return math.pi / (2.0 * agm)


def ellip_e(m):
    """
    Complete elliptic integral of the second kind E(k), 0 <= k <= 1.

    Computed from the same AGM run as K: E = K (1 - sum 2^(n-1) c_n^2).
    """
    if m.kprime2 == 0.0:
        return 1.0
    agm, s = _agm(m.kprime2)
    return math.pi / (2.0 * agm) * (1.0 - s)


@dataclass(frozen=True)
class NeckSize:
    """Neck size a in (0, 1/2] and the unduloid constants derived from it."""
    a: float

    def __post_init__(self):
        if not (0.0 < self.a <= 0.5):
            raise DomainError(f"Neck size a={self.a} outside (0, 1/2]")

    @property
    def gamma(self):
        return self.a * (1.0 - self.a)

    @property
    def modulus(self):
        # k_a^2 = 1 - a^2/(1-a)^2, complement passed exactly
        return Modulus.from_complement((self.a / (1.0 - self.a)) ** 2)

    @property
    def tau(self):
        return period_tau(self.a)

    @property
    def h(self):
        return height_h(self.a)


def as_neck(a):
    return a if isinstance(a, NeckSize) else NeckSize(float(a))


@lru_cache(maxsize=256)
def _period(a):
    neck = NeckSize(a)
    return ellip_k(neck.modulus) / (1.0 - a)


@lru_cache(maxsize=256)
def _height(a):
    neck = NeckSize(a)
    return neck.gamma * _period(a) + (1.0 - a) * ellip_e(neck.modulus)


def period_tau(a):
    """
    Half-period tau_a of the conformal unduloid profile.

    The profile is x(t) = (1-a) dn((1-a) t, k_a), hence tau_a = K(k_a)/(1-a),
    which is 2K at the modulus 1-2a (Landen). tau_{1/2} = pi.
    """
    neck = as_neck(a)
    return _period(neck.a)


def height_h(a):
    """
    Half-height h_a = gamma_a tau_a + (1-a) E(k_a) advanced by z over [0, tau_a].

    Example:
        height_h(0.5)
        Result: 1.5707963267948966
    """
    neck = as_neck(a)
    return _height(neck.a)


def height_derivative(a, step=1e-6):
    """dh_a/da by central differences (second-order one-sided at a = 1/2)."""
    neck = as_neck(a)
    a = neck.a
    d = step * max(a, 1e-3) if a > 2 * step else 0.25 * a
    if a + d <= 0.5:
        return (height_h(a + d) - height_h(a - d)) / (2.0 * d)
    logging.debug(f"One-sided height derivative at a={a}")
    return (3.0 * height_h(a) - 4.0 * height_h(a - d) + height_h(a - 2.0 * d)) / (2.0 * d)
