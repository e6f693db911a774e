"""Independent reference implementations used by the tests.

Nothing here imports ho3b.  Angular-momentum symbols come from sympy,
oscillator functions from scipy's generalized Laguerre polynomials and
spherical harmonics, and spectra of quadratic Hamiltonians from a direct
normal-mode diagonalization.
"""
from __future__ import annotations

import math
import warnings
from functools import lru_cache

import numpy as np
import scipy.linalg as sl
from scipy import integrate
from scipy.special import gammaln, genlaguerre, sph_harm_y
from sympy import Rational
from sympy.physics.wigner import clebsch_gordan, wigner_6j, wigner_9j


def _r(x):
    return Rational(x).limit_denominator(4)


def cg(j1, m1, j2, m2, j, m) -> float:
    return float(clebsch_gordan(_r(j1), _r(j2), _r(j), _r(m1), _r(m2), _r(m)))


@lru_cache(maxsize=None)
def sixj(a, b, c, d, e, f) -> float:
    return float(wigner_6j(*(_r(x) for x in (a, b, c, d, e, f))))


def ninej(*args) -> float:
    return float(wigner_9j(*(_r(x) for x in args), prec=30))


# ---------------------------------------------------------------------------
# oscillator functions in three dimensions


@lru_cache(maxsize=None)
def _laguerre(n: int, l: int):
    lognorm = 0.5 * (math.log(2) + gammaln(n + 1) - gammaln(n + l + 1.5))
    return math.exp(lognorm), genlaguerre(n, l + 0.5)


def radial_u(n: int, l: int, x):
    """Reduced radial function with int u^2 dx = 1."""
    norm, poly = _laguerre(n, l)
    return norm * x ** (l + 1) * np.exp(-x * x / 2) * poly(x * x)


def ho_state(n: int, l: int, m: int, v):
    r = np.linalg.norm(v, axis=-1)
    th = np.arccos(np.clip(v[..., 2] / r, -1, 1))
    ph = np.arctan2(v[..., 1], v[..., 0])
    return radial_u(n, l, r) / r * sph_harm_y(l, m, th, ph)


def coupled(a, b, lam, mu, r, R):
    """[phi_a(r) phi_b(R)]_{lam mu} at arrays of points."""
    (na, la), (nb, lb) = a, b
    s = 0
    for ma in range(-la, la + 1):
        mb = mu - ma
        if abs(mb) > lb:
            continue
        c = cg(la, ma, lb, mb, lam, mu)
        if c:
            s = s + c * ho_state(na, la, ma, r) * ho_state(nb, lb, mb, R)
    return s


def radial_me(f, n: int, l: int, n2: int, a: float) -> float:
    """<n l | f(a x) | n2 l> by adaptive quadrature."""
    g = lambda x: radial_u(n, l, x) * radial_u(n2, l, x) * f(a * x)
    # split at the Gaussian tail so quad resolves every node
    edge = math.sqrt(2 * max(n, n2) + l + 1.5) + 1.0
    with warnings.catch_warnings():
        # quad flags roundoff when the requested tolerance is below what the
        # integrand allows; the comparison tolerances absorb that
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        v1, _ = integrate.quad(g, 0.0, edge, limit=400, epsabs=1e-14, epsrel=1e-13)
        v2, _ = integrate.quad(g, edge, edge + 14.0, limit=400, epsabs=1e-14, epsrel=1e-13)
    return v1 + v2


def sqrt_kernel_me(n: int, l: int, n2: int, mu: float) -> float:
    """int u_nl(q) u_n2l(q) sqrt(q^2 + mu^2) dq."""
    return radial_me(lambda q: np.sqrt(q * q + mu * mu), n, l, n2, 1.0)


# ---------------------------------------------------------------------------
# exactly solvable quadratic systems


def normal_mode_energy(masses, springs) -> float:
    """Ground state of sum p_i^2/2m_i + sum_{i<j} k_ij |r_i - r_j|^2.

    ``springs`` maps index pairs (i, j) to k_ij.  The centre-of-mass mode has
    zero frequency and drops out; each remaining mode contributes 3/2 omega.
    """
    m = np.diag(np.asarray(masses, dtype=float))
    k = np.zeros((3, 3))
    for (i, j), v in springs.items():
        k[i, i] += 2 * v
        k[j, j] += 2 * v
        k[i, j] -= 2 * v
        k[j, i] -= 2 * v
    w2 = sl.eigh(k, m, eigvals_only=True)
    return 1.5 * float(np.sqrt(np.clip(w2, 0.0, None)).sum())


def exchange_13(r: float) -> np.ndarray:
    """Action of the 1<->3 transposition on dimensionless Jacobi (x, y) for
    equal masses and b_y/b_x = r.

    With rho = r2 - r3 and lam = (r2 + r3)/2 - r1 the swap gives
    rho' = rho/2 + lam and lam' = 3 rho/4 - lam/2.
    """
    return np.array([[0.5, r], [0.75 / r, -0.5]])


def ground_overlap_13(r: float) -> float:
    """<0|P13|0> for the product Gaussian in (x, y): overlap of exp(-|xi|^2/2)
    with exp(-|M xi|^2/2), one factor per Cartesian direction."""
    mm = exchange_13(r)
    return (2.0 / math.sqrt(np.linalg.det(np.eye(2) + mm.T @ mm))) ** 3


def mean_sqrt_gaussian(width: float, mass: float) -> float:
    """<sqrt(p^2 + m^2)> for the momentum density ~ exp(-width^2 p^2)."""
    norm = 4.0 / math.sqrt(math.pi) * width ** 3
    f = lambda p: norm * p * p * math.exp(-(width * p) ** 2) * math.sqrt(p * p + mass * mass)
    v, _ = integrate.quad(f, 0.0, 12.0 / width, limit=200, epsabs=1e-14, epsrel=1e-13)
    return v
