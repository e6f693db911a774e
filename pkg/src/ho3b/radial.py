"""One-dimensional radial machinery.

Potential matrix elements between HO states are expanded on Talmi integrals,

    V_{nl,n'l}(a) = sum_p B(n, n', l, p) I_p(V, a),
    I_p(V, a) = 2/Gamma(p+3/2) int x^(2p+2) exp(-x^2) V(a x) dx,

with the geometric B coefficients evaluated in exact rational arithmetic.
The same expansion gives the semirelativistic kernel
int u_nl(q) u_Nl(q) sqrt(q^2 + mu^2) dq once I_p is known for the square
root, which reduces to a Kummer U function.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import gammaln, k0e, k1e, roots_genlaguerre, roots_legendre

from .hobasis import ho_radial_all

__all__ = [
    "FORM_KINDS",
    "FormFactor",
    "TALMI_CAP",
    "talmi_b",
    "talmi_b_exact",
    "talmi_integral",
    "talmi_integrals",
    "potential_me",
    "potential_block",
    "kummer_u",
    "sqrt_talmi",
    "sqrt_kernel",
    "sqrt_kernel_block",
    "scale_overlap",
    "scale_overlap_block",
]

TALMI_CAP = 20
FORM_KINDS = ("coulomb", "linear", "quadratic", "gaussian", "exponential",
              "yukawa", "constant", "power")


@dataclass(frozen=True)
class FormFactor:
    """Radial form factor V(r) = strength * f(r), r in GeV^-1.

    kinds: coulomb 1/r, linear r, quadratic r^2, gaussian exp(-r^2/range^2),
    exponential exp(-r/range), yukawa exp(-r/range)/r, constant 1,
    power r^eta.
    """

    kind: str
    strength: float = 1.0
    range: float | None = None
    eta: float | None = None

    def __post_init__(self):
        if self.kind not in FORM_KINDS:
            raise ValueError(f"unknown form factor kind {self.kind!r}")
        if self.kind in ("gaussian", "exponential", "yukawa") and not (self.range and self.range > 0):
            raise ValueError(f"{self.kind} form factor needs a positive range")
        if self.kind == "power" and self.eta is None:
            raise ValueError("power form factor needs eta")

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        k = self.kind
        if k == "coulomb":
            f = 1.0 / r
        elif k == "linear":
            f = r
        elif k == "quadratic":
            f = r * r
        elif k == "gaussian":
            f = np.exp(-(r / self.range) ** 2)
        elif k == "exponential":
            f = np.exp(-r / self.range)
        elif k == "yukawa":
            f = np.exp(-r / self.range) / r
        elif k == "constant":
            f = np.ones_like(r)
        else:
            f = r ** self.eta
        return self.strength * f


# ---------------------------------------------------------------------------
# Talmi B coefficients


def _ghalf(m: int) -> Fraction:
    # Gamma(m + 1/2) / sqrt(pi)
    return Fraction(math.factorial(2 * m), 4 ** m * math.factorial(m))


@lru_cache(maxsize=None)
def talmi_b_exact(n: int, n2: int, l: int) -> tuple[tuple[Fraction, ...], Fraction]:
    """Exact B(n, n2, l, p) for p = l..l+n+n2 as (R_p, Q): B = R_p sqrt(Q)."""
    if min(n, n2, l) < 0 or n + n2 + l > TALMI_CAP:
        raise ValueError(f"B({n},{n2},{l},p) outside the coefficient range")

    def coeffs(k_n):
        g = _ghalf(k_n + l + 1)
        return [Fraction((-1) ** k) * g / (_ghalf(l + k + 1) * math.factorial(k_n - k) * math.factorial(k))
                for k in range(k_n + 1)]

    c, c2 = coeffs(n), coeffs(n2)
    rp = []
    for p in range(l, l + n + n2 + 1):
        s = sum((c[k] * c2[p - l - k] for k in range(max(0, p - l - n2), min(n, p - l) + 1)), Fraction(0))
        rp.append(_ghalf(p + 1) * s)
    q = Fraction(math.factorial(n) * math.factorial(n2)) / (_ghalf(n + l + 1) * _ghalf(n2 + l + 1))
    return tuple(rp), q


@lru_cache(maxsize=None)
def _talmi_b_vec(n: int, n2: int, l: int) -> np.ndarray:
    rp, q = talmi_b_exact(n, n2, l)
    out = np.array([math.copysign(math.sqrt(r * r * q), r) if r else 0.0 for r in rp])
    out.setflags(write=False)
    return out


def talmi_b(n: int, n2: int, l: int, p: int) -> float:
    """Geometric coefficient B(n, n', l, p)."""
    if not l <= p <= n + n2 + l:
        raise ValueError(f"p={p} outside [{l}, {n + n2 + l}]")
    return float(_talmi_b_vec(n, n2, l)[p - l])


# ---------------------------------------------------------------------------
# Talmi integrals


@lru_cache(maxsize=None)
def _gl_rule(npts: int, upper: float):
    x, w = roots_legendre(npts)
    return 0.5 * upper * (x + 1.0), 0.5 * upper * w


def _talmi_quadrature(f: Callable, ps: np.ndarray, b: float) -> np.ndarray:
    # int x^(2p+2) e^(-x^2) f(bx) dx; integrand negligible beyond sqrt(p)+9
    upper = math.sqrt(ps.max() + 1.0) + 9.0
    x, w = _gl_rule(400, round(upper, 6))
    fx = f(b * x)
    logx = np.log(x)
    out = np.empty(ps.size)
    for i, p in enumerate(ps):
        kern = np.exp((2 * p + 2) * logx - x * x - gammaln(p + 1.5))
        out[i] = 2.0 * np.dot(w, kern * fx)
    return out


def _gamma_ratios(pmax: int, shift: float) -> np.ndarray:
    """Gamma(p + 3/2 + shift) / Gamma(p + 3/2) for p = 0..pmax by recurrence.

    Building the ratios multiplicatively keeps each value within a few ulp;
    going through log-gamma differences loses ~|lnGamma| ulp, which the
    alternating B coefficients then amplify.
    """
    out = np.empty(pmax + 1)
    out[0] = math.gamma(1.5 + shift) / math.gamma(1.5)
    for p in range(pmax):
        out[p + 1] = out[p] * (p + 1.5 + shift) / (p + 1.5)
    return out


def talmi_integrals(ff: FormFactor, pmax: int, b: float) -> np.ndarray:
    """I_p(V, b) for p = 0..pmax (strength included)."""
    if not b > 0:
        raise ValueError("scale must be positive")
    p = np.arange(pmax + 1, dtype=float)
    k = ff.kind
    if k == "constant":
        out = np.ones_like(p)
    elif k == "coulomb":
        out = _gamma_ratios(pmax, -0.5) / b
    elif k == "linear":
        out = b * _gamma_ratios(pmax, 0.5)
    elif k == "quadratic":
        out = b * b * (p + 1.5)
    elif k == "power":
        if ff.eta <= -3:
            raise ValueError(f"Talmi integral of r^{ff.eta} diverges")
        out = b ** ff.eta * _gamma_ratios(pmax, 0.5 * ff.eta)
    elif k == "gaussian":
        t = 1.0 / (1.0 + b * b / ff.range ** 2)
        out = t ** (p + 1.5)
    else:
        unit = FormFactor(k, 1.0, ff.range, ff.eta)
        out = _talmi_quadrature(unit, p, b)
    return ff.strength * out


def talmi_integral(ff: FormFactor, p: int, b: float) -> float:
    if p < 0:
        raise ValueError("p must be non-negative")
    return float(talmi_integrals(ff, p, b)[p])


def potential_me(ff: FormFactor, n: int, l: int, n2: int, l2: int, a: float) -> float:
    """<n l | V(a r) | n' l'> between normalized HO radial states."""
    if l != l2:
        raise ValueError("only central potentials (l = l') are supported")
    ip = talmi_integrals(ff, n + n2 + l, a)
    return float(np.dot(_talmi_b_vec(n, n2, l), ip[l:]))


def potential_block(ff: FormFactor, nmax: int, l: int, a: float, ip: np.ndarray | None = None) -> np.ndarray:
    """Matrix V_{n n'}(a) for n, n' = 0..nmax at fixed l."""
    if ip is None:
        ip = talmi_integrals(ff, 2 * nmax + l, a)
    out = np.empty((nmax + 1, nmax + 1))
    for n in range(nmax + 1):
        for n2 in range(n, nmax + 1):
            out[n, n2] = out[n2, n] = np.dot(_talmi_b_vec(n, n2, l), ip[l:l + n + n2 + 1])
    return out


# ---------------------------------------------------------------------------
# Kummer U and the square-root kernel


def kummer_u(a: float, b: float, z: float) -> float:
    """Confluent hypergeometric function U(a, b, z) for z > 0.

    Supports the ranges met in the kinetic kernel: the asymptotic series for
    large z, the integral representation (a > 0) elsewhere, and the exact
    special case U(a, a+1, z) = z^-a.
    """
    if not z > 0:
        raise ValueError("kummer_u needs z > 0")
    if b == a + 1:
        return z ** (-a)
    p = a - 1.5
    if b == a + 1.5 and p >= 0 and p == int(p):
        # the kernel family: z^(p+2) U(p+3/2, p+3, z) = I_p(sqrt(q^2 + z))
        return float(sqrt_talmi(int(p), math.sqrt(z))[int(p)] / z ** (p + 2))
    if z > 30.0 + 2 * abs(a) + abs(b):
        s, term = 1.0, 1.0
        for k in range(60):
            term *= -(a + k) * (a - b + 1 + k) / ((k + 1) * z)
            s += term
            if abs(term) < 1e-17 * abs(s):
                break
        return z ** (-a) * s
    if a > 0:
        # U = 1/Gamma(a) int t^(a-1) (1+t)^(b-a-1) e^(-z t) dt, via generalized Laguerre
        x, w = roots_genlaguerre(120, a - 1.0)
        t = x / z
        val = np.dot(w, (1.0 + t) ** (b - a - 1.0))
        return float(math.exp(-a * math.log(z) - math.lgamma(a)) * val)
    raise ValueError(f"kummer_u: unsupported parameters a={a}, b={b}")


def _sqrt_moments_recurrence(pmax: int, z: float) -> np.ndarray:
    # G_p = int t^(p+1/2) (t+z)^(1/2) e^-t dt, started from Bessel closed forms
    wz = 0.5 * z
    gm1 = wz * (k0e(wz) + k1e(wz))
    g0 = wz * k1e(wz)
    out = np.empty(pmax + 1)
    out[0] = g0
    prev, cur = gm1, g0
    for p in range(pmax):
        nxt = (p + 2 - z) * cur + (p + 0.5) * z * prev
        prev, cur = cur, nxt
        out[p + 1] = cur
    return out


@lru_cache(maxsize=None)
def _laguerre_rule(npts: int, alpha: float):
    x, w = roots_genlaguerre(npts, alpha)
    return x, w / w.sum()


def _sqrt_talmi_split(pmax: int, mu: float) -> np.ndarray:
    """J_p = I_p - mu, the Talmi integrals of q^2 / (sqrt(q^2 + mu^2) + mu).

    Separating the constant mu keeps its exact contribution out of the
    alternating B sum.
    """
    z = mu * mu
    if z < 1.0:
        g = _sqrt_moments_recurrence(pmax, z)
        gam = math.gamma(1.5) * np.concatenate(([1.0], np.cumprod(np.arange(pmax) + 1.5)))
        return g / gam - mu
    out = np.empty(pmax + 1)
    for p in range(pmax + 1):
        series = _sqrt_asymptotic(p, z)
        if series is not None:
            out[p] = series
        else:
            x, w = _laguerre_rule(64, p + 0.5)
            out[p] = np.dot(w, x / (np.sqrt(x + z) + mu))
    return out


def sqrt_talmi(pmax: int, mu: float) -> np.ndarray:
    """I_p for V(q) = sqrt(q^2 + mu^2) at unit scale, p = 0..pmax.

    I_p = mu^(2p+4) U(p+3/2, p+3, mu^2) = <sqrt(t + mu^2)> under the weight
    t^(p+1/2) e^-t.  Small mu^2 uses the Bessel-started recurrence; larger
    mu^2 uses Gauss-Laguerre integration, normalized by the weight sum so no
    Gamma function enters; very large mu^2 uses the asymptotic series.
    """
    if mu < 0:
        raise ValueError("mu must be non-negative")
    if mu == 0.0:
        return _gamma_ratios(pmax, 0.5)
    return _sqrt_talmi_split(pmax, mu) + mu


def _sqrt_asymptotic(p: int, z: float) -> float | None:
    # I_p - sqrt(z) = sqrt(z) sum_{k>=1} (-1/2)_k (p+3/2)_k / k! (-1/z)^k
    if z < 30.0 or z < 8.0 * (p + 2) ** 2:
        return None
    s, term = 0.0, 1.0
    for k in range(40):
        term *= -(k - 0.5) * (p + 1.5 + k) / ((k + 1) * z)
        s += term
        if abs(term) < 1e-17 * abs(s):
            return math.sqrt(z) * s
    return None


@lru_cache(maxsize=64)
def _momentum_rule(nmax: int, l: int):
    x, w = _gl_rule(320, round(math.sqrt(2 * nmax + l + 1.5) + 9.0, 6))
    u = ho_radial_all(nmax, l, x)
    return x, w, u


def _sqrt_block_quadrature(nmax: int, l: int, mu: float) -> np.ndarray:
    x, w, u = _momentum_rule(nmax, l)
    f = w * np.sqrt(x * x + mu * mu)
    return (u * f) @ u.T


def sqrt_kernel_block(nmax: int, l: int, mu: float) -> np.ndarray:
    """Kernel matrix int u_nl u_Nl sqrt(q^2 + mu^2) dq for n, N = 0..nmax.

    The Talmi expansion is cross-checked against direct Gauss quadrature;
    if they disagree by more than 1e-9 relative the quadrature is used.
    """
    if mu < 0:
        raise ValueError("mu must be non-negative")
    if mu == 0.0:
        ip, shift = sqrt_talmi(2 * nmax + l, mu), 0.0
    else:
        ip, shift = _sqrt_talmi_split(2 * nmax + l, mu), mu
    kt = np.empty((nmax + 1, nmax + 1))
    for n in range(nmax + 1):
        for n2 in range(n, nmax + 1):
            kt[n, n2] = kt[n2, n] = np.dot(_talmi_b_vec(n, n2, l), ip[l:l + n + n2 + 1])
    kt += shift * np.eye(nmax + 1)
    kq = _sqrt_block_quadrature(nmax, l, mu)
    scale = max(np.abs(kq).max(), 1e-300)
    if not np.all(np.isfinite(kt)) or np.abs(kt - kq).max() > 1e-9 * scale:
        return kq
    return kt


def sqrt_kernel(n: int, l: int, N: int, L: int, mu: float) -> float:
    if l != L:
        raise ValueError("the kernel couples equal orbital momenta only")
    if n + N + l > TALMI_CAP:
        raise ValueError("quantum numbers beyond the coefficient range")
    return float(sqrt_kernel_block(max(n, N), l, mu)[n, N])


# ---------------------------------------------------------------------------
# HO scale overlap


def scale_overlap_block(nmax: int, l: int, a: float) -> np.ndarray:
    """F[n', n] = a^(3/2) int R_n'l(x) R_nl(a x) x^2 dx.

    This is the unitary form of the overlap (scaling is unitary on L2(R^3)),
    so F(a) F(c) = F(ac) and F(1/a) = F(a)^T hold for the untruncated
    matrices.  The integrand is a polynomial times a Gaussian, integrated
    with a fixed Gauss-Legendre rule wide enough for the slower factor.
    """
    if not a > 0:
        raise ValueError("scale factor must be positive")
    reach = math.sqrt(2 * nmax + l + 1.5) + 9.0
    upper = reach / min(1.0, a)
    x, w = _gl_rule(400, round(upper, 6))
    u1 = ho_radial_all(nmax, l, x)
    u2 = ho_radial_all(nmax, l, a * x)
    return math.sqrt(a) * (u1 * w) @ u2.T


def scale_overlap(n2: int, n: int, l: int, a: float) -> float:
    return float(scale_overlap_block(max(n, n2), l, a)[n2, n])
