"""Angular-momentum algebra and internal (spin/isospin) channel machinery.

Wigner symbols are evaluated with the Racah single-sum formulas in exact
integer/rational arithmetic and only converted to float at the end, which
keeps them accurate for the j ~ 20 values met at 16 oscillator quanta.
Angular momenta may be given as ints, floats or ``Fraction`` (half-integers
allowed).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

__all__ = [
    "clebsch_gordan",
    "wigner_3j",
    "wigner_6j",
    "wigner_9j",
    "InternalChannel",
    "enumerate_internal_channels",
    "pair_exchange_phase",
    "pair_spin_spin_elements",
    "pair_isospin_elements",
    "internal_p13_elements",
]


def _twice(j) -> int:
    """Return 2j as an int, rejecting anything that is not a half-integer."""
    t = Fraction(j) * 2
    if t.denominator != 1:
        raise ValueError(f"{j!r} is not an integer or half-integer")
    return int(t)


@lru_cache(maxsize=None)
def _fact(n: int) -> int:
    return math.factorial(n)


def _delta2(a: int, b: int, c: int) -> Fraction | None:
    """Squared triangle coefficient for doubled arguments, None if not a triad."""
    if (a + b + c) % 2 or a > b + c or b > a + c or c > a + b:
        return None
    return Fraction(
        _fact((a + b - c) // 2) * _fact((a - b + c) // 2) * _fact((-a + b + c) // 2),
        _fact((a + b + c) // 2 + 1),
    )


def _signed_sqrt(s: Fraction, p: Fraction) -> float:
    # s * sqrt(p), correctly rounded up to the final sqrt
    if s == 0:
        return 0.0
    v = math.sqrt(s * s * p)
    return v if s > 0 else -v


@lru_cache(maxsize=None)
def _cg2(j1: int, m1: int, j2: int, m2: int, j: int, m: int) -> tuple[Fraction, Fraction]:
    """CG coefficient as (S, P) with value S*sqrt(P); doubled arguments."""
    zero = (Fraction(0), Fraction(1))
    if m1 + m2 != m or abs(m1) > j1 or abs(m2) > j2 or abs(m) > j:
        return zero
    if (j1 + m1) % 2 or (j2 + m2) % 2 or (j + m) % 2:
        return zero
    d2 = _delta2(j1, j2, j)
    if d2 is None:
        return zero
    p = (j + 1) * d2 * Fraction(
        _fact((j1 + m1) // 2) * _fact((j1 - m1) // 2) * _fact((j2 + m2) // 2)
        * _fact((j2 - m2) // 2) * _fact((j + m) // 2) * _fact((j - m) // 2)
    )
    kmin = max(0, (j2 - j - m1) // 2, (j1 + m2 - j) // 2)
    kmax = min((j1 + j2 - j) // 2, (j1 - m1) // 2, (j2 + m2) // 2)
    s = Fraction(0)
    for k in range(kmin, kmax + 1):
        den = (
            _fact(k) * _fact((j1 + j2 - j) // 2 - k) * _fact((j1 - m1) // 2 - k)
            * _fact((j2 + m2) // 2 - k) * _fact((j - j2 + m1) // 2 + k)
            * _fact((j - j1 - m2) // 2 + k)
        )
        s += Fraction((-1) ** k, den)
    return s, p


def clebsch_gordan(j1, m1, j2, m2, j, m) -> float:
    """<j1 m1 j2 m2 | j m> in the Condon-Shortley convention."""
    s, p = _cg2(_twice(j1), _twice(m1), _twice(j2), _twice(m2), _twice(j), _twice(m))
    return _signed_sqrt(s, p)


def wigner_3j(j1, j2, j3, m1, m2, m3) -> float:
    t1, t2, t3 = _twice(j1), _twice(j2), _twice(j3)
    s, p = _cg2(t1, _twice(m1), t2, _twice(m2), t3, -_twice(m3))
    if s == 0:
        return 0.0
    phase = -1 if ((t1 - t2 + _twice(m3)) // 2) % 2 else 1
    return phase * _signed_sqrt(s, p / (t3 + 1))


@lru_cache(maxsize=None)
def _sixj2(a: int, b: int, c: int, d: int, e: int, f: int) -> tuple[Fraction, Fraction]:
    """{a b c; d e f} as (S, P) with value S*sqrt(P); doubled arguments."""
    tri = [_delta2(a, b, c), _delta2(a, e, f), _delta2(d, b, f), _delta2(d, e, c)]
    if any(t is None for t in tri):
        return Fraction(0), Fraction(1)
    p = tri[0] * tri[1] * tri[2] * tri[3]
    a1, a2, a3, a4 = (a + b + c) // 2, (a + e + f) // 2, (d + b + f) // 2, (d + e + c) // 2
    b1, b2, b3 = (a + b + d + e) // 2, (a + c + d + f) // 2, (b + c + e + f) // 2
    s = Fraction(0)
    for t in range(max(a1, a2, a3, a4), min(b1, b2, b3) + 1):
        den = (
            _fact(t - a1) * _fact(t - a2) * _fact(t - a3) * _fact(t - a4)
            * _fact(b1 - t) * _fact(b2 - t) * _fact(b3 - t)
        )
        s += Fraction((-1) ** t * _fact(t + 1), den)
    return s, p


def wigner_6j(a, b, c, d, e, f) -> float:
    """Wigner 6j symbol {a b c; d e f}; exact zero when a triad fails."""
    s, p = _sixj2(*(_twice(x) for x in (a, b, c, d, e, f)))
    return _signed_sqrt(s, p)


@lru_cache(maxsize=None)
def _ninej2(a, b, c, d, e, f, g, h, i) -> float:
    # Sum over x of three 6j symbols.  The triangle factors containing x occur
    # squared, so the whole sum is rational times one common square root.
    common = [_delta2(a, b, c), _delta2(d, e, f), _delta2(g, h, i),
              _delta2(a, d, g), _delta2(b, e, h), _delta2(c, f, i)]
    if any(t is None for t in common):
        return 0.0
    lo = max(abs(a - i), abs(d - h), abs(b - f))
    hi = min(a + i, d + h, b + f)
    total = Fraction(0)
    for x in range(lo, hi + 1, 2):
        s1, p1 = _sixj2(a, b, c, f, i, x)
        s2, p2 = _sixj2(d, e, f, b, x, h)
        s3, p3 = _sixj2(g, h, i, x, a, d)
        if s1 == 0 or s2 == 0 or s3 == 0:
            continue
        # p1*p2*p3 = common-part * (x-dependent part)^2
        xdep = _delta2(a, i, x) * _delta2(f, b, x) * _delta2(d, x, h)
        total += (-1) ** x * (x + 1) * s1 * s2 * s3 * xdep
    cprod = Fraction(1)
    for t in common:
        cprod *= t
    return _signed_sqrt(total, cprod)


def wigner_9j(a, b, c, d, e, f, g, h, i) -> float:
    """Wigner 9j symbol with rows (a b c), (d e f), (g h i)."""
    return _ninej2(*(_twice(x) for x in (a, b, c, d, e, f, g, h, i)))


# ---------------------------------------------------------------------------
# internal channels


@dataclass(frozen=True, order=True)
class InternalChannel:
    """One coupled internal state [a1 (a2 a3)_sigma]_total.

    ``spin_sigma`` and ``iso_sigma`` are the intermediate couplings of the
    (2,3) pair in spin and isospin space; ``spin`` and ``isospin`` are the
    totals.  All values are stored as ``Fraction``.
    """

    spin_sigma: Fraction
    iso_sigma: Fraction
    spin: Fraction
    isospin: Fraction


def _couplings(j1, j2, j3, total) -> list[Fraction]:
    t1, t2, t3, tt = (_twice(x) for x in (j1, j2, j3, total))
    out = []
    for s in range(abs(t2 - t3), t2 + t3 + 1, 2):
        if _delta2(t1, s, tt) is not None:
            out.append(Fraction(s, 2))
    return out


def enumerate_internal_channels(
    spins: Sequence, isospins: Sequence, spin, isospin
) -> list[InternalChannel]:
    """All [a1 (a2 a3)_sigma] couplings reaching the requested totals.

    ``spins`` and ``isospins`` are the per-particle magnitudes in the
    [1(23)] ordering.  Impossible totals give an empty list.
    """
    out = []
    for ss in _couplings(*spins, spin):
        for si in _couplings(*isospins, isospin):
            out.append(InternalChannel(ss, si, Fraction(spin), Fraction(isospin)))
    return out


def pair_exchange_phase(channel: InternalChannel, spins: Sequence, isospins: Sequence) -> int:
    """Eigenvalue of the (2,3) exchange on the internal state."""
    # (-1)^(j2 + j3 - sigma) in each space; the doubled sum is even
    e = _twice(spins[1]) + _twice(spins[2]) - _twice(channel.spin_sigma)
    e += _twice(isospins[1]) + _twice(isospins[2]) - _twice(channel.iso_sigma)
    return -1 if (e // 2) % 2 else 1


def _reduced_s(j) -> float:
    j = float(j)
    return math.sqrt(j * (j + 1) * (2 * j + 1))


def _vector_dot(pair, js, sig_p, sig, total) -> float:
    """<j1 (j2 j3)sig'; J | j_k . j_l | j1 (j2 j3)sig; J> for one space."""
    j1, j2, j3 = js
    k, l = sorted(pair)
    if sig_p != sig and (k, l) == (2, 3):
        return 0.0
    if (k, l) == (2, 3):
        s = float(sig)
        return 0.5 * (s * (s + 1) - float(j2) * (float(j2) + 1) - float(j3) * (float(j3) + 1))
    # particle 1 against particle 2 or 3 inside the (23) coupling
    t = _twice(j1) + _twice(sig_p) + _twice(total)
    ph = -1 if (t // 2) % 2 else 1
    six = wigner_6j(total, sig_p, j1, 1, j1, sig)
    if six == 0.0:
        return 0.0
    root = math.sqrt((2 * sig + 1) * (2 * sig_p + 1))
    if l == 2:
        t2 = _twice(j2) + _twice(j3) + _twice(sig) + 2
        red = (-1 if (t2 // 2) % 2 else 1) * root * wigner_6j(j2, sig_p, j3, sig, j2, 1) * _reduced_s(j2)
    else:
        t2 = _twice(j2) + _twice(j3) + _twice(sig_p) + 2
        red = (-1 if (t2 // 2) % 2 else 1) * root * wigner_6j(j3, sig_p, j2, sig, j3, 1) * _reduced_s(j3)
    return ph * six * _reduced_s(j1) * red


def pair_spin_spin_elements(channels: Sequence[InternalChannel], pair, spins: Sequence) -> np.ndarray:
    """Matrix of s_k . s_l over ``channels`` (diagonal in the isospin labels)."""
    n = len(channels)
    out = np.zeros((n, n))
    for i, ci in enumerate(channels):
        for j, cj in enumerate(channels):
            if ci.iso_sigma != cj.iso_sigma or ci.spin != cj.spin:
                continue
            out[i, j] = _vector_dot(pair, spins, ci.spin_sigma, cj.spin_sigma, ci.spin)
    return out


def pair_isospin_elements(channels: Sequence[InternalChannel], pair, isospins: Sequence) -> np.ndarray:
    """Matrix of t_k . t_l over ``channels`` (diagonal in the spin labels)."""
    n = len(channels)
    out = np.zeros((n, n))
    for i, ci in enumerate(channels):
        for j, cj in enumerate(channels):
            if ci.spin_sigma != cj.spin_sigma or ci.isospin != cj.isospin:
                continue
            out[i, j] = _vector_dot(pair, isospins, ci.iso_sigma, cj.iso_sigma, ci.isospin)
    return out


def internal_p13_elements(channels: Sequence[InternalChannel], spins: Sequence, isospins: Sequence) -> np.ndarray:
    """Transposition of particles 1 and 3 acting on spin x isospin channels.

    Only spin-1/2 constituents are supported; isospins must be all 1/2 or
    all 0.  For a pair of spin-1/2 objects the exchange operator is
    (1 + 4 s_1.s_3)/2, and the spin and isospin factors multiply.
    """
    if any(Fraction(s) != Fraction(1, 2) for s in spins):
        raise ValueError("internal P13 is implemented for spin-1/2 constituents only")
    isos = {Fraction(t) for t in isospins}
    if isos not in ({Fraction(0)}, {Fraction(1, 2)}):
        raise ValueError("internal P13 needs isospins all 1/2 or all 0")
    n = len(channels)
    ss = pair_spin_spin_elements(channels, (1, 3), spins)
    ps = 0.5 * np.eye(n) + 2.0 * ss
    if isos == {Fraction(0)}:
        return ps
    tt = pair_isospin_elements(channels, (1, 3), isospins)
    pt = 0.5 * np.eye(n) + 2.0 * tt
    # spin and isospin operators act on separate labels and commute; their
    # product on the channel basis is the ordinary matrix product.
    return ps @ pt
