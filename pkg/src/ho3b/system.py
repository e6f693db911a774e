"""Particle systems, Jacobi geometry and the scalar factors derived from it.

Coordinates follow the [1(23)] coupling:

    b_x x = r2 - r3,    b_y y = (w2 r2 + w3 r3)/w23 - r1

with w_i = m_i/m for an arbitrary reference mass m.  Lengths are in GeV^-1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "ParticleSystem",
    "SizeParams",
    "PairGeometry",
    "P13Geometry",
    "make_system",
    "constrained_sizes",
    "free_sizes",
    "pair_geometry_13",
    "pair_geometry_12",
    "p13_geometry",
]

_SPECIAL_R2 = 0.75  # (b_y/b_x)^2 at which P13 preserves the quanta


@dataclass(frozen=True)
class ParticleSystem:
    """Three particles already permuted into the [1(23)] order.

    ``labels`` and ``masses`` are in internal order; ``ordering`` records
    which input particle went to each slot (0-based).
    """

    masses: tuple[float, float, float]
    m_ref: float = 1.0
    labels: tuple[str, str, str] = ("1", "2", "3")
    ordering: tuple[int, int, int] = (0, 1, 2)
    omegas: tuple[float, float, float] = field(init=False)
    w23: float = field(init=False)
    w: float = field(init=False)

    def __post_init__(self):
        if self.m_ref <= 0 or any(not (m > 0) for m in self.masses):
            raise ValueError("masses and reference mass must be strictly positive")
        om = tuple(m / self.m_ref for m in self.masses)
        object.__setattr__(self, "omegas", om)
        w23 = om[1] + om[2]
        object.__setattr__(self, "w23", w23)
        object.__setattr__(self, "w", w23 + om[0])

    @property
    def total_mass(self) -> float:
        return sum(self.masses)

    @property
    def identical_23(self) -> bool:
        return self.labels[1] == self.labels[2]

    @property
    def identical_all(self) -> bool:
        return self.labels[0] == self.labels[1] == self.labels[2]


@dataclass(frozen=True)
class SizeParams:
    b_x: float
    b_y: float
    constrained: bool = False
    b: float | None = None

    def __post_init__(self):
        if not (self.b_x > 0 and self.b_y > 0):
            raise ValueError("size parameters must be strictly positive")


@dataclass(frozen=True)
class PairGeometry:
    """Scale factors and rotation angle for pair (1,3) or (1,2).

    The pair distance is r_1k = alpha * (x sin(beta) -/+ y cos(beta)) in
    units where x, y are the dimensionless Jacobi vectors.
    """

    alpha: float
    eta: float
    beta: float
    cos_beta: float
    sin_beta: float
    pair: tuple[int, int]

    def phase(self, li: int, lj: int) -> int:
        # (1,3) picks up (-1)^(li+lj) from x -> -x; (1,2) needs none
        if self.pair == (1, 3):
            return -1 if (li + lj) % 2 else 1
        return 1


@dataclass(frozen=True)
class P13Geometry:
    """Geometry of the (1,3) transposition for a given b_y/b_x ratio.

    ``alpha_s``, ``rho`` and ``phi`` are the usual closed-form quantities;
    at the special ratio r = sqrt(3)/2 the limit values alpha_s = 1 and
    phi = pi/6 are returned.  ``theta``, ``scale`` and ``sign`` give the
    factorization actually used for the matrix elements: with G the rotation
    by theta, G^T M G = sign * [[0, 1/sqrt(scale)], [sqrt(scale), 0]], where
    M is the action of P13 on (x, y).  ``scale`` equals alpha_s below the
    special ratio and 1/alpha_s above it.
    """

    r: float
    alpha_s: float
    rho: float
    phi: float
    theta: float
    scale: float
    sign: int
    special: bool

    @property
    def parity_rule(self) -> str:
        return "lambda_i+l_i+L" if self.r < math.sqrt(0.75) else "lambda_i+l_j+L"

    def exchange_matrix(self) -> np.ndarray:
        """2x2 action of P13 on the dimensionless (x, y) pair."""
        r = self.r
        return np.array([[0.5, r], [0.75 / r, -0.5]])

    def frame(self) -> np.ndarray:
        """Orthogonal R (rotation, or rotation times reflection) with
        (x', y') = R (u, v) and (x, y) = R (v/sqrt(alpha), sqrt(alpha) u)."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        return np.array([[c, s], [-s, c]]) @ np.diag([1.0, float(self.sign)])


def make_system(
    masses: Sequence[float],
    m_ref: float = 1.0,
    ordering: Sequence[int] = (0, 1, 2),
    labels: Sequence[str] | None = None,
) -> ParticleSystem:
    """Build a system; ``ordering[k]`` is the input index placed in slot k+1."""
    if sorted(ordering) != [0, 1, 2]:
        raise ValueError(f"ordering must be a permutation of (0, 1, 2), got {ordering!r}")
    if len(masses) != 3:
        raise ValueError("exactly three masses are required")
    labels = list(labels) if labels is not None else ["1", "2", "3"]
    return ParticleSystem(
        masses=tuple(float(masses[k]) for k in ordering),
        m_ref=float(m_ref),
        labels=tuple(labels[k] for k in ordering),
        ordering=tuple(ordering),
    )


def constrained_sizes(sys: ParticleSystem, b: float) -> SizeParams:
    """Sizes tied to a single b so that all Jacobi sets share one basis."""
    if not b > 0:
        raise ValueError("b must be strictly positive")
    w1, w2, w3 = sys.omegas
    bx = b * math.sqrt(sys.w23 / (2.0 * w2 * w3))
    by = b * math.sqrt(sys.w / (2.0 * w1 * sys.w23))
    return SizeParams(bx, by, True, b)


def free_sizes(b_x: float, b_y: float) -> SizeParams:
    return SizeParams(float(b_x), float(b_y), False, None)


def _pair_geometry(sys: ParticleSystem, sizes: SizeParams, wk: float, pair) -> PairGeometry:
    bx, by, w23 = sizes.b_x, sizes.b_y, sys.w23
    alpha = math.hypot(bx * wk, by * w23) / w23
    eta = bx * by / alpha
    cb = by / alpha
    sb = bx * wk / (alpha * w23)
    return PairGeometry(alpha, eta, math.atan2(sb, cb), cb, sb, pair)


def pair_geometry_13(sys: ParticleSystem, sizes: SizeParams) -> PairGeometry:
    return _pair_geometry(sys, sizes, sys.omegas[1], (1, 3))


def pair_geometry_12(sys: ParticleSystem, sizes: SizeParams) -> PairGeometry:
    return _pair_geometry(sys, sizes, sys.omegas[2], (1, 2))


def p13_geometry(sizes: SizeParams) -> P13Geometry:
    r = sizes.b_y / sizes.b_x
    r2 = r * r
    theta = 0.5 * math.atan2(4.0 * r, 4.0 * r2 + 3.0)
    if abs(4.0 * r2 - 3.0) < 1e-8:
        return P13Geometry(r, 1.0, 0.0, math.pi / 6, math.pi / 12, 1.0, 1, True)
    rho = math.sqrt((4 * r2 - 3) ** 2 * (16 * r2 * r2 + 40 * r2 + 9))
    alpha = (16 * r2 * r2 + 8 * r2 + 9 + rho) / (32 * r2)
    cphi = math.sqrt(max(0.0, (rho - 16 * r2 * r2 + 9) / (2 * rho)))
    sphi = math.sqrt(max(0.0, (rho + 16 * r2 * r2 - 9) / (2 * rho)))
    phi = math.atan2(sphi, cphi)
    # read the scale and sign off the rotated exchange matrix
    c, s = math.cos(theta), math.sin(theta)
    g = np.array([[c, s], [-s, c]])
    k = g.T @ np.array([[0.5, r], [0.75 / r, -0.5]]) @ g
    sign = 1 if k[1, 0] > 0 else -1
    scale = (sign * k[1, 0]) ** 2
    return P13Geometry(r, alpha, rho, phi, theta, scale, sign, False)
