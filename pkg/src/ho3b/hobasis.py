"""Harmonic-oscillator radial functions and the coupled two-coordinate basis."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from scipy.special import gammaln

__all__ = [
    "ho_radial",
    "ho_radial_all",
    "BasisState",
    "Basis",
    "enumerate_basis",
    "spatial_states",
]


def ho_radial_all(nmax: int, l: int, x) -> np.ndarray:
    """u_nl(x) for n = 0..nmax, shape (nmax+1, *x.shape).

    u_nl(x) = N x^(l+1) exp(-x^2/2) L_n^(l+1/2)(x^2) with int u^2 dx = 1.
    The Laguerre polynomials are built by the upward three-term recurrence
    and the normalization is carried in log form so large l does not
    overflow.
    """
    x = np.asarray(x, dtype=float)
    t = x * x
    a = l + 0.5
    out = np.empty((nmax + 1,) + x.shape)
    with np.errstate(divide="ignore"):
        logx = np.log(x)
    base = np.where(x > 0, np.exp((l + 1) * logx - 0.5 * t), 0.0)
    lm1 = np.zeros_like(t)
    lk = np.ones_like(t)
    for n in range(nmax + 1):
        lognorm = 0.5 * (math.log(2.0) + gammaln(n + 1) - gammaln(n + l + 1.5))
        out[n] = math.exp(lognorm) * base * lk
        lm1, lk = lk, ((2 * n + 1 + a - t) * lk - (n + a) * lm1) / (n + 1)
    return out


def ho_radial(n: int, l: int, x):
    """Normalized reduced radial function u_nl(x) (dimensionless length)."""
    if n < 0 or l < 0:
        raise ValueError("n and l must be non-negative")
    out = ho_radial_all(n, l, x)[n]
    return float(out) if np.ndim(out) == 0 else out


class BasisState(NamedTuple):
    n: int
    l: int
    nu: int
    lam: int
    L: int
    channel: int = 0

    @property
    def quanta(self) -> int:
        return 2 * self.n + self.l + 2 * self.nu + self.lam


def spatial_states(nq: int, L: int, parity: int) -> list[tuple[int, int, int, int]]:
    """All (n, l, nu, lam) with quanta <= nq coupling to L with given parity.

    Ordered by quanta, then l, lam, n, nu.
    """
    out = []
    for q in range(nq + 1):
        if (-1) ** q != parity:
            continue
        for l in range(q + 1):
            for lam in range(q - l + 1):
                if (q - l - lam) % 2 or not abs(l - lam) <= L <= l + lam:
                    continue
                for n in range((q - l - lam) // 2 + 1):
                    out.append((n, l, (q - l - lam) // 2 - n, lam))
    return out


@dataclass(frozen=True)
class Basis:
    """Ordered coupled basis |n l, nu lam; L> x channel.

    ``spatial`` lists the distinct space parts; each state carries the index
    of its channel, and ``space_index[k]`` is the position of state k's space
    part in ``spatial``.  ``l_signs[c]`` is the required (-1)^l for channel c
    (None when pair (2,3) carries no constraint).
    """

    states: tuple[BasisState, ...]
    nq: int
    L: int
    parity: int
    n_channels: int
    l_signs: tuple[int | None, ...]
    spatial: tuple[tuple[int, int, int, int], ...]
    space_index: np.ndarray

    def __len__(self) -> int:
        return len(self.states)

    @property
    def dim(self) -> int:
        return len(self.states)

    @property
    def symmetric_pair(self) -> bool:
        return any(s is not None for s in self.l_signs)

    def channel_index(self) -> np.ndarray:
        return np.array([s.channel for s in self.states], dtype=int)

    def to_csv(self, fh=None) -> str | None:
        """Write the listing (index, n, l, nu, lam, L, channel, Q)."""
        buf = io.StringIO() if fh is None else fh
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "n", "l", "nu", "lam", "L", "channel", "Q"])
        for i, s in enumerate(self.states):
            w.writerow([i, s.n, s.l, s.nu, s.lam, s.L, s.channel, s.quanta])
        return buf.getvalue() if fh is None else None


def enumerate_basis(
    nq: int,
    L: int,
    parity: int = 1,
    n_channels: int = 1,
    l_signs: Sequence[int | None] | None = None,
) -> Basis:
    """Enumerate the truncated basis.

    ``l_signs`` gives, per channel, the sign that (-1)^l must take for the
    state to have the required (2,3) exchange symmetry, or None for no
    constraint.  See :func:`ho3b.hamiltonian.pair_l_signs` for how it is
    derived from the internal channels and particle statistics.
    """
    if nq < 0 or L < 0:
        raise ValueError("cutoff and L must be non-negative")
    if parity not in (1, -1):
        raise ValueError("parity must be +1 or -1")
    if l_signs is None:
        l_signs = [None] * n_channels
    if len(l_signs) != n_channels:
        raise ValueError("l_signs must have one entry per channel")
    spatial = spatial_states(nq, L, parity)
    states, sidx, used = [], [], []
    pos: dict[tuple, int] = {}
    for sp in spatial:
        for c in range(n_channels):
            want = l_signs[c]
            if want is not None and (-1) ** sp[1] != want:
                continue
            if sp not in pos:
                pos[sp] = len(used)
                used.append(sp)
            states.append(BasisState(sp[0], sp[1], sp[2], sp[3], L, c))
            sidx.append(pos[sp])
    return Basis(
        states=tuple(states),
        nq=nq,
        L=L,
        parity=parity,
        n_channels=n_channels,
        l_signs=tuple(l_signs),
        spatial=tuple(used),
        space_index=np.array(sidx, dtype=int),
    )
