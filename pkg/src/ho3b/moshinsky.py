"""Generalized Brody-Moshinsky coefficients for an arbitrary rotation angle.

Convention:

    [phi_{n1 l1}(r cos b + R sin b) phi_{n2 l2}(-r sin b + R cos b)]_lam
        = sum <n l N L; lam | n1 l1 n2 l2; lam>_b [phi_{nl}(r) phi_{NL}(R)]_lam

For fixed (lam, Q) with Q the total number of quanta, the coefficients form
an orthogonal matrix B(b) = exp(b G), where G = a_R^+ . a_r - a_r^+ . a_R is
the angle-independent generator of rotations in the (r, R) plane.  G is built
from single-particle ladder matrix elements recoupled with one 6j symbol; its
eigenvalues are i*k with integer k, so B(b) = V exp(-i k b) V^H.
"""
from __future__ import annotations

import math
import os
import struct
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable

import numpy as np

from .angmom import wigner_6j

__all__ = [
    "TABLE1",
    "BMC_CAP",
    "CapacityError",
    "OutOfCutoffError",
    "CacheFormatError",
    "BmcTable",
    "block_states",
    "block_matrix",
    "build_bmc_table",
    "bmc",
    "census",
    "save_table",
    "load_table",
    "BmcCache",
]

# number of stored coefficients for cutoffs 0..16
TABLE1 = (1, 5, 24, 80, 240, 616, 1456, 3144, 6389, 12225, 22352, 39136,
          66168, 108264, 172320, 267312, 405537)
BMC_CAP = 16
FORMAT_VERSION = 1
_MAGIC = b"HO3BBMC\x00"


class CapacityError(ValueError):
    pass


class OutOfCutoffError(ValueError):
    pass


class CacheFormatError(ValueError):
    pass


@lru_cache(maxsize=None)
def block_states(lam: int, q: int) -> tuple[tuple[int, int, int, int], ...]:
    """States (n1, l1, n2, l2) with 2n1+l1+2n2+l2 = q coupling to lam.

    Ordered by l1, then l2, then n1.
    """
    out = []
    for l1 in range(q + 1):
        for l2 in range(q - l1 + 1):
            if (q - l1 - l2) % 2 or not abs(l1 - l2) <= lam <= l1 + l2:
                continue
            k = (q - l1 - l2) // 2
            for n1 in range(k + 1):
                out.append((n1, l1, k - n1, l2))
    return tuple(out)


def census(nq: int) -> int:
    """Number of coefficients stored for cutoff nq (pure counting)."""
    total = 0
    for q in range(nq + 1):
        for lam in range(q + 1):
            total += len(block_states(lam, q)) ** 2
    return total


# Single-particle ladder operators, written as T_mu |l m> = sum t <l m 1 mu|l' m+mu> |l'>
def _raise(n: int, l: int):
    yield n, l + 1, math.sqrt(2 * (n + l + 1.5) * (l + 1) / (2 * l + 3))
    if l > 0:
        yield n + 1, l - 1, math.sqrt(2 * (n + 1) * l / (2 * l - 1))


def _lower(n: int, l: int):
    if n > 0:
        yield n - 1, l + 1, -math.sqrt(2 * n * (l + 1) / (2 * l + 3))
    if l > 0:
        yield n, l - 1, -math.sqrt(2 * (n + l + 0.5) * l / (2 * l - 1))


def _recouple(l1: int, l2: int, k1: int, k2: int, lam: int) -> float:
    # scalar product of two rank-1 operators on a coupled pair
    ph = -1.0 if (l1 + k2 + lam) % 2 else 1.0
    return ph * wigner_6j(lam, k2, k1, 1, l1, l2) * math.sqrt((2 * k1 + 1) * (2 * k2 + 1))


@lru_cache(maxsize=None)
def _generator(lam: int, q: int) -> np.ndarray:
    st = block_states(lam, q)
    idx = {s: i for i, s in enumerate(st)}
    g = np.zeros((len(st), len(st)))
    for j, (n1, l1, n2, l2) in enumerate(st):
        for m1, k1, t1 in _lower(n1, l1):
            for m2, k2, t2 in _raise(n2, l2):
                i = idx.get((m1, k1, m2, k2))
                if i is not None:
                    g[i, j] += t1 * t2 * _recouple(l1, l2, k1, k2, lam)
        for m1, k1, t1 in _raise(n1, l1):
            for m2, k2, t2 in _lower(n2, l2):
                i = idx.get((m1, k1, m2, k2))
                if i is not None:
                    g[i, j] -= t1 * t2 * _recouple(l1, l2, k1, k2, lam)
    g.setflags(write=False)
    return g


@lru_cache(maxsize=None)
def _spectral(lam: int, q: int) -> tuple[np.ndarray, np.ndarray]:
    g = _generator(lam, q)
    w, v = np.linalg.eigh(1j * g)
    k = np.rint(w)
    if k.size and np.abs(w - k).max() > 1e-8:
        raise ArithmeticError(f"rotation generator spectrum not integral for block {(lam, q)}")
    v.setflags(write=False)
    return k, v


def block_matrix(beta: float, lam: int, q: int) -> np.ndarray:
    """Orthogonal matrix M[c, j] = <c | j>_beta for block (lam, q).

    Rows are the expanded states c = (n, l, N, L), columns the rotated-argument
    states j = (n1, l1, n2, l2), both in :func:`block_states` order.
    """
    if q == 0:
        return np.ones((1, 1)) if lam == 0 else np.zeros((0, 0))
    k, v = _spectral(lam, q)
    # exp(beta G) with G = -i V diag(k) V^H
    return ((v * np.exp(-1j * k * beta)) @ v.conj().T).real


@dataclass(frozen=True)
class BmcTable:
    """All coefficients for one angle up to a quanta cutoff.

    ``values`` holds the blocks in (Q, lam) order; inside a block the matrix
    is stored column-major, so the column of an initial state (n1,l1,n2,l2)
    is one contiguous run over the expanded states (n, l, N, L).
    ``offsets[(lam, Q, n1, l1, n2, l2)]`` gives the start of that run.
    """

    beta: float
    nq: int
    values: np.ndarray
    blocks: dict = field(repr=False)
    offsets: dict = field(repr=False)
    complete: bool = True

    @property
    def count(self) -> int:
        return int(self.values.size)

    def block(self, lam: int, q: int) -> np.ndarray:
        """Read-only view M[c, j] of block (lam, q)."""
        if q > self.nq:
            raise OutOfCutoffError(f"quanta {q} above table cutoff {self.nq}")
        try:
            start, d = self.blocks[(lam, q)]
        except KeyError:
            raise OutOfCutoffError(f"block (lam={lam}, Q={q}) not in table") from None
        return self.values[start:start + d * d].reshape((d, d), order="F")

    def column(self, lam: int, n1: int, l1: int, n2: int, l2: int) -> np.ndarray:
        q = 2 * n1 + l1 + 2 * n2 + l2
        start = self.offsets[(lam, q, n1, l1, n2, l2)]
        return self.values[start:start + len(block_states(lam, q))]


def build_bmc_table(beta: float, nq: int, lambdas: Iterable[int] | None = None,
                    cap: int = BMC_CAP) -> BmcTable:
    """Build the table at angle ``beta`` for total quanta <= nq.

    ``lambdas`` restricts the coupled angular momenta stored (the Hamiltonian
    only ever needs lam = L); the default stores everything and then the
    count equals :data:`TABLE1`.
    """
    if nq < 0:
        raise ValueError("cutoff must be non-negative")
    if nq > cap:
        raise CapacityError(f"cutoff {nq} exceeds the cap {cap}")
    lam_set = None if lambdas is None else set(lambdas)
    chunks, blocks, offsets = [], {}, {}
    pos = 0
    for q in range(nq + 1):
        for lam in range(q + 1):
            if lam_set is not None and lam not in lam_set:
                continue
            st = block_states(lam, q)
            d = len(st)
            if d == 0:
                continue
            m = block_matrix(beta, lam, q)
            chunks.append(m.ravel(order="F"))
            blocks[(lam, q)] = (pos, d)
            for j, s in enumerate(st):
                offsets[(lam, q) + s] = pos + j * d
            pos += d * d
    values = np.concatenate(chunks) if chunks else np.zeros(0)
    values.setflags(write=False)
    return BmcTable(float(beta), nq, values, blocks, offsets, lam_set is None)


def bmc(table: BmcTable, n: int, l: int, N: int, L: int,
        n1: int, l1: int, n2: int, l2: int, lam: int) -> float:
    """<n l N L; lam | n1 l1 n2 l2; lam> at the table angle.

    Selection-rule violations give 0.0; states above the table cutoff raise
    :class:`OutOfCutoffError`.
    """
    if min(n, l, N, L, n1, l1, n2, l2, lam) < 0:
        return 0.0
    q = 2 * n1 + l1 + 2 * n2 + l2
    qp = 2 * n + l + 2 * N + L
    if max(q, qp) > table.nq:
        raise OutOfCutoffError(f"quanta {max(q, qp)} above table cutoff {table.nq}")
    if q != qp or not abs(l1 - l2) <= lam <= l1 + l2 or not abs(l - L) <= lam <= l + L:
        return 0.0
    if (lam, q) not in table.blocks:
        raise OutOfCutoffError(f"lam={lam} not stored in this table")
    st = block_states(lam, q)
    row = st.index((n, l, N, L))
    return float(table.column(lam, n1, l1, n2, l2)[row])


# ---------------------------------------------------------------------------
# on-disk cache

_HEADER = struct.Struct("<8sIQIQ")  # magic, version, beta bits, nq, count


def save_table(table: BmcTable, path) -> None:
    if not table.complete:
        raise ValueError("only complete tables can be written")
    bits = struct.unpack("<Q", struct.pack("<d", table.beta))[0]
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, FORMAT_VERSION, bits, table.nq, table.count))
        fh.write(np.ascontiguousarray(table.values, dtype="<f8").tobytes())


def load_table(path) -> BmcTable:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise CacheFormatError(f"{path}: truncated header")
        magic, version, bits, nq, count = _HEADER.unpack(head)
        if magic != _MAGIC or version != FORMAT_VERSION:
            raise CacheFormatError(f"{path}: not a version-{FORMAT_VERSION} coefficient file")
        if nq > BMC_CAP or count != TABLE1[nq]:
            raise CacheFormatError(f"{path}: count {count} does not match {nq} quanta")
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != count:
        raise CacheFormatError(f"{path}: expected {count} values, found {data.size}")
    beta = struct.unpack("<d", struct.pack("<Q", bits))[0]
    # rebuild the index; layout is fixed by block_states ordering
    blocks, offsets, pos = {}, {}, 0
    for q in range(nq + 1):
        for lam in range(q + 1):
            st = block_states(lam, q)
            d = len(st)
            if d == 0:
                continue
            blocks[(lam, q)] = (pos, d)
            for j, s in enumerate(st):
                offsets[(lam, q) + s] = pos + j * d
            pos += d * d
    values = data.astype(float)
    values.setflags(write=False)
    return BmcTable(beta, nq, values, blocks, offsets, True)


class BmcCache:
    """Directory of saved tables keyed by (beta rounded to 1e-12, nq, version)."""

    def __init__(self, directory):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)

    def path(self, beta: float, nq: int) -> Path:
        key = round(beta * 1e12)
        return self.dir / f"bmc_v{FORMAT_VERSION}_q{nq}_{key:+d}.bin"

    def get(self, beta: float, nq: int) -> BmcTable:
        p = self.path(beta, nq)
        if p.exists():
            try:
                return load_table(p)
            except CacheFormatError:
                pass
        table = build_bmc_table(beta, nq)
        tmp = p.with_suffix(f".tmp{os.getpid()}")
        save_table(table, tmp)
        os.replace(tmp, p)
        return table
