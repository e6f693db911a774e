"""Assembly of the Hamiltonian and of the P13 operator on the coupled basis.

Every pair operator is a function of one coordinate obtained by rotating
the Jacobi pair (x, y).  With M(beta) the block-diagonal matrix of
generalized Brody-Moshinsky coefficients and W the operator acting on one
slot of the rotated basis, the space part is a similarity transform
E = M W M^T.  Intermediate sums are complete because the brackets conserve
the number of quanta.

Conventions (dimensionless x, y):
  r23 = b_x |x|
  r13 = alpha1 |second slot of the rotation by beta1|
  r12 = alpha2 |second slot of the rotation by beta2| after x -> -x
  p1 = pi_y / b_y,  |p2| = |first slot of pi rotated by beta1| / eta1,
  |p3| likewise with beta2, eta2 after x -> -x.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Sequence

import numpy as np

from .angmom import (InternalChannel, enumerate_internal_channels, internal_p13_elements,
                     pair_exchange_phase, pair_spin_spin_elements)
from .hobasis import Basis, enumerate_basis, spatial_states
from .model import PotentialModel, Structure
from .moshinsky import BmcTable, build_bmc_table
from .radial import potential_block, scale_overlap_block, sqrt_kernel_block, talmi_integrals
from .system import (P13Geometry, PairGeometry, ParticleSystem, SizeParams, make_system,
                     p13_geometry, pair_geometry_12, pair_geometry_13)

__all__ = [
    "AssemblyError",
    "SymmetricMatrix",
    "InternalOperatorTable",
    "Problem",
    "AssemblyContext",
    "ProjectionMap",
    "make_problem",
    "pair_l_signs",
    "kinetic_nr",
    "kinetic_sr",
    "potential_matrix",
    "pair_potential",
    "hamiltonian",
    "p13_matrix",
    "symmetry_project",
]

PAIRS = ((2, 3), (1, 3), (1, 2))


class AssemblyError(RuntimeError):
    pass


class SymmetricMatrix:
    """Real symmetric matrix kept as its packed lower triangle (row-major)."""

    _MAGIC = b"HO3BSYM\x00"

    def __init__(self, dim: int, packed: np.ndarray):
        packed = np.asarray(packed, dtype=float)
        if packed.shape != (dim * (dim + 1) // 2,):
            raise ValueError("packed array has the wrong length")
        self.dim = dim
        self.packed = packed
        self.packed.setflags(write=False)

    @classmethod
    def from_dense(cls, a: np.ndarray) -> "SymmetricMatrix":
        a = np.asarray(a, dtype=float)
        il = np.tril_indices(a.shape[0])
        return cls(a.shape[0], a[il].copy())

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.dim, self.dim))
        il = np.tril_indices(self.dim)
        out[il] = self.packed
        out.T[il] = self.packed
        return out

    def __add__(self, other: "SymmetricMatrix") -> "SymmetricMatrix":
        return SymmetricMatrix(self.dim, self.packed + other.packed)

    def __eq__(self, other) -> bool:
        return isinstance(other, SymmetricMatrix) and self.dim == other.dim and np.array_equal(self.packed, other.packed)

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self._MAGIC + struct.pack("<Q", self.dim))
            fh.write(self.packed.astype("<f8").tobytes())

    @classmethod
    def load(cls, path) -> "SymmetricMatrix":
        with open(path, "rb") as fh:
            head = fh.read(16)
            if head[:8] != cls._MAGIC:
                raise ValueError(f"{path}: not a packed symmetric matrix file")
            dim = struct.unpack("<Q", head[8:])[0]
            data = np.frombuffer(fh.read(), dtype="<f8")
        return cls(dim, data.astype(float))


@dataclass(frozen=True)
class InternalOperatorTable:
    """O^(s)(kl) over the channel list, keyed by (pair, structure index)."""

    channels: tuple[InternalChannel, ...]
    matrices: dict

    def get(self, pair, s: int) -> np.ndarray:
        return self.matrices[(pair, s)]


def pair_l_signs(channels: Sequence[InternalChannel], spins, isospins, exchange_sign: int) -> list[int]:
    """Required (-1)^l per channel for the (2,3) pair to have the right symmetry.

    The state must satisfy (-1)^l * (internal exchange phase) = exchange_sign,
    where exchange_sign is +1 for quarks (color antisymmetry folded in).
    """
    return [exchange_sign * pair_exchange_phase(c, spins, isospins) for c in channels]


def _operator_matrix(st: Structure, channels, pair, spins) -> np.ndarray:
    n = len(channels)
    op = st.operator
    if op == "identity":
        return np.eye(n)
    if op == "spin_spin":
        return pair_spin_spin_elements(channels, pair, spins)
    if op == "sigma_sigma":
        return 4.0 * pair_spin_spin_elements(channels, pair, spins)
    mat = np.array(op, dtype=float)
    if mat.shape != (n, n):
        raise AssemblyError(f"operator matrix is {mat.shape}, expected {(n, n)} for the channel list")
    return mat


@dataclass(frozen=True)
class Problem:
    """Everything that does not depend on the size parameters."""

    model: PotentialModel
    system: ParticleSystem
    basis: Basis
    channels: tuple[InternalChannel, ...]
    internal: InternalOperatorTable
    symmetry: str
    spins: tuple
    isospins: tuple
    full_spatial: tuple
    full_index: np.ndarray
    # per pair: list of (structure index, scale factor)
    pair_structures: dict

    @property
    def nq(self) -> int:
        return self.basis.nq

    @property
    def L(self) -> int:
        return self.basis.L

    @cached_property
    def arrays(self) -> dict:
        sp = np.array(self.full_spatial, dtype=int).reshape(-1, 4)
        q = 2 * sp[:, 0] + sp[:, 1] + 2 * sp[:, 2] + sp[:, 3]
        return {"n": sp[:, 0], "l": sp[:, 1], "nu": sp[:, 2], "lam": sp[:, 3], "q": q}

    @cached_property
    def xflip(self) -> np.ndarray:
        return np.where(self.arrays["l"] % 2, -1.0, 1.0)

    @cached_property
    def internal_p13(self) -> np.ndarray:
        return internal_p13_elements(self.channels, self.spins, self.isospins)

    def lift(self, space: np.ndarray, internal: np.ndarray | None = None) -> np.ndarray:
        """Restrict a full-space operator to the basis, times an internal factor."""
        f = self.full_index
        out = space[np.ix_(f, f)]
        if internal is None:
            c = self.basis.channel_index()
            return out * (c[:, None] == c[None, :])
        c = self.basis.channel_index()
        return out * internal[np.ix_(c, c)]


def make_problem(
    model: PotentialModel,
    particles: Sequence[str],
    nq: int,
    L: int,
    parity: int = 1,
    spin: float = 0.5,
    isospin: float = 0.5,
    ordering: Sequence[int] = (0, 1, 2),
    symmetry: str = "auto",
) -> Problem:
    """Enumerate channels and basis for a model and particle content."""
    try:
        parts = [model.particles[p] for p in particles]
    except KeyError as exc:
        raise AssemblyError(f"particle {exc.args[0]!r} not defined in the model") from None
    system = make_system([p.mass for p in parts], model.reference_mass, ordering, list(particles))
    spins = tuple(model.particles[lab].spin for lab in system.labels)
    isospins = tuple(model.particles[lab].isospin for lab in system.labels)
    channels = enumerate_internal_channels(spins, isospins, spin, isospin)
    if not channels:
        raise AssemblyError(f"no internal channel reaches S={spin}, I={isospin}")
    if symmetry == "auto":
        symmetry = "full" if system.identical_all else ("pair" if system.identical_23 else "none")
    if symmetry in ("pair", "full") and not system.identical_23:
        raise AssemblyError("pair symmetry requested but particles 2 and 3 differ")
    if symmetry == "full" and not system.identical_all:
        raise AssemblyError("full symmetry requested for non-identical particles")
    l_signs = pair_l_signs(channels, spins, isospins, model.exchange_sign) if symmetry != "none" else None
    basis = enumerate_basis(nq, L, parity, len(channels), l_signs)
    full = tuple(spatial_states(nq, L, parity))
    pos = {s: i for i, s in enumerate(full)}
    full_index = np.array([pos[s[:4]] for s in basis.states], dtype=int)

    mats, pair_structs = {}, {}
    for pair in PAIRS:
        a, b = system.labels[pair[0] - 1], system.labels[pair[1] - 1]
        lst = []
        for s, st in enumerate(model.structures):
            if not st.applies_to(a, b):
                continue
            scale = 1.0
            if st.mass_factor == "inverse_product":
                scale = 1.0 / (system.masses[pair[0] - 1] * system.masses[pair[1] - 1])
            lst.append((s, scale))
            mats[(pair, s)] = _operator_matrix(st, channels, pair, spins)
        pair_structs[pair] = lst
    return Problem(
        model=model, system=system, basis=basis, channels=tuple(channels),
        internal=InternalOperatorTable(tuple(channels), mats), symmetry=symmetry,
        spins=spins, isospins=isospins, full_spatial=full, full_index=full_index,
        pair_structures=pair_structs,
    )


@dataclass
class AssemblyContext:
    problem: Problem
    sizes: SizeParams
    tables: dict = field(default_factory=dict)
    cache: Any = None  # optional moshinsky.BmcCache

    @property
    def system(self) -> ParticleSystem:
        return self.problem.system

    @property
    def basis(self) -> Basis:
        return self.problem.basis

    @cached_property
    def geom13(self) -> PairGeometry:
        return pair_geometry_13(self.system, self.sizes)

    @cached_property
    def geom12(self) -> PairGeometry:
        return pair_geometry_12(self.system, self.sizes)

    @cached_property
    def geom_p13(self) -> P13Geometry:
        return p13_geometry(self.sizes)

    def table(self, beta: float) -> BmcTable:
        t = self.tables.get(beta)
        if t is None:
            if self.cache is not None:
                t = self.cache.get(beta, self.problem.nq)
            else:
                t = build_bmc_table(beta, self.problem.nq, lambdas=[self.problem.L])
            self.tables[beta] = t
        return t

    def rotation(self, beta: float) -> np.ndarray:
        """Block-diagonal bracket matrix over the full spatial list."""
        pr = self.problem
        q = pr.arrays["q"]
        d = q.size
        out = np.zeros((d, d))
        tab = self.table(beta)
        start = 0
        while start < d:
            stop = start + int(np.count_nonzero(q == q[start]))
            out[start:stop, start:stop] = tab.block(pr.L, int(q[start]))
            start = stop
        return out


# ---------------------------------------------------------------------------
# one-slot operators on the full spatial list


def _slot_operator(pr: Problem, slot: int, blocks: dict, sign_n: bool = False) -> np.ndarray:
    """W[i, j] = blocks[l][n_i, n_j] on one slot, identity on the other.

    slot 0 acts on (n, l), slot 1 on (nu, lam).  With ``sign_n`` an extra
    (-1)^(n_i + n_j) is applied (momentum-space phase of HO functions).
    """
    a = pr.arrays
    if slot == 0:
        n, l, on, ol = a["n"], a["l"], a["nu"], a["lam"]
    else:
        n, l, on, ol = a["nu"], a["lam"], a["n"], a["l"]
    mask = (l[:, None] == l[None, :]) & (on[:, None] == on[None, :]) & (ol[:, None] == ol[None, :])
    lmax = int(l.max()) if l.size else 0
    nmax = int(n.max()) if n.size else 0
    stack = np.zeros((lmax + 1, nmax + 1, nmax + 1))
    for ll, blk in blocks.items():
        if ll <= lmax:
            k = min(blk.shape[0], nmax + 1)
            stack[ll, :k, :k] = blk[:k, :k]
    w = stack[l[:, None], n[:, None], n[None, :]] * mask
    if sign_n:
        w *= np.where((n[:, None] + n[None, :]) % 2, -1.0, 1.0)
    return w


def _potential_blocks(ff, nq: int, a: float) -> dict:
    nmax = nq // 2
    ip = talmi_integrals(ff, 2 * nmax + nq, a)
    return {l: potential_block(ff, (nq - l) // 2, l, a, ip) for l in range(nq + 1)}


def _kernel_blocks(nq: int, mu: float, scale: float) -> dict:
    return {l: sqrt_kernel_block((nq - l) // 2, l, mu) / scale for l in range(nq + 1)}


def _pair_space(ctx: AssemblyContext, pair, blocks_for) -> np.ndarray:
    """Space matrix of a function of r_pair, given blocks_for(scale) -> blocks."""
    pr = ctx.problem
    if pair == (2, 3):
        return _slot_operator(pr, 0, blocks_for(ctx.sizes.b_x))
    g = ctx.geom13 if pair == (1, 3) else ctx.geom12
    m = ctx.rotation(g.beta)
    e = m @ _slot_operator(pr, 1, blocks_for(g.alpha)) @ m.T
    if pair == (1, 2):
        e = pr.xflip[:, None] * e * pr.xflip[None, :]
    return e


def pair_potential(ctx: AssemblyContext, pair, structure: int) -> np.ndarray:
    """Dense space x internal matrix of one structure on one pair."""
    pr = ctx.problem
    st = pr.model.structures[structure]
    scale = dict(pr.pair_structures[pair]).get(structure)
    if scale is None:
        return np.zeros((pr.basis.dim, pr.basis.dim))
    ff = st.form_factor(scale)
    space = _pair_space(ctx, pair, lambda a: _potential_blocks(ff, pr.nq, a))
    return pr.lift(space, pr.internal.get(pair, structure))


def _symmetric(a: np.ndarray) -> SymmetricMatrix:
    return SymmetricMatrix.from_dense(0.5 * (a + a.T))


def _kinetic_nr_dense(ctx: AssemblyContext) -> np.ndarray:
    pr = ctx.problem
    w1, w2, w3 = pr.system.omegas
    m = pr.system.m_ref
    mu_p = m * ctx.sizes.b_x ** 2 * w2 * w3 / pr.system.w23
    mu_q = m * ctx.sizes.b_y ** 2 * w1 * pr.system.w23 / pr.system.w

    def p2_blocks(mu):
        out = {}
        for l in range(pr.nq + 1):
            nmax = (pr.nq - l) // 2
            k = np.diag([2 * n + l + 1.5 for n in range(nmax + 1)])
            off = [math.sqrt((n + 1) * (n + l + 1.5)) for n in range(nmax)]
            k += np.diag(off, 1) + np.diag(off, -1)
            out[l] = k / (2.0 * mu)
        return out

    space = _slot_operator(pr, 0, p2_blocks(mu_p)) + _slot_operator(pr, 1, p2_blocks(mu_q))
    return pr.lift(space)


def kinetic_nr(ctx: AssemblyContext) -> SymmetricMatrix:
    """Nonrelativistic kinetic energy with the center of mass removed."""
    return _symmetric(_kinetic_nr_dense(ctx))


def _kinetic_sr_dense(ctx: AssemblyContext) -> np.ndarray:
    pr = ctx.problem
    sysm = pr.system
    m1, m2, m3 = sysm.masses
    by = ctx.sizes.b_y
    nq = pr.nq
    # particle 1: momentum along y only
    k1 = _slot_operator(pr, 1, _kernel_blocks(nq, by * m1, by), sign_n=True)
    g13, g12 = ctx.geom13, ctx.geom12
    r1 = ctx.rotation(g13.beta)
    k2 = r1 @ _slot_operator(pr, 0, _kernel_blocks(nq, g13.eta * m2, g13.eta), sign_n=True) @ r1.T
    if g12.beta == g13.beta and m2 == m3:
        k3 = k2
    else:
        r2 = ctx.rotation(g12.beta)
        k3 = r2 @ _slot_operator(pr, 0, _kernel_blocks(nq, g12.eta * m3, g12.eta), sign_n=True) @ r2.T
    k3 = pr.xflip[:, None] * k3 * pr.xflip[None, :]
    space = k1 + k2 + k3 - sysm.total_mass * np.eye(k1.shape[0])
    return pr.lift(space)


def kinetic_sr(ctx: AssemblyContext) -> SymmetricMatrix:
    """Sum of sqrt(p_i^2 + m_i^2) minus the total mass, in the rest frame."""
    return _symmetric(_kinetic_sr_dense(ctx))


def _potential_dense(ctx: AssemblyContext) -> np.ndarray:
    pr = ctx.problem
    out = np.zeros((pr.basis.dim, pr.basis.dim))
    for pair in PAIRS:
        for s, _ in pr.pair_structures[pair]:
            out += pair_potential(ctx, pair, s)
    m1, m2, m3 = pr.system.masses
    a = pr.model.three_body_constant
    if a:
        out += a / (m1 * m2 * m3) * np.eye(pr.basis.dim)
    return out


def potential_matrix(ctx: AssemblyContext) -> SymmetricMatrix:
    """All pair structures plus the constant three-body shift."""
    return _symmetric(_potential_dense(ctx))


def hamiltonian(ctx: AssemblyContext) -> SymmetricMatrix:
    pr = ctx.problem
    t = _kinetic_sr_dense(ctx) if pr.model.relativistic else _kinetic_nr_dense(ctx)
    return _symmetric(t + _potential_dense(ctx))


# ---------------------------------------------------------------------------
# P13


def _p13_space(ctx: AssemblyContext) -> np.ndarray:
    pr = ctx.problem
    g = ctx.geom_p13
    a = pr.arrays
    L = pr.L
    d = a["q"].size
    # X: exchange of the two slots, [phi_a(v) phi_b(u)]_L = (-1)^(la+lb-L) [phi_b(u) phi_a(v)]_L
    pos = {s: i for i, s in enumerate(pr.full_spatial)}
    if g.special:
        x = np.zeros((d, d))
        for j, (n, l, nu, lam) in enumerate(pr.full_spatial):
            i = pos[(nu, lam, n, l)]
            x[i, j] = -1.0 if (l + lam - L) % 2 else 1.0
        return x @ ctx.rotation(2.0 * g.theta)
    nmax = pr.nq // 2
    s = g.scale
    f_up = {l: scale_overlap_block((pr.nq - l) // 2, l, math.sqrt(s)) for l in range(pr.nq + 1)}
    f_dn = {l: scale_overlap_block((pr.nq - l) // 2, l, 1.0 / math.sqrt(s)) for l in range(pr.nq + 1)}
    kop = np.zeros((d, d))
    for j, (na, la, nb, lb) in enumerate(pr.full_spatial):
        ph = (-1.0 if (la + lb - L) % 2 else 1.0) * (g.sign ** (la + lb))
        for i, (ne, le, ve, lv) in enumerate(pr.full_spatial):
            if le != lb or lv != la:
                continue
            kop[i, j] = ph * f_up[lb][ne, nb] * f_dn[la][ve, na]
    m = ctx.rotation(g.theta)
    return m.T @ kop @ m


def p13_matrix(ctx: AssemblyContext) -> SymmetricMatrix:
    """Transposition of particles 1 and 3 (space times internal part)."""
    pr = ctx.problem
    if not pr.system.identical_all:
        raise AssemblyError("P13 is only defined for three identical particles")
    return _symmetric(pr.lift(_p13_space(ctx), pr.internal_p13))


@dataclass(frozen=True)
class ProjectionMap:
    """Orthonormal columns spanning one P13 eigenspace of the basis."""

    columns: np.ndarray
    sign: int

    @property
    def dim(self) -> int:
        return self.columns.shape[1]

    def project(self, h: np.ndarray | SymmetricMatrix) -> np.ndarray:
        a = h.to_dense() if isinstance(h, SymmetricMatrix) else h
        return self.columns.T @ a @ self.columns

    def to_original(self, vectors: np.ndarray) -> np.ndarray:
        """Express vectors of the projected space in the original basis."""
        return self.columns @ vectors

    def from_original(self, vectors: np.ndarray) -> np.ndarray:
        return self.columns.T @ vectors


def symmetry_project(ctx: AssemblyContext, p13: SymmetricMatrix, sign: int = 1, tol: float = 1e-8) -> ProjectionMap:
    """Eigenvectors of P13 with eigenvalue ``sign``; requires the special ratio."""
    if not ctx.geom_p13.special:
        raise AssemblyError("projection needs b_y/b_x = sqrt(3)/2 (constrained sizes)")
    w, v = np.linalg.eigh(p13.to_dense())
    keep = np.abs(w - sign) < tol
    return ProjectionMap(np.ascontiguousarray(v[:, keep]), sign)
