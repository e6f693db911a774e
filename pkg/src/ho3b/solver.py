"""Eigensolution, variational search over size parameters, and scans.

The one-dimensional search is Brent's method in which the first steps fit
y = a x^m + b x^n + c x^p through three points instead of a parabola; with
the default (m, n, p) = (-2, 1, 0) this is the exact shape of the energy of
an oscillator trial state, so the first fitted step usually lands near the
minimum.  Steps are clamped to the configured bounds.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla

from .hamiltonian import (AssemblyContext, Problem, ProjectionMap, SymmetricMatrix, hamiltonian,
                          make_problem, p13_matrix, symmetry_project)
from .model import PotentialModel
from .system import SizeParams, constrained_sizes, free_sizes

__all__ = [
    "ConvergenceError",
    "BracketError",
    "MinimizerConfig",
    "Minimum",
    "SpectrumResult",
    "eigensolve",
    "trial_fit_minimum",
    "minimize_1d",
    "minimize_2d",
    "Evaluator",
    "solve_two_step",
    "scan",
]

GOLDEN = 0.3819660112501051


class ConvergenceError(RuntimeError):
    pass


class BracketError(RuntimeError):
    """No interior minimum within the bounds; ``best`` holds (x, f(x))."""

    def __init__(self, msg: str, best: tuple[float, float]):
        super().__init__(msg)
        self.best = best


@dataclass(frozen=True)
class MinimizerConfig:
    exponents: tuple[float, float, float] = (-2.0, 1.0, 0.0)
    bounds: tuple[float, float] = (0.2, 20.0)
    tol_x: float = 1e-4
    rtol_f: float = 1e-6
    max_iter: int = 60
    trial_steps: int = 3
    max_restarts: int = 3
    max_passes: int = 12
    initial_step: float = 1.25

    def __post_init__(self):
        m, n, p = self.exponents
        if not (0.0 in (m, n, p) or abs(n - (m + p) / 2) < 1e-12):
            raise ValueError("trial exponents need a zero power or n = (m + p)/2")
        if len({m, n, p}) != 3:
            raise ValueError("trial exponents must be distinct")
        lo, hi = self.bounds
        if not 0 < lo < hi:
            raise ValueError("bounds must satisfy 0 < low < high")


@dataclass
class Minimum:
    x: tuple[float, ...]
    f: float
    evaluations: int
    restarts: int = 0
    log: list = field(default_factory=list)


def eigensolve(matrix, k: int | None = None):
    """Lowest ``k`` eigenpairs of a real symmetric matrix (ascending)."""
    a = matrix.to_dense() if isinstance(matrix, SymmetricMatrix) else np.asarray(matrix, dtype=float)
    d = a.shape[0]
    if d == 0:
        return np.zeros(0), np.zeros((0, 0))
    k = d if k is None else k
    if not 0 < k <= d:
        raise ValueError(f"cannot compute {k} eigenpairs of a {d}x{d} matrix")
    w, v = sla.eigh(a, subset_by_index=[0, k - 1])
    norm = max(np.abs(a).max(), 1e-300)
    res = np.abs(a @ v - v * w).max() if k else 0.0
    if not np.isfinite(res) or res > 1e-9 * norm * max(1.0, math.sqrt(d)):
        raise ConvergenceError(f"eigensolver residual {res:.3e} too large")
    return w, v


def _fit_coeffs(xs, ys, exps):
    a = np.array([[x ** e for e in exps] for x in xs])
    try:
        return np.linalg.solve(a, ys)
    except np.linalg.LinAlgError:
        return None


def trial_fit_minimum(xs: Sequence[float], ys: Sequence[float],
                      exponents=(-2.0, 1.0, 0.0)) -> float | None:
    """Minimum of y = a x^m + b x^n + c x^p through three points, or None."""
    m, n, p = exponents
    # order the powers so the constant (if any) is last
    coef = _fit_coeffs(xs, ys, (m, n, p))
    if coef is None or not np.all(np.isfinite(coef)):
        return None
    terms = sorted(zip((m, n, p), coef), key=lambda t: (t[0] == 0, t[0]))
    if terms[-1][0] == 0:
        (e1, c1), (e2, c2) = terms[0], terms[1]
        # y' = e1 c1 x^(e1-1) + e2 c2 x^(e2-1) = 0
        if c2 == 0:
            return None
        r = -e1 * c1 / (e2 * c2)
        if not r > 0:
            return None
        x = r ** (1.0 / (e2 - e1))
        y2 = e1 * (e1 - 1) * c1 * x ** (e1 - 2) + e2 * (e2 - 1) * c2 * x ** (e2 - 2)
        return x if y2 > 0 else None
    # n = (m + p)/2: with z = x^(n-m), m a + n b z + p c z^2 = 0
    (em, cm), (en, cn), (ep, cp) = sorted(zip((m, n, p), coef))
    roots = np.roots([ep * cp, en * cn, em * cm])
    best = None
    for z in roots:
        if abs(z.imag) > 1e-12 or z.real <= 0:
            continue
        x = z.real ** (1.0 / (en - em))
        y2 = sum(e * (e - 1) * c * x ** (e - 2) for e, c in ((em, cm), (en, cn), (ep, cp)))
        if y2 > 0 and (best is None or x < best):
            best = x
    return best


def _parabola_minimum(xs, ys) -> float | None:
    (x1, x2, x3), (f1, f2, f3) = xs, ys
    den = (x2 - x1) * (f2 - f3) - (x2 - x3) * (f2 - f1)
    if den == 0:
        return None
    num = (x2 - x1) ** 2 * (f2 - f3) - (x2 - x3) ** 2 * (f2 - f1)
    return x2 - 0.5 * num / den


class _Counted:
    def __init__(self, f, lo, hi, log, label):
        self.f, self.lo, self.hi, self.log, self.label = f, lo, hi, log, label
        self.cache: dict[float, float] = {}
        self.n = 0
        self.t0 = time.perf_counter()

    def __call__(self, x: float) -> float:
        x = min(max(x, self.lo), self.hi)
        if x in self.cache:
            return self.cache[x]
        v = float(self.f(x))
        self.cache[x] = v
        self.n += 1
        if self.log is not None:
            self.log.append((self.n, self.label, x, v, time.perf_counter() - self.t0))
        return v


def _bracket(fc: _Counted, x0: float, step: float):
    lo, hi = fc.lo, fc.hi
    x0 = min(max(x0, lo), hi)
    xa, xb = x0, min(x0 * step, hi)
    if xb == xa:
        xb = max(x0 / step, lo)
    fa, fb = fc(xa), fc(xb)
    if fb > fa:
        xa, xb, fa, fb = xb, xa, fb, fa
    grow = step
    while True:
        grow *= 1.6
        xc = xb * grow if xb > xa else xb / grow
        xc = min(max(xc, lo), hi)
        fcv = fc(xc)
        if fcv > fb:
            return tuple(sorted((xa, xb, xc))), fb, xb
        if xc in (lo, hi) and xc == xb:
            raise BracketError(f"objective decreasing up to the bound {xc:g}", (xc, fcv))
        xa, xb, fa, fb = xb, xc, fb, fcv
        if xb in (lo, hi):
            # one more look right at the bound
            if fc(xb) <= fa:
                raise BracketError(f"objective decreasing up to the bound {xb:g}", (xb, fb))


def minimize_1d(f: Callable[[float], float], config: MinimizerConfig = MinimizerConfig(),
                start: float | None = None, bounds: tuple[float, float] | None = None,
                log: list | None = None, label: str = "b") -> Minimum:
    """Bounded minimization of a smooth one-parameter objective."""
    lo, hi = bounds or config.bounds
    fc = _Counted(f, lo, hi, log, label)
    x0 = start if start is not None else math.sqrt(lo * hi)
    restarts = 0
    a, c = lo, hi
    while True:
        (a, x, c), fx, _ = _bracket(fc, x0, config.initial_step)
        res = _brent(fc, a, x, c, config)
        if res is not None:
            break
        # pseudo-crossing: shrink the interval around the best point and retry
        restarts += 1
        xb = min(fc.cache, key=fc.cache.get)
        if restarts > config.max_restarts:
            res = (xb, fc.cache[xb])
            break
        x0 = xb
        fc.lo = max(lo, xb - 0.5 * (xb - fc.lo))
        fc.hi = min(hi, xb + 0.5 * (fc.hi - xb))
    x, fx = res
    return Minimum((float(x),), float(fx), fc.n, restarts, log if log is not None else [])


def _brent(fc: _Counted, a: float, x: float, c: float, cfg: MinimizerConfig):
    """Brent iteration inside the bracket a < x < c; None on a detected jump."""
    fx = fc(x)
    # seed the history with the bracket ends so the first step can be a fit
    w, fw = a, fc(a)
    v, fv = c, fc(c)
    d = 0.0
    e = c - a
    improvements: list[float] = []
    for it in range(cfg.max_iter):
        tol = cfg.tol_x * max(1.0, abs(x)) * 0.5
        mid = 0.5 * (a + c)
        if abs(x - mid) <= 2 * tol - 0.5 * (c - a):
            return x, fx
        u = None
        pts = sorted({x: fx, w: fw, v: fv}.items())
        if it < cfg.trial_steps and len(pts) == 3:
            u = trial_fit_minimum([p[0] for p in pts], [p[1] for p in pts], cfg.exponents)
            if u is not None and not (a < u < c):
                u = None
            if u is not None:
                u = float(u)
        if u is None and abs(e) > tol and len(pts) == 3:
            u = _parabola_minimum([p[0] for p in pts], [p[1] for p in pts])
            if u is not None and (not (a < u < c) or abs(u - x) >= 0.5 * abs(e)):
                u = None
        if u is not None:
            e, d = d, u - x
            if abs(d) < tol:
                # the model sits on x: confirm with one probe on each side
                lo_p, hi_p = max(a, x - tol), min(c, x + tol)
                if fc(lo_p) >= fx and fc(hi_p) >= fx:
                    return x, fx
                d = math.copysign(tol, d if d else 1.0)
        else:
            e = (a - x) if x >= mid else (c - x)
            d = GOLDEN * e
        u = x + (d if abs(d) >= tol else math.copysign(tol, d))
        u = min(max(u, a + 1e-15), c - 1e-15)
        fu = fc(u)
        if fu <= fx:
            improvements.append(fx - fu)
            if u >= x:
                a = x
            else:
                c = x
            v, fv, w, fw, x, fx = w, fw, x, fx, u, fu
            if len(improvements) >= 2 and improvements[-1] < cfg.rtol_f * abs(fx) and abs(d) < 10 * tol:
                return x, fx
        else:
            # a value far below the neighbours' scale means the level ordering
            # changed under us (pseudo-crossing)
            scale = max(improvements[-3:], default=0.0)
            if scale > 0 and fx - fu < 0 and (fu - fx) > 10 * max(scale, 1e-12) and it > 3 \
                    and fu > max(fv, fw) + 10 * scale:
                return None
            if u < x:
                a = u
            else:
                c = u
            if fu <= fw or w == x:
                v, fv, w, fw = w, fw, u, fu
            elif fu <= fv or v == x or v == w:
                v, fv = u, fu
    return x, fx


def minimize_2d(f: Callable[[float, float], float], config: MinimizerConfig = MinimizerConfig(),
                start: tuple[float, float] | None = None,
                bounds: tuple[tuple[float, float], tuple[float, float]] | None = None,
                log: list | None = None) -> Minimum:
    """Alternate one-dimensional searches on b_x and b_y."""
    bx_b, by_b = bounds or (config.bounds, config.bounds)
    x = list(start) if start is not None else [math.sqrt(bx_b[0] * bx_b[1]), math.sqrt(by_b[0] * by_b[1])]
    log = [] if log is None else log
    fbest = f(*x)
    n_eval, restarts = 1, 0
    for npass in range(config.max_passes):
        before = fbest
        for k, bnd in ((0, bx_b), (1, by_b)):
            def g(t, k=k):
                y = list(x)
                y[k] = t
                return f(*y)
            try:
                r = minimize_1d(g, config, start=x[k], bounds=bnd, log=log, label=("b_x", "b_y")[k])
                t, ft = r.x[0], r.f
                n_eval += r.evaluations
                restarts += r.restarts
            except BracketError as exc:
                t, ft = exc.best
            if ft <= fbest:
                x[k], fbest = t, ft
        if abs(before - fbest) <= config.rtol_f * max(abs(fbest), 1e-12):
            break
    return Minimum(tuple(float(t) for t in x), float(fbest), n_eval, restarts, log)


# ---------------------------------------------------------------------------
# spectra


@dataclass
class SpectrumResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    sizes: SizeParams
    nq: int
    nq_opt: int
    basis_dim: int
    dim: int
    projection: ProjectionMap | None = None
    log: list = field(default_factory=list)
    total_mass: float = 0.0

    @property
    def masses(self) -> np.ndarray:
        return self.eigenvalues + self.total_mass

    def vectors_in_original_basis(self) -> np.ndarray:
        if self.projection is None:
            return self.eigenvectors
        return self.projection.to_original(self.eigenvectors)


class Evaluator:
    """Energies of one problem as a function of the size parameters.

    For three identical particles with constrained sizes the Hamiltonian is
    projected on the symmetric eigenspace of P13 before diagonalization.
    """

    def __init__(self, problem: Problem, levels: int = 1, target: int = 0, project: bool | None = None,
                 cache=None):
        self.problem = problem
        self.cache = cache
        self.levels = levels
        self.target = target
        self.project = problem.symmetry == "full" if project is None else project
        self._proj: ProjectionMap | None = None

    def projection(self, ctx: AssemblyContext) -> ProjectionMap | None:
        if not self.project or not ctx.geom_p13.special:
            return None
        if self._proj is None:
            # independent of b at the special ratio
            self._proj = symmetry_project(ctx, p13_matrix(ctx), self.problem.model.exchange_sign)
        return self._proj

    def spectrum(self, sizes: SizeParams, k: int | None = None):
        ctx = AssemblyContext(self.problem, sizes, cache=self.cache)
        h = hamiltonian(ctx)
        proj = self.projection(ctx)
        a = proj.project(h) if proj is not None else h.to_dense()
        k = min(k or self.levels, a.shape[0])
        if k == 0:
            return np.zeros(0), np.zeros((a.shape[0], 0)), proj
        w, v = eigensolve(a, k)
        return w, v, proj

    def energy(self, sizes: SizeParams) -> float:
        w, _, _ = self.spectrum(sizes, self.target + 1)
        if w.size <= self.target:
            raise ConvergenceError("requested level is above the basis dimension")
        return float(w[self.target])


def _problem(model, particles, nq, L, parity, spin, isospin, ordering, symmetry):
    return make_problem(model, particles, nq, L, parity, spin, isospin, ordering, symmetry)


def solve_two_step(model: PotentialModel, particles: Sequence[str], L: int = 0, k: int = 1,
                   nq_opt: int = 8, nq: int = 16, mode: str | None = None, *, parity: int = 1,
                   spin: float = 0.5, isospin: float = 0.5, ordering=(0, 1, 2),
                   symmetry: str = "auto", target: int = 0, config: MinimizerConfig = MinimizerConfig(),
                   start=None, sizes: SizeParams | None = None, log=None, cache=None) -> SpectrumResult:
    """Optimize sizes at nq_opt quanta, then diagonalize once at nq.

    ``mode`` is "single_b" (sizes tied by the constraint) or "free"; three
    identical particles default to "single_b".  Passing ``sizes`` skips the
    optimization.  ``log`` receives one (step, b_x, b_y, E, seconds) record
    per objective evaluation.
    """
    if not 0 <= nq_opt <= nq <= 16:
        raise ValueError("need 0 <= nq_opt <= nq <= 16")
    log = [] if log is None else log
    small = _problem(model, particles, nq_opt, L, parity, spin, isospin, ordering, symmetry)
    if mode is None:
        mode = "single_b" if small.system.identical_all else "free"
    ev = Evaluator(small, levels=target + 1, target=target, cache=cache)
    t0 = time.perf_counter()

    def energy(sz: SizeParams) -> float:
        e = ev.energy(sz)
        log.append((len(log) + 1, sz.b_x, sz.b_y, e, time.perf_counter() - t0))
        return e

    if sizes is None:
        if mode == "single_b":
            x0 = start[0] if start else None
            try:
                r = minimize_1d(lambda b: energy(constrained_sizes(small.system, b)), config, x0)
                b = r.x[0]
            except BracketError as exc:
                b = exc.best[0]
            sizes = constrained_sizes(small.system, b)
        elif mode == "free":
            if start is None:
                s0 = constrained_sizes(small.system, 1.0)
                try:
                    r0 = minimize_1d(lambda b: energy(constrained_sizes(small.system, b)), config)
                    s0 = constrained_sizes(small.system, r0.x[0])
                except BracketError as exc:
                    s0 = constrained_sizes(small.system, exc.best[0])
                start = (s0.b_x, s0.b_y)
            r = minimize_2d(lambda bx, by: energy(free_sizes(bx, by)), config, tuple(start))
            sizes = free_sizes(*r.x)
        else:
            raise ValueError(f"unknown mode {mode!r}")
    big = small if nq == nq_opt else _problem(model, particles, nq, L, parity, spin, isospin, ordering, symmetry)
    evb = Evaluator(big, levels=k, cache=cache)
    w, v, proj = evb.spectrum(sizes, k)
    return SpectrumResult(w, v, sizes, nq, nq_opt, big.basis.dim,
                          proj.dim if proj is not None else big.basis.dim, proj, log,
                          big.system.total_mass)


def scan(model: PotentialModel, particles: Sequence[str], L: int, k: int, nq: int,
         grid: Sequence, *, parity: int = 1, spin: float = 0.5, isospin: float = 0.5,
         ordering=(0, 1, 2), symmetry: str = "auto", cache=None) -> list[tuple]:
    """k lowest energies at each grid point.

    Grid points are either b (constrained sizes) or (b_x, b_y) pairs.
    Rows are (b_x, b_y, E_1..E_k); for scalar points b is prepended.
    """
    pr = _problem(model, particles, nq, L, parity, spin, isospin, ordering, symmetry)
    ev = Evaluator(pr, levels=k, cache=cache)
    rows = []
    for pt in grid:
        if np.ndim(pt) == 0:
            sz = constrained_sizes(pr.system, float(pt))
            w, _, _ = ev.spectrum(sz, k)
            rows.append((float(pt), sz.b_x, sz.b_y) + tuple(w))
        else:
            sz = free_sizes(*pt)
            w, _, _ = ev.spectrum(sz, k)
            rows.append((sz.b_x, sz.b_y) + tuple(w))
    return rows
