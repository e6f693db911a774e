"""Command line entry point.

    ho3b solve|scan|regge|bmc-census|table7 --model FILE --run FILE
         [--cache-dir DIR] [--threads N] [--out CSV]

Model names without a path (``bhaduri``, ``fulcher_nr``, ``fulcher_sr``)
resolve to the shipped parameter files.  CSV goes to ``--out``, else to the
run file's ``output``, else to stdout; progress and iteration records go
to stderr.  Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
from pathlib import Path

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERIC = 3

SIGMA_TABLE7 = 0.015  # GeV, assumed spread of the reference centres of gravity
DATA = Path(__file__).resolve().parent / "data"


class CommandError(Exception):
    def __init__(self, msg: str, code: int = EXIT_INVALID):
        super().__init__(msg)
        self.code = code


def fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, int)) or (hasattr(x, "dtype") and x.dtype.kind in "iu"):
        return str(int(x))
    if x is None:
        return ""
    return f"{float(x):.17g}"


def write_csv(header, rows, out: str | None) -> None:
    lines = [",".join(header)]
    lines += [",".join(fmt(v) for v in row) for row in rows]
    text = "\n".join(lines) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def read_reference(path: Path) -> list[dict]:
    try:
        text = path.read_text()
    except OSError as exc:
        raise CommandError(f"{path}: {exc.strerror}") from None
    body = "\n".join(ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#"))
    return list(csv.DictReader(io.StringIO(body)))


def model_path(name: str) -> Path:
    p = Path(name)
    if p.exists():
        return p
    packaged = DATA / f"{name}.yaml"
    if packaged.exists():
        return packaged
    raise CommandError(f"{name}: no such model file")


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _stream(log) -> None:
    for step, bx, by, e, t in log:
        _log(f"iter {step} b_x={bx:.6f} b_y={by:.6f} E={e:.10f} t={t:.3f}s")


def _need_particles(run, model) -> None:
    if len(run.particles) != 3:
        raise CommandError("run file: 'particles' must list three labels")
    for p in run.particles:
        if p not in model.particles:
            raise CommandError(f"run file: particle {p!r} not defined by model {model.name!r}")


def _fixed_sizes(run, system):
    from .system import constrained_sizes, free_sizes

    if run.b is not None:
        return constrained_sizes(system, run.b)
    if run.b_x is not None and run.b_y is not None:
        return free_sizes(run.b_x, run.b_y)
    if (run.b_x is None) != (run.b_y is None):
        raise CommandError("run file: give both b_x and b_y")
    return None


# ---------------------------------------------------------------------------
# commands


def cmd_solve(models, run, cache, out) -> None:
    from .hamiltonian import make_problem
    from .solver import MinimizerConfig, solve_two_step

    model = models[0]
    _need_particles(run, model)
    cfg = MinimizerConfig(bounds=run.bounds)
    order = run.ordering
    probe = make_problem(model, run.particles, 0, run.L, run.parity, run.spin, run.isospin, order)
    sizes = _fixed_sizes(run, probe.system)
    rows = []
    for nq in run.nq_list or (run.nq,):
        if nq < run.nq_opt:
            raise CommandError(f"run file: N_Q={nq} below nq_opt={run.nq_opt}")
        log: list = []
        r = solve_two_step(model, run.particles, run.L, run.levels, run.nq_opt, nq, run.mode,
                           parity=run.parity, spin=run.spin, isospin=run.isospin, ordering=order,
                           symmetry=run.symmetry, config=cfg, start=run.start, sizes=sizes,
                           log=log, cache=cache)
        _stream(log)
        sizes = r.sizes
        energies = list(r.eigenvalues) + [math.nan] * (run.levels - len(r.eigenvalues))
        rows.append([nq, r.basis_dim, sizes.b_x, sizes.b_y] + energies)
        _log(f"{model.name}: N_Q={nq} D_Q={r.basis_dim} dim={r.dim} b_x={sizes.b_x:.6f} "
             f"b_y={sizes.b_y:.6f} E_1={energies[0]:.10f} evaluations={len(log)}")
    header = ["N_Q", "D_Q", "b_x", "b_y"] + [f"E_{i + 1}" for i in range(run.levels)]
    write_csv(header, rows, out)


def cmd_scan(models, run, cache, out) -> None:
    from .solver import scan

    model = models[0]
    _need_particles(run, model)
    if not run.grid:
        raise CommandError("run file: scan needs a 'grid'")
    scalar = [isinstance(p, float) for p in run.grid]
    if any(scalar) and not all(scalar):
        raise CommandError("run file: grid mixes b values and (b_x, b_y) pairs")
    if not all(scalar) and any(len(p) != 2 for p in run.grid):
        raise CommandError("run file: grid pairs must be [b_x, b_y]")
    rows = []
    for nq in run.nq_list or (run.nq,):
        for row in scan(model, run.particles, run.L, run.levels, nq, run.grid, parity=run.parity,
                        spin=run.spin, isospin=run.isospin, ordering=run.ordering,
                        symmetry=run.symmetry, cache=cache):
            row = list(row) + [math.nan] * (run.levels - (len(row) - (3 if all(scalar) else 2)))
            rows.append([nq] + row)
        _log(f"{model.name}: N_Q={nq} scanned {len(run.grid)} points")
    head = ["N_Q", "b", "b_x", "b_y"] if all(scalar) else ["N_Q", "b_x", "b_y"]
    write_csv(head + [f"E_{i + 1}" for i in range(run.levels)], rows, out)


def cmd_regge(models, run, cache, out, reference: Path | None) -> None:
    from .solver import MinimizerConfig, solve_two_step

    ref = {int(r["L"]): r for r in read_reference(reference or DATA / "delta_regge.csv")}
    particles = run.particles or ("u", "u", "u")
    L_values = run.L_values or (0, 2, 4, 6)
    cfg = MinimizerConfig(bounds=run.bounds)
    rows = []
    for model in models:
        _need_particles(argparse.Namespace(particles=particles), model)
        masses = []
        for L in L_values:
            log: list = []
            r = solve_two_step(model, particles, L, 1, run.nq_opt, run.nq, run.mode, parity=(-1) ** L,
                               spin=run.spin, isospin=run.isospin, ordering=run.ordering,
                               symmetry=run.symmetry, config=cfg, log=log, cache=cache)
            _stream(log)
            masses.append((L, r.basis_dim, r.sizes, float(r.eigenvalues[0]), float(r.masses[0])))
            _log(f"{model.name}: L={L} M={masses[-1][4]:.6f}")
        L0 = masses[0][0]
        shift = float(ref[L0]["mass"]) - masses[0][4] if L0 in ref else 0.0
        for L, dq, sz, e, m in masses:
            exp = ref.get(L)
            rows.append([model.name, L, dq, sz.b_x, sz.b_y, e, m, m + shift,
                         float(exp["mass"]) if exp else math.nan,
                         float(exp["error"]) if exp else math.nan])
    write_csv(["model", "L", "D_Q", "b_x", "b_y", "E", "M", "M_renormalized", "M_exp", "error"], rows, out)


def cmd_bmc_census(nq: int, out) -> None:
    import numpy as np

    from .moshinsky import BMC_CAP, TABLE1, build_bmc_table, census

    if not 0 <= nq <= BMC_CAP:
        raise CommandError(f"--nq must lie in [0, {BMC_CAP}]")
    table = build_bmc_table(math.pi / 5, nq)
    per_q = np.zeros(nq + 1, dtype=np.int64)
    for (lam, q), (start, d) in table.blocks.items():
        per_q[q] += d * d
    built = np.cumsum(per_q)
    rows, ok = [], True
    for q in range(nq + 1):
        good = int(built[q]) == TABLE1[q] == census(q)
        ok &= good
        rows.append([q, int(built[q]), TABLE1[q], "pass" if good else "FAIL"])
    write_csv(["N_Q", "computed", "reference", "status"], rows, out)
    if not ok:
        raise CommandError("coefficient census differs from the reference counts", EXIT_NUMERIC)


def table7_rows(model, run, reference: list[dict], cache=None, log_to=None):
    """Masses of the reference families for one model, A fitted on the fit row.

    Returns (rows, A/(m1 m2 m3) of the fitted family, chi2) where rows hold
    (name, exp, E, sum of masses, mass with the A term).
    """
    from .solver import MinimizerConfig, solve_two_step

    base = model.with_constant(0.0)
    cfg = MinimizerConfig(bounds=run.bounds)
    computed = []
    for r in reference:
        parts = tuple(r["particles"].split())
        _need_particles(argparse.Namespace(particles=parts), model)
        level = int(r["level"])
        log: list = []
        res = solve_two_step(base, parts, 0, level + 1, run.nq_opt, run.nq, parity=1,
                             spin=float(r["spin"]), isospin=float(r["isospin"]), target=level,
                             config=cfg, log=log, cache=cache)
        if log_to is not None:
            log_to(log)
        if len(res.eigenvalues) <= level:
            raise CommandError(f"{r['name']}: level {level} above the basis dimension", EXIT_NUMERIC)
        ms = [model.particles[p].mass for p in parts]
        computed.append((r, float(res.eigenvalues[level]), sum(ms), math.prod(ms)))
    fits = [c for c in computed if c[0]["fit"].strip() == "1"]
    if len(fits) != 1:
        raise CommandError("reference data must flag exactly one row with fit=1")
    r0, e0, s0, p0 = fits[0]
    A = (float(r0["exp"]) - e0 - s0) * p0
    rows, chi = [], []
    for r, e, s, p in computed:
        m = e + s + A / p
        rows.append((r["name"], float(r["exp"]), e, s, m))
        if r is not r0:
            chi.append(((m - float(r["exp"])) / SIGMA_TABLE7) ** 2)
    return rows, A / p0, sum(chi) / len(chi)


def cmd_table7(models, run, cache, out, reference: Path | None) -> None:
    ref = read_reference(reference or DATA / "table7_reference.csv")
    if not ref:
        raise CommandError("reference data is empty")
    rows = []
    for model in models:
        res, a_term, chi2 = table7_rows(model, run, ref, cache, _stream)
        for name, exp, e, s, m in res:
            rows.append([model.name, name, exp, m, e, m - exp])
        rows.append([model.name, "A/(m1m2m3)", math.nan, a_term, math.nan, math.nan])
        rows.append([model.name, "chi2", math.nan, chi2, math.nan, math.nan])
        _log(f"{model.name}: A/(m1m2m3)={a_term:.4f} GeV chi2={chi2:.2f}")
    write_csv(["model", "name", "exp", "mass", "E", "deviation"], rows, out)


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ho3b", description="Three-body oscillator-basis solver.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("solve", "scan", "regge", "bmc-census", "table7"):
        p = sub.add_parser(name)
        p.add_argument("--model", action="append", default=[],
                       help="model file or shipped model name (repeatable for regge, table7)")
        p.add_argument("--run", help="run specification file")
        p.add_argument("--cache-dir", help="directory for saved bracket tables")
        p.add_argument("--threads", type=int, help="BLAS thread count")
        p.add_argument("--out", help="CSV output path")
        if name in ("regge", "table7"):
            p.add_argument("--reference", help="reference data CSV (defaults to the shipped file)")
        if name == "bmc-census":
            p.add_argument("--nq", type=int, default=16, help="largest cutoff (default 16)")
    return ap


def run_command(args) -> None:
    from .model import RunSpec, load_model, load_run
    from .moshinsky import BmcCache

    cache = BmcCache(args.cache_dir) if args.cache_dir else None
    if args.command == "bmc-census":
        return cmd_bmc_census(args.nq, args.out)
    run = load_run(args.run) if args.run else RunSpec()
    out = args.out or run.output
    if not args.model:
        raise CommandError("--model is required")
    models = [load_model(model_path(m)) for m in args.model]
    if args.command in ("solve", "scan") and len(models) != 1:
        raise CommandError(f"{args.command} takes exactly one --model")
    if args.command in ("solve", "scan") and not args.run:
        raise CommandError(f"{args.command} requires --run")
    if args.command == "solve":
        cmd_solve(models, run, cache, out)
    elif args.command == "scan":
        cmd_scan(models, run, cache, out)
    elif args.command == "regge":
        cmd_regge(models, run, cache, out, Path(args.reference) if args.reference else None)
    elif args.command == "table7":
        cmd_table7(models, run, cache, out, Path(args.reference) if args.reference else None)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            _log("error: --threads must be positive")
            return EXIT_INVALID
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)
    try:
        from numpy.linalg import LinAlgError

        from .hamiltonian import AssemblyError
        from .model import ConfigError
        from .moshinsky import CacheFormatError, CapacityError, OutOfCutoffError
        from .solver import BracketError, ConvergenceError

        numeric = (ConvergenceError, BracketError, AssemblyError, CacheFormatError, ArithmeticError,
                   LinAlgError)
        invalid = (ConfigError, CapacityError, OutOfCutoffError, ValueError, KeyError)
        run_command(args)
    except CommandError as exc:
        _log(f"error: {exc}")
        return exc.code
    except Exception as exc:
        if isinstance(exc, numeric):
            _log(f"numerical failure: {exc}")
            return EXIT_NUMERIC
        if isinstance(exc, invalid):
            _log(f"error: {exc}")
            return EXIT_INVALID
        raise
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
