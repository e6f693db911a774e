import math

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from ho3b.hamiltonian import AssemblyContext, hamiltonian, make_problem
from ho3b.model import parse_model
from ho3b.solver import (
    BracketError,
    ConvergenceError,
    Evaluator,
    MinimizerConfig,
    eigensolve,
    minimize_1d,
    minimize_2d,
    scan,
    solve_two_step,
    trial_fit_minimum,
)
from ho3b.system import constrained_sizes, free_sizes

MODEL_TEXT = """
kinematics: {kin}
reference_mass: {mref}
particles:
  u: {{mass: 0.33, spin: 0.5, isospin: 0.5}}
  s: {{mass: 0.55, spin: 0.5, isospin: 0.0}}
  b: {{mass: 4.7, spin: 0.5, isospin: 0.0}}
structures:
  - {{form: coulomb, strength: -0.25}}
  - {{form: linear, strength: 0.1}}
  - {{form: constant, strength: -0.3}}
"""


def model(kin="nonrelativistic", mref=0.33):
    return parse_model(MODEL_TEXT.format(kin=kin, mref=mref))


def test_eigensolve_trivial():
    w, v = eigensolve(np.eye(4))
    np.testing.assert_allclose(w, 1.0)
    w, v = eigensolve(np.array([[0.0, 1.0], [1.0, 0.0]]))
    np.testing.assert_allclose(w, [-1.0, 1.0], atol=1e-15)
    np.testing.assert_allclose(v.T @ v, np.eye(2), atol=1e-14)
    w, _ = eigensolve(np.diag([3.0, 1.0, 2.0]), 2)
    np.testing.assert_allclose(w, [1.0, 2.0])
    with pytest.raises(ValueError):
        eigensolve(np.eye(2), 3)


def test_minimize_1d_parabola():
    r = minimize_1d(lambda b: (b - 2) ** 2 + 5)
    assert r.x[0] == pytest.approx(2.0, abs=1e-3)
    assert r.f == pytest.approx(5.0, abs=1e-6)


def test_trial_fit_recovers_family_minimum():
    a, b, c = 3.0, 0.7, -1.0
    f = lambda x: a / x ** 2 + b * x + c
    xs = [1.0, 2.0, 4.0]
    assert trial_fit_minimum(xs, [f(x) for x in xs]) == pytest.approx((2 * a / b) ** (1 / 3), rel=1e-12)
    r = minimize_1d(f)
    assert r.x[0] == pytest.approx((2 * a / b) ** (1 / 3), rel=1e-4)


def test_trial_fit_other_exponents():
    # the n = (m + p)/2 branch, no vanishing power
    f = lambda x: 2.0 / x ** 2 - 1.0 / math.sqrt(x) + 0.3 * x
    xs = [0.8, 1.5, 3.0]
    x = trial_fit_minimum(xs, [f(t) for t in xs], (-2.0, -0.5, 1.0))
    ref = minimize_scalar(f, bounds=(0.2, 20), method="bounded", options={"xatol": 1e-10}).x
    assert x == pytest.approx(ref, rel=1e-7)


def test_minimizer_config_validation():
    with pytest.raises(ValueError):
        MinimizerConfig(exponents=(-2.0, 1.0, 3.0))
    with pytest.raises(ValueError):
        MinimizerConfig(exponents=(1.0, 1.0, 0.0))
    with pytest.raises(ValueError):
        MinimizerConfig(bounds=(1.0, 0.5))


def test_minimize_1d_reports_bound():
    with pytest.raises(BracketError) as err:
        minimize_1d(lambda b: -b)
    assert err.value.best[0] == pytest.approx(20.0)


def test_minimize_2d_separable():
    f = lambda x, y: (x - 1.5) ** 2 + (y - 3.0) ** 2 + 0.25
    r = minimize_2d(f, start=(2.0, 2.0))
    assert r.x == pytest.approx((1.5, 3.0), abs=1e-3)
    assert r.f == pytest.approx(0.25, abs=1e-6)


def test_free_equals_constrained_at_same_sizes():
    pr = make_problem(model(), ["u", "b", "b"], 8, 0, 1, 0.5, 0.5)
    ev = Evaluator(pr)
    sz = constrained_sizes(pr.system, 3.0)
    assert ev.energy(sz) == ev.energy(free_sizes(sz.b_x, sz.b_y))


def test_free_not_above_constrained():
    m = model()
    single = solve_two_step(m, ["u", "b", "b"], 0, 1, 6, 6, "single_b")
    free = solve_two_step(m, ["u", "b", "b"], 0, 1, 6, 6, "free")
    assert free.eigenvalues[0] <= single.eigenvalues[0] + 1e-12


def test_reference_mass_invariance():
    sz = free_sizes(1.6, 2.3)
    energies = []
    optima = []
    for mref in (0.5, 1.0, 2.0):
        m = model(mref=mref)
        pr = make_problem(m, ["u", "s", "b"], 6, 0, 1, 0.5, 0.5)
        energies.append(Evaluator(pr).energy(sz))
        optima.append(solve_two_step(m, ["u", "s", "b"], 0, 1, 6, 6, "single_b").eigenvalues[0])
    assert max(energies) - min(energies) <= 1e-12 * abs(energies[0])
    assert max(optima) - min(optima) <= 1e-7


def test_variational_monotonicity_fixed_sizes():
    pr_sizes = free_sizes(1.5, 2.2)
    prev = None
    for nq in range(0, 13, 2):
        pr = make_problem(model(), ["u", "s", "b"], nq, 0, 1, 0.5, 0.5)
        w, _, _ = Evaluator(pr, levels=3).spectrum(pr_sizes, 3)
        if prev is not None:
            k = min(len(w), len(prev))
            assert np.all(w[:k] <= prev[:k] + 1e-12)
        prev = w


def test_two_step_consistency_and_log():
    m = model()
    log = []
    r = solve_two_step(m, ["u", "u", "u"], 0, 2, 4, 8, log=log)
    assert r.sizes.constrained and r.nq == 8 and r.nq_opt == 4
    assert len(log) > 3 and all(len(rec) == 5 for rec in log)
    assert [rec[0] for rec in log] == list(range(1, len(log) + 1))
    # rerunning at the found sizes reproduces the same spectrum
    again = solve_two_step(m, ["u", "u", "u"], 0, 2, 4, 8, sizes=r.sizes)
    np.testing.assert_array_equal(r.eigenvalues, again.eigenvalues)
    # the optimization target at nq_opt is the minimum of the logged energies
    best = min(rec[3] for rec in log)
    pr = make_problem(m, ["u", "u", "u"], 4, 0, 1, 0.5, 0.5)
    assert Evaluator(pr).energy(r.sizes) == pytest.approx(best, abs=1e-12)
    np.testing.assert_allclose(r.masses, r.eigenvalues + 3 * 0.33)


def test_two_step_rejects_bad_cutoffs():
    with pytest.raises(ValueError):
        solve_two_step(model(), ["u", "u", "u"], 0, 1, 10, 8)
    with pytest.raises(ValueError):
        solve_two_step(model(), ["u", "u", "u"], 0, 1, 8, 18)


def test_scan_single_point_matches_direct():
    m = model("semirelativistic")
    rows = scan(m, ["u", "s", "b"], 1, 2, 6, [(1.4, 2.0)], parity=-1)
    pr = make_problem(m, ["u", "s", "b"], 6, 1, -1, 0.5, 0.5)
    w = np.linalg.eigvalsh(hamiltonian(AssemblyContext(pr, free_sizes(1.4, 2.0))).to_dense())[:2]
    assert rows[0][:2] == (1.4, 2.0)
    np.testing.assert_allclose(rows[0][2:], w, rtol=1e-12)
    rows = scan(m, ["u", "u", "u"], 0, 1, 4, [2.5])
    assert rows[0][0] == 2.5 and len(rows[0]) == 4


def test_level_above_dimension():
    pr = make_problem(model(), ["u", "u", "u"], 0, 0, 1, 1.5, 1.5)
    ev = Evaluator(pr, levels=2, target=1)
    with pytest.raises(ConvergenceError):
        ev.energy(constrained_sizes(pr.system, 2.0))
