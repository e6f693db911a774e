import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from ho3b.angmom import (
    clebsch_gordan,
    enumerate_internal_channels,
    internal_p13_elements,
    pair_exchange_phase,
    pair_isospin_elements,
    pair_spin_spin_elements,
    wigner_3j,
    wigner_6j,
    wigner_9j,
)
from oracles import cg, ninej, sixj

HALF = Fraction(1, 2)


def _halves(top):
    return [Fraction(k, 2) for k in range(0, 2 * top + 1)]


def test_clebsch_gordan_matches_sympy():
    rng = np.random.default_rng(0)
    js = _halves(3)
    checked = 0
    while checked < 150:
        j1, j2 = rng.choice(js, 2)
        j = Fraction(int(rng.integers(0, 13)), 2)
        if not abs(j1 - j2) <= j <= j1 + j2 or (j1 + j2 + j).denominator != 1:
            continue
        m1 = j1 - int(rng.integers(0, int(2 * j1) + 1))
        m2 = j2 - int(rng.integers(0, int(2 * j2) + 1))
        m = m1 + m2
        if abs(m) > j:
            continue
        assert clebsch_gordan(j1, m1, j2, m2, j, m) == pytest.approx(cg(j1, m1, j2, m2, j, m), abs=1e-14)
        checked += 1


def test_clebsch_gordan_zero_outside_selection_rules():
    assert clebsch_gordan(1, 0, 1, 0, 1, 0) == 0.0
    assert clebsch_gordan(1, 1, 1, 0, 0, 1) == 0.0
    assert clebsch_gordan(0.5, 0.5, 0.5, 0.5, 1, 0) == 0.0


def test_clebsch_gordan_orthogonality():
    j1, j2 = 2, Fraction(3, 2)
    for j in (HALF * 1, HALF * 3, HALF * 5, HALF * 7):
        for jp in (HALF * 1, HALF * 3, HALF * 5, HALF * 7):
            m = HALF
            s = 0.0
            for k in range(-2, 3):
                m2 = m - k
                if abs(m2) <= j2:
                    s += clebsch_gordan(j1, k, j2, m2, j, m) * clebsch_gordan(j1, k, j2, m2, jp, m)
            assert s == pytest.approx(1.0 if j == jp else 0.0, abs=1e-14)


def test_3j_relation_to_cg():
    for j1, j2, j3, m1, m2 in [(1, 1, 2, 1, 0), (2, 1, 1, -1, 1), (1.5, 0.5, 1, 0.5, 0.5), (3, 2, 4, -2, 1)]:
        m3 = -(m1 + m2)
        expect = (-1) ** int(j1 - j2 - m3) / math.sqrt(2 * j3 + 1) * cg(j1, m1, j2, m2, j3, -m3)
        assert wigner_3j(j1, j2, j3, m1, m2, m3) == pytest.approx(expect, abs=1e-14)


def test_6j_matches_sympy():
    ints = range(0, 5)
    n = 0
    for a, b, c, d, e, f in itertools.product(ints, repeat=6):
        if (a + b + c + d + e + f) % 3:
            continue
        assert wigner_6j(a, b, c, d, e, f) == pytest.approx(sixj(a, b, c, d, e, f), abs=1e-13)
        n += 1
    assert n > 1000


def test_6j_half_integer_and_large():
    assert wigner_6j(0.5, 0.5, 1, 0.5, 0.5, 0) == pytest.approx(sixj(0.5, 0.5, 1, 0.5, 0.5, 0), abs=1e-14)
    for args in [(20, 18, 4, 17, 19, 2), (16, 16, 16, 16, 16, 16), (19.5, 20, 0.5, 18, 18.5, 2)]:
        assert wigner_6j(*args) == pytest.approx(sixj(*args), abs=1e-13)


def test_9j_matches_sympy():
    cases = [
        (1, 1, 1, 1, 1, 1, 1, 1, 1),
        (1, 1, 0, 1, 1, 2, 2, 2, 2),
        (2, 1, 2, 1, 1, 1, 2, 1, 2),
        (0.5, 0.5, 1, 0.5, 0.5, 0, 1, 1, 1),
        (2, 2, 2, 1, 1, 2, 2, 1, 3),
    ]
    for c in cases:
        assert wigner_9j(*c) == pytest.approx(ninej(*c), abs=1e-13)


def test_channel_enumeration():
    s = (HALF,) * 3
    assert len(enumerate_internal_channels(s, s, HALF, HALF)) == 4
    ch = enumerate_internal_channels(s, s, 1.5, 1.5)
    assert len(ch) == 1 and ch[0].spin_sigma == 1 and ch[0].iso_sigma == 1
    assert len(enumerate_internal_channels(s, s, 1.5, 0.5)) == 2
    assert enumerate_internal_channels(s, s, 2.5, 0.5) == []
    assert enumerate_internal_channels(s, (HALF, 0, 0), HALF, 1.5) == []


def test_pair_exchange_phase():
    s = (HALF,) * 3
    phases = {(c.spin_sigma, c.iso_sigma): pair_exchange_phase(c, s, s)
              for c in enumerate_internal_channels(s, s, HALF, HALF)}
    assert phases == {(0, 0): 1, (0, 1): -1, (1, 0): -1, (1, 1): 1}


# m-scheme oracle for three spin-1/2 objects: product states |m1 m2 m3>

_SX = np.array([[0, 0.5], [0.5, 0]])
_SY = np.array([[0, -0.5j], [0.5j, 0]])
_SZ = np.diag([0.5, -0.5])
_ID = np.eye(2)


def _on(k, op):
    mats = [_ID, _ID, _ID]
    mats[k] = op
    return np.kron(np.kron(mats[0], mats[1]), mats[2])


def _dot(k, l):
    return sum(_on(k, a) @ _on(l, a) for a in (_SX, _SY, _SZ))


def _swap13():
    p = np.zeros((8, 8))
    for i, (a, b, c) in enumerate(itertools.product(range(2), repeat=3)):
        p[4 * c + 2 * b + a, i] = 1.0
    return p


def _coupled_vector(sigma, total, mz):
    """[s1 (s2 s3)sigma]_total with projection mz in the 8-dim product space."""
    v = np.zeros(8)
    ms = (0.5, -0.5)
    for i1, i2, i3 in itertools.product(range(2), repeat=3):
        m1, m2, m3 = ms[i1], ms[i2], ms[i3]
        if m1 + m2 + m3 != mz:
            continue
        v[4 * i1 + 2 * i2 + i3] = cg(0.5, m2, 0.5, m3, sigma, m2 + m3) * cg(0.5, m1, sigma, m2 + m3, total, mz)
    return v


@pytest.mark.parametrize("pair", [(2, 3), (1, 3), (1, 2)])
def test_spin_spin_against_m_scheme(pair):
    s = (HALF,) * 3
    ops = _dot(pair[0] - 1, pair[1] - 1)
    for total in (HALF, Fraction(3, 2)):
        ch = enumerate_internal_channels(s, (0, 0, 0), total, 0)
        got = pair_spin_spin_elements(ch, pair, s)
        vecs = [_coupled_vector(c.spin_sigma, total, 0.5) for c in ch]
        want = np.array([[np.real(u @ ops @ w) for w in vecs] for u in vecs])
        np.testing.assert_allclose(got, want, atol=1e-14)


def test_isospin_mirrors_spin():
    s = (HALF,) * 3
    ch = enumerate_internal_channels(s, s, HALF, HALF)
    for pair in ((1, 2), (1, 3)):
        ss = pair_spin_spin_elements(ch, pair, s)
        tt = pair_isospin_elements(ch, pair, s)
        assert np.allclose(ss, ss.T) and np.allclose(tt, tt.T)
        # the two operators act on different labels, so they commute
        np.testing.assert_allclose(ss @ tt, tt @ ss, atol=1e-14)


def test_internal_p13_against_m_scheme():
    s = (HALF,) * 3
    sw = _swap13()
    big = np.kron(sw, sw)
    for total_s, total_i in [(HALF, HALF), (Fraction(3, 2), HALF), (HALF, Fraction(3, 2)), (Fraction(3, 2), Fraction(3, 2))]:
        ch = enumerate_internal_channels(s, s, total_s, total_i)
        got = internal_p13_elements(ch, s, s)
        vecs = [np.kron(_coupled_vector(c.spin_sigma, total_s, 0.5), _coupled_vector(c.iso_sigma, total_i, 0.5))
                for c in ch]
        want = np.array([[u @ big @ w for w in vecs] for u in vecs])
        np.testing.assert_allclose(got, want, atol=1e-14)
        np.testing.assert_allclose(got @ got, np.eye(len(ch)), atol=1e-14)


def test_internal_p13_rejects_unsupported_spins():
    with pytest.raises(ValueError):
        internal_p13_elements([], (1, 1, 1), (0, 0, 0))
