import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from quasisl import eigen, mmatrix
from quasisl.boundary import DIRICHLET, Separated
from quasisl.errors import DenominatorVanishes, PreconditionError, TraceImaginaryTooSmall

from conftest import PI, delta_problem

zs_off_axis = st.tuples(st.floats(-20, 60), st.floats(0.05, 10), st.booleans()).map(
    lambda t: complex(t[0], t[1] if t[2] else -t[1]))


def test_half_m_closed_form(free01):
    # theta = cosh(x - 1/2), phi = sinh(x - 1/2) at z = -1
    mp = mmatrix.half_m(free01, 0.5, 0.0, "+", 0.0, -1.0)
    assert mp == pytest.approx(-1 / math.tanh(0.5), abs=1e-10)
    assert mp.real == pytest.approx(-2.16395341, abs=1e-8)


def test_half_m_mirror_symmetry(free01):
    mp = mmatrix.half_m(free01, 0.5, 0.0, "+", 0.0, -1.0)
    mm = mmatrix.half_m(free01, 0.5, 0.0, "-", 0.0, -1.0)
    assert abs(mp - mm) <= 1e-12


def test_half_m_herglotz(delta):
    for side in "+-":
        assert mmatrix.half_m(delta, 1.0, 0.4, side, 0.7, 1j).imag > 0


def test_x0_must_be_interior(free01):
    with pytest.raises(PreconditionError):
        mmatrix.m_matrix(free01, 1.0, 0.0, DIRICHLET, 1j)


@given(zs_off_axis)
def test_det_minus_quarter(z):
    P = delta_problem()
    M = mmatrix.m_matrix(P, 1.1, 0.3, Separated(0.2, 1.7), z)
    assert abs(M.det() + 0.25) <= 1e-9


def test_det_free_problem(free01):
    for z in (1 + 1j, 3 - 2j, 0.5j):
        assert abs(mmatrix.m_matrix(free01, 0.5, 0.0, DIRICHLET, z).det() + 0.25) <= 1e-9


@given(zs_off_axis, st.floats(0.05, 3.1), st.floats(0.1, 3.0))
def test_conjugation_and_trace(z, phi_alpha, x0):
    P = delta_problem()
    bc = Separated(0.5, 2.0)
    M = mmatrix.m_matrix(P, x0, phi_alpha, bc, z)
    Mc = mmatrix.m_matrix(P, x0, phi_alpha, bc, z.conjugate())
    assert np.max(np.abs(Mc.M - M.M.conj())) <= 1e-10 * (1 + np.abs(M.M).max())
    assert abs(np.trace(M.M) - M.trace_formula()) <= 1e-12 * (1 + abs(M.trace_formula()))


@given(st.floats(-20, 60), st.floats(0.01, 10), st.floats(0.1, 3.0))
def test_imaginary_part_psd(re, im, x0):
    P = delta_problem()
    M = mmatrix.m_matrix(P, x0, 0.0, Separated(0.3, 0.9), complex(re, im))
    A = M.imaginary_part()
    assert np.max(np.abs(A - A.conj().T)) <= 1e-9 * (1 + np.abs(A).max())
    assert np.linalg.eigvalsh(0.5 * (A + A.conj().T)).min() >= -1e-10 * (1 + np.abs(A).max())


def test_poles_are_eigenvalues(delta):
    bc = Separated(0.6, 2.2)
    x0 = 1.3
    ev = [e.lam for e in eigen.eigenvalues(delta, bc, -2.0, 40.0)]
    lam = np.linspace(-2.0, 40.0, 3001)
    mp, mm = mmatrix.half_ms(delta, x0, 0.0, bc, lam)
    s = np.real(mp + mm)
    # m_+ + m_- changes sign at its zeros and at its poles; near a zero the
    # neighbouring values grow, near a pole they shrink
    idx = [i for i in np.nonzero(np.sign(s[:-1]) != np.sign(s[1:]))[0]
           if abs(s[i]) + abs(s[i + 1]) < abs(s[i - 1]) + abs(s[i + 2])]
    roots = [0.5 * (lam[i] + lam[i + 1]) for i in idx]
    assert len(roots) == len(ev)
    assert np.max(np.abs(np.array(roots) - ev)) <= lam[1] - lam[0]
    with pytest.raises(DenominatorVanishes):
        mmatrix.m_matrix(delta, x0, 0.0, bc, ev[0])


# density matrix ------------------------------------------------------------

def test_density_at_eigenvalue(free0pi):
    for lam in (1.0, 4.0, 9.0):
        d = mmatrix.density_matrix(free0pi, 1.1, 0.0, DIRICHLET, lam, 1e-4)
        assert d.detR <= 1e-3
        assert np.trace(d.R) == pytest.approx(1.0, abs=1e-12)
        assert np.linalg.eigvalsh(d.R).min() >= -1e-9
        assert abs(d.R[0, 1]) <= 0.5 + 1e-6
        assert d.classification == "one"


def test_density_det_decreases(free0pi):
    dets = [mmatrix.density_matrix(free0pi, 1.1, 0.0, DIRICHLET, 4.0, 10.0 ** -k).detR for k in range(2, 6)]
    assert np.all(np.diff(dets) < 0)


def test_density_psd_near_spectrum(delta):
    ev = eigen.eigenvalues(delta, DIRICHLET, count=4)
    for e in ev:
        for shift in (-1e-3, 0.0, 1e-3):
            d = mmatrix.density_matrix(delta, 1.0, 0.5, DIRICHLET, e.lam + shift, 1e-2)
            assert np.linalg.eigvalsh(d.R).min() >= -1e-9


def test_density_off_spectrum(free0pi):
    with pytest.raises(TraceImaginaryTooSmall):
        mmatrix.density_matrix(free0pi, 1.1, 0.0, DIRICHLET, 2.5, 1e-6)


def test_classify_multiplicity_one(delta):
    for e in eigen.eigenvalues(delta, DIRICHLET, count=3):
        cls, _ = mmatrix.classify_multiplicity(delta, PI / 3, 0.0, DIRICHLET, e.lam)
        assert cls == "one"
