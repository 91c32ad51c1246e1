import cmath
import math

import numpy as np
import pytest

from quasisl import eigen, ivp, weyl
from quasisl.boundary import DIRICHLET, PERIODIC, Separated
from quasisl.errors import AtEigenvalue, PreconditionError

from conftest import HALF_PI, PI, random_problem


def test_fundamental_pair_closed_form(free01):
    z = 3.0 + 2.0j
    k = cmath.sqrt(z)
    fp = weyl.fundamental_pair(free01, 0.0, z)
    xs = np.linspace(0, 1, 11)
    assert np.max(np.abs(fp.theta(xs)[0] - np.cos(k * xs))) <= 1e-10
    assert np.max(np.abs(fp.phi(xs)[0] - np.sin(k * xs) / k)) <= 1e-10


def test_fundamental_pair_wronskian(rng):
    P = random_problem(rng)
    for _ in range(3):
        z = complex(rng.uniform(-5, 50), rng.uniform(-5, 5))
        fp = weyl.fundamental_pair(P, rng.uniform(0, math.pi), z)
        W = ivp.wronskian(fp.theta, fp.phi, rng.uniform(0, 1, 5))
        assert np.max(np.abs(W - 1)) <= 1e-10


def test_fundamental_pair_neumann_start(free01):
    fp = weyl.fundamental_pair(free01, HALF_PI, 2.0)
    assert abs(fp.theta(0.0)[0]) <= 1e-15 and abs(fp.phi(0.0)[0] - 1) <= 1e-15


# m-function ----------------------------------------------------------------

def test_m_closed_form(free01):
    w = weyl.m_function(free01, DIRICHLET, -1.0)
    assert abs(w.m - (-1 / math.tanh(1.0))) <= 1e-8
    assert w.m.real == pytest.approx(-1.3130352855, abs=1e-9)
    for z in (2.0 + 1j, -3.0 + 0.5j, 30.0 - 4j):
        k = cmath.sqrt(z)
        assert abs(weyl.m_function(free01, DIRICHLET, z).m - (-k / cmath.tan(k))) <= 1e-8 * (1 + abs(k))


def test_m_conjugation(delta):
    bc = Separated(0.4, 1.3)
    z = 1 + 2j
    assert abs(weyl.m_function(delta, bc, z.conjugate()).m - weyl.m_function(delta, bc, z).m.conjugate()) <= 1e-10


def test_m_pole(free0pi):
    assert abs(weyl.m_function(free0pi, DIRICHLET, 1.0 + 1e-6).m) > 1e4


def test_m_at_eigenvalue(free0pi):
    with pytest.raises(AtEigenvalue):
        weyl.m_function(free0pi, DIRICHLET, 4.0)


def test_psi_satisfies_b_condition(delta):
    bc = Separated(0.3, 2.1)
    w = weyl.m_function(delta, bc, 5.0 + 1j)
    u, u1 = w.psi(PI)
    assert abs(u * math.cos(bc.phi_b) - u1 * math.sin(bc.phi_b)) <= 1e-8


def test_m_values_match_single(delta):
    bc = Separated(0.3, 2.1)
    zs = np.array([1j, 2 + 3j, -4 + 0.1j])
    batch = weyl.m_values(delta, bc, zs)
    single = [weyl.m_function(delta, bc, z).m for z in zs]
    assert np.max(np.abs(batch - single)) <= 1e-9


def test_coupled_rejected(free01):
    with pytest.raises(PreconditionError):
        weyl.m_function(free01, PERIODIC, 1j)


def test_herglotz_residuals(free01, delta):
    assert weyl.herglotz_residual(free01, DIRICHLET, 1j) <= 1e-8
    assert weyl.herglotz_residual(delta, DIRICHLET, 2j) <= 1e-7
    assert weyl.m_function(free01, DIRICHLET, 1j).m.imag > 0
    assert weyl.m_function(delta, DIRICHLET, 1j).m.imag > 0


def test_herglotz_map(delta):
    bc = Separated(1.1, 0.2)
    re, im = np.meshgrid(np.linspace(-5, 40, 5), [0.01, 0.3, 2.0, 10.0])
    ms = weyl.m_values(delta, bc, (re + 1j * im).ravel())
    assert np.all(ms.imag > 0)


# poles and atoms -----------------------------------------------------------

def test_denominator_vanishes_at_eigenvalues(delta):
    bc = Separated(0.8, 2.5)
    ev = eigen.eigenvalues(delta, bc, -2.0, 60.0)
    for e in ev:
        fp = weyl.fundamental_pair(delta, bc.phi_a, e.lam)
        scale = max(np.abs(fp.phi(PI)))
        assert abs(weyl.m_denominator(delta, bc, e.lam)) <= 1e-8 * scale
    # conversely every sign change of the denominator is one of them
    grid = np.linspace(-2.0, 60.0, 4001)
    d = np.real(weyl.m_denominator(delta, bc, grid))
    changes = np.nonzero(np.sign(d[:-1]) != np.sign(d[1:]))[0]
    assert len(changes) == len(ev)
    for i, e in zip(changes, ev):
        assert grid[i] <= e.lam <= grid[i + 1]


def test_atom_weights_free(free0pi):
    atoms = weyl.spectral_atoms(free0pi, DIRICHLET, (0.5, 4.5))
    lams, w = zip(*atoms.atoms)
    assert np.allclose(lams, [1.0, 4.0], rtol=1e-9)
    assert w[0] == pytest.approx(2 / math.pi, rel=1e-8)
    assert w[1] == pytest.approx(8 / math.pi, rel=1e-8)


def test_atom_weights_positive(delta):
    atoms = weyl.spectral_atoms(delta, DIRICHLET, count=5)
    assert len(atoms) == 5
    assert np.all(atoms.weights > 0) and np.all(np.isfinite(atoms.weights))
    assert np.all(np.diff(atoms.lams) > 0)


def test_boundary_behaviour_finds_spectrum(delta):
    bc = Separated(0.5, 1.0)
    atoms = weyl.spectral_atoms(delta, bc, (-1.0, 40.0))
    eps = 1e-6
    wbar = atoms.weights.min()
    cand = np.sort(np.concatenate([np.linspace(-1.0, 40.0, 411), atoms.lams]))
    vals = eps * np.imag(weyl.m_values(delta, bc, cand + 1j * eps))
    found = cand[vals >= 0.5 * wbar]
    assert np.allclose(np.sort(found), atoms.lams, rtol=1e-12)


# Stieltjes inversion -------------------------------------------------------

def test_stieltjes_single_atom(free0pi):
    assert abs(weyl.stieltjes_inversion(free0pi, DIRICHLET, 0.5, 1.5) - 2 / math.pi) <= 1e-3


def test_stieltjes_empty_window(free0pi):
    assert abs(weyl.stieltjes_inversion(free0pi, DIRICHLET, 1.5, 3.5)) <= 1e-3


def test_stieltjes_two_atoms(free0pi):
    assert abs(weyl.stieltjes_inversion(free0pi, DIRICHLET, 0.5, 4.5) - 10 / math.pi) <= 1e-3


def test_stieltjes_matches_atoms(delta):
    bc = Separated(0.5, 1.0)
    atoms = weyl.spectral_atoms(delta, bc, (-1.0, 12.0))
    got = weyl.stieltjes_inversion(delta, bc, -1.0, 12.0)
    assert abs(got - atoms.total()) <= 2e-3


def test_stieltjes_rejects_atom_on_edge(free0pi):
    with pytest.raises(PreconditionError):
        weyl.stieltjes_inversion(free0pi, DIRICHLET, 0.5, 1.0)


# transform -----------------------------------------------------------------

def test_transform_of_sine(free0pi):
    atoms = weyl.spectral_atoms(free0pi, DIRICHLET, count=2)
    fh = weyl.spectral_transform(free0pi, DIRICHLET, "sin(x)", atoms)
    assert fh[0] == pytest.approx(math.pi / 2, abs=1e-10)
    assert abs(fh[1]) <= 1e-10


def test_parseval_and_inversion(free0pi):
    atoms = weyl.spectral_atoms(free0pi, DIRICHLET, count=50)
    f = lambda x: x * (PI - x)
    assert weyl.parseval_defect(free0pi, DIRICHLET, f, atoms) <= 1e-4
    fh = weyl.spectral_transform(free0pi, DIRICHLET, f, atoms)
    assert abs(weyl.inverse_transform(atoms, fh, HALF_PI)[0] - f(HALF_PI)) <= 1e-4


def test_parseval_delta(delta):
    atoms = weyl.spectral_atoms(delta, Separated(0.2, 2.8), count=50)
    assert weyl.parseval_defect(delta, Separated(0.2, 2.8), "x^2 * (4 - x)", atoms) <= 1e-3


def test_transform_green_identity(free0pi, delta):
    atoms = weyl.spectral_atoms(free0pi, DIRICHLET, count=10)
    assert weyl.transform_green_identity(free0pi, DIRICHLET, -1.0, PI / 3, atoms) <= 1e-7
    assert weyl.transform_green_identity(free0pi, DIRICHLET, -1.0, PI / 3, atoms, quasi=True) <= 1e-6
    datoms = weyl.spectral_atoms(delta, DIRICHLET, count=10)
    assert weyl.transform_green_identity(delta, DIRICHLET, 2j, 1.0, datoms) <= 1e-6
