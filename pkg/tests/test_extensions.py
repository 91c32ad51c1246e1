import math

import numpy as np
import pytest
from numpy.polynomial import polynomial as npoly

from quasisl import eigen
from quasisl.boundary import ANTIPERIODIC, DIRICHLET, NEUMANN, PERIODIC, Coupled, Separated
from quasisl.coeffs import make_problem
from quasisl.errors import ComplexCouplingUnsupported, DomainViolation, NotStrictlyPositive
from quasisl.extensions import (IMPROVING, NOT_PRESERVING, classify_positivity, extension_ordering_check,
                                form_value, friedrichs_bc, kernel_dim, krein_closed_form_q0, krein_kernel_dim,
                                krein_matrix)
from quasisl.green import apply_resolvent, green, positivity_scan

from conftest import PI, delta_problem, random_problem

ROBIN = Separated(math.pi / 4, math.pi / 4)
E = math.e
S1_CLOSED = np.array([[1 / E, (E ** 2 - 1) / (2 * E)], [0.0, E]])


def unit_s_problem():
    return make_problem(0.0, 1.0, s="1")


def random_ps_problem(rng, n_pieces=3):
    cuts = np.sort(rng.uniform(0, 1, n_pieces - 1))
    bps = np.concatenate([[0.0], cuts, [1.0]])

    def pieces(lo, hi):
        v = rng.uniform(lo, hi, n_pieces)
        return [{"from": float(bps[i]), "to": float(bps[i + 1]), "expr": repr(float(v[i]))} for i in range(n_pieces)]

    return make_problem(0.0, 1.0, p=pieces(0.5, 2.0), s=pieces(-1.0, 1.0), r=pieces(0.5, 2.0))


# Friedrichs ----------------------------------------------------------------

def test_friedrichs_is_dirichlet(rng):
    for P in (make_problem(0.0, 1.0), delta_problem(), random_problem(rng)):
        assert friedrichs_bc(P) == Separated(0.0, 0.0)


def test_friedrichs_bottom(free01):
    assert eigen.lower_bound(free01, friedrichs_bc(free01)) == pytest.approx(math.pi ** 2, rel=1e-9)


# Krein ---------------------------------------------------------------------

def test_krein_free(free01):
    kd = krein_matrix(free01)
    assert np.max(np.abs(kd.R - np.array([[1, 1], [0, 1]]))) <= 1e-8
    assert abs(kd.det() - 1) <= 1e-9
    assert kd.certificate == pytest.approx(math.pi ** 2 / 2, rel=1e-9)
    xs = np.linspace(0, 1, 11)
    assert np.max(np.abs(kd.u1(xs)[0] - xs)) <= 1e-10
    assert np.max(np.abs(kd.u2(xs)[0] - (1 - xs))) <= 1e-10


def test_krein_unit_s():
    P = unit_s_problem()
    kd = krein_matrix(P)
    assert np.max(np.abs(kd.R - S1_CLOSED)) <= 1e-8
    assert abs(kd.det() - 1) <= 1e-9
    assert np.max(np.abs(krein_closed_form_q0(P) - S1_CLOSED)) <= 1e-12


def test_closed_form_free(free01):
    assert np.max(np.abs(krein_closed_form_q0(free01) - np.array([[1, 1], [0, 1]]))) <= 1e-14


def test_closed_form_matches_shooting(rng):
    for _ in range(5):
        P = random_ps_problem(rng)
        assert np.max(np.abs(krein_matrix(P).R - krein_closed_form_q0(P))) <= 1e-8


def test_krein_requires_positivity():
    P = make_problem(0.0, 1.0, q="-20")
    with pytest.raises(NotStrictlyPositive):
        krein_matrix(P)


def test_kernel_dims(free01):
    assert krein_kernel_dim(free01) == 2
    assert krein_kernel_dim(unit_s_problem()) == 2
    assert kernel_dim(free01, DIRICHLET) == 0
    assert kernel_dim(free01, NEUMANN) == 1
    assert kernel_dim(free01, PERIODIC) == 1


def test_krein_ground_state_degenerate(rng):
    for P in (make_problem(0.0, 1.0), delta_problem(), random_ps_problem(rng)):
        kd = krein_matrix(P)
        ev = eigen.eigenvalues(P, kd.bc, count=2)
        assert abs(ev[0].lam) <= 1e-8 and ev[0].multiplicity == 2
        assert eigen.eigenvalues(P, kd.bc, -10 * kd.certificate, -1e-6) == []


# forms ---------------------------------------------------------------------

def test_form_sine(free01):
    f = (lambda x: np.sin(math.pi * x), lambda x: math.pi * np.cos(math.pi * x))
    fv = form_value(free01, DIRICHLET, f)
    assert fv.value == pytest.approx(math.pi ** 2 / 2, rel=1e-10)
    assert fv.boundary == 0.0


@pytest.mark.parametrize("bc", [Separated(0.4, 2.0), PERIODIC, Coupled(0.0, ((2.0, 0.5), (-1.0, 0.25)))],
                         ids=["separated", "periodic", "coupled"])
def test_form_of_eigenfunctions(bc):
    P = delta_problem()
    for e in eigen.eigenvalues(P, bc, count=4):
        for u in e.eigenfunctions:
            assert form_value(P, bc, u).value == pytest.approx(e.lam, rel=1e-6, abs=1e-8)


def test_form_krein_eigenfunctions(free01):
    kd = krein_matrix(free01)
    for e in eigen.eigenvalues(free01, kd.bc, count=4):
        for u in e.eigenfunctions:
            assert form_value(free01, kd.bc, u).value == pytest.approx(e.lam, rel=1e-6, abs=1e-8)


def test_rayleigh_bound(rng):
    P = delta_problem()
    c = 0.5 * PI
    lam1 = eigen.lower_bound(P, ROBIN)
    for _ in range(10):
        coef = rng.normal(size=5)
        der = npoly.polyder(coef)
        u = lambda x: npoly.polyval(x, coef)
        u1 = lambda x: npoly.polyval(x, der) + np.where(x >= c, 1.0, 0.0) * npoly.polyval(x, coef)
        fv = form_value(P, ROBIN, (u, u1))
        xs = np.linspace(0, PI, 20001)
        norm = np.trapezoid(u(xs) ** 2, xs)
        assert fv.value / norm >= lam1 - 1e-8


@pytest.mark.parametrize("bc", [DIRICHLET, ROBIN, PERIODIC, Coupled(0.0, ((2.0, 0.5), (-1.0, 0.25)))],
                         ids=["dirichlet", "robin", "periodic", "coupled"])
def test_form_matches_resolvent(bc):
    # f = R_lambda g gives <f, S f> = <f, g> + lambda ||f||^2
    P = delta_problem()
    lam = eigen.lower_bound(P, bc) - 1.0
    f = apply_resolvent(green(P, bc, lam), "1 + x*cos(x)")
    g = lambda x: 1 + x * np.cos(x)
    from quasisl.coeffs import quad
    fg = quad(lambda x: np.real(f(x)[0]) * g(x), 0.0, PI, points=P.breakpoints)
    ff = quad(lambda x: np.abs(f(x)[0]) ** 2, 0.0, PI, points=P.breakpoints)
    want = fg + lam * ff
    assert form_value(P, bc, f).value == pytest.approx(want, rel=1e-6)


def test_form_domain_checks(free01):
    f = (lambda x: 1 + x, lambda x: np.ones_like(x))
    with pytest.raises(DomainViolation):
        form_value(free01, DIRICHLET, f)
    with pytest.raises(DomainViolation):
        form_value(free01, PERIODIC, f)
    form_value(free01, Coupled(0.0, ((2.0, 0.0), (0.3, 0.5))), f)


# classification ------------------------------------------------------------

def test_classification_examples(free01):
    assert classify_positivity(PERIODIC) == IMPROVING
    assert classify_positivity(ANTIPERIODIC) == NOT_PRESERVING
    assert classify_positivity(krein_matrix(free01).bc) == NOT_PRESERVING
    assert classify_positivity(ROBIN) == IMPROVING
    assert classify_positivity(Coupled(0.0, ((0.5, -1.0), (1.0, 0.0)))) == IMPROVING
    with pytest.raises(ComplexCouplingUnsupported):
        classify_positivity(Coupled(1.0, ((1, 0), (0, 1))))


@pytest.mark.parametrize("bc", [DIRICHLET, NEUMANN, ROBIN, PERIODIC, ANTIPERIODIC,
                                Coupled(0.0, ((0.5, -1.0), (1.0, 0.0))),
                                Coupled(0.0, ((2.0, 0.0), (0.3, 0.5))),
                                Coupled(0.0, ((1.0, 0.7), (0.0, 1.0)))],
                         ids=["dirichlet", "neumann", "robin", "periodic", "antiperiodic", "r12neg", "r12zero", "r12pos"])
def test_classification_matches_kernel_sign(free01, bc):
    lam = eigen.lower_bound(free01, bc) - 1.0
    rep = positivity_scan(free01, bc, lam)
    if classify_positivity(bc) == IMPROVING:
        assert rep.interior_min > 0 and rep.min >= -1e-12
    else:
        assert rep.min < 0


def test_robin_quarter_bottom_is_minus_one(free01):
    # u = u1 at both ends: e^x is an eigenfunction at -1 and nothing lies lower
    assert eigen.lower_bound(free01, ROBIN) == pytest.approx(-1.0, abs=1e-10)
    rep = positivity_scan(free01, ROBIN, -1.5)
    assert rep.interior_min > 0


# ordering ------------------------------------------------------------------

def test_ordering_free(free01):
    rep = extension_ordering_check(free01, [NEUMANN, PERIODIC, friedrichs_bc(free01)], n=3)
    assert np.allclose(rep.krein, [0, 0, 4 * math.pi ** 2], atol=1e-7)
    assert np.allclose(rep.friedrichs, [math.pi ** 2, 4 * math.pi ** 2, 9 * math.pi ** 2], rtol=1e-9)
    neumann = [r["lambda_bc"] for r in rep.rows if r["bc"] == NEUMANN]
    assert np.allclose(neumann, [0, math.pi ** 2, 4 * math.pi ** 2], atol=1e-7)
    assert rep.ok and not rep.excluded
    own = [r for r in rep.rows if r["bc"] == DIRICHLET]
    assert all(r["lambda_bc"] == r["lambda_F"] for r in own)


def test_ordering_excludes_negative(free01):
    rep = extension_ordering_check(free01, [Separated(2.5, 0.6)], n=3)
    assert rep.excluded and not rep.rows


def test_ordering_random(rng):
    P = random_ps_problem(rng)
    rep = extension_ordering_check(P, [NEUMANN, ROBIN, PERIODIC], n=4)
    assert rep.ok
