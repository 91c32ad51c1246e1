import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from quasisl import ivp
from quasisl.boundary import (ANTIPERIODIC, DIRICHLET, PERIODIC, Coupled, Separated,
                              as_matrix_pair, bc_residual, coupled_discriminant, parse_bc,
                              validate_matrix_pair)
from quasisl.errors import NotSelfAdjoint, PreconditionError, RankDeficient

from conftest import delta_problem

sl2 = st.tuples(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3)).filter(
    lambda t: abs(t[0]) > 0.1).map(lambda t: ((t[0], t[1]), (t[2], (1 + t[1] * t[2]) / t[0])))


def test_dirichlet_residual():
    assert np.all(bc_residual(DIRICHLET, (0, 1), (0, -1)) == 0)


def test_neumann_residual_first_component():
    bc = Separated(math.pi / 2, 0.3)
    res = bc_residual(bc, (0.7, 2.5), (1.0, 1.0))
    assert res[0] == pytest.approx(-2.5, abs=1e-15)


def test_periodic_residual():
    assert np.all(bc_residual(PERIODIC, (1.5, -2j), (1.5, -2j)) == 0)


def test_coupled_residual_definition():
    bc = Coupled(0.4, ((2.0, 1.0), (1.0, 1.0)))
    va = np.array([0.3, -1.1])
    vb = np.exp(0.4j) * bc.matrix @ va
    assert np.max(np.abs(bc_residual(bc, va, vb))) <= 1e-15


def test_det_check():
    with pytest.raises(PreconditionError):
        Coupled(0.0, ((1.0, 1.0), (0.0, 1.0 + 1e-9)))


def test_angles_reduced_with_warning():
    with pytest.warns(UserWarning):
        bc = Separated(math.pi + 0.25, -0.5)
    assert bc.phi_a == pytest.approx(0.25) and bc.phi_b == pytest.approx(math.pi - 0.5)


def test_parse_named_inline_file(tmp_path):
    assert parse_bc("Periodic") == PERIODIC
    bc = parse_bc('{"type": "coupled", "phi": 0.5, "R": [[1, 2], [0, 1]]}')
    assert bc.phi == 0.5 and bc.R == ((1.0, 2.0), (0.0, 1.0))
    path = tmp_path / "bc.json"
    path.write_text(json.dumps(Separated(0.1, 0.2).to_json()))
    assert parse_bc(str(path)) == Separated(0.1, 0.2)


# matrix pairs --------------------------------------------------------------

def test_matrix_pair_periodic():
    validate_matrix_pair(np.eye(2), np.eye(2))


def test_matrix_pair_separated():
    validate_matrix_pair([[1, 0], [0, 0]], [[0, 0], [0, 1]])


def test_matrix_pair_rank_deficient():
    with pytest.raises(RankDeficient):
        validate_matrix_pair([[1, 0], [0, 0]], [[1, 0], [0, 0]])


def test_matrix_pair_not_self_adjoint():
    with pytest.raises(NotSelfAdjoint):
        validate_matrix_pair([[2, 0], [0, 1]], np.eye(2))


@given(sl2, st.floats(0, 3.1))
def test_coupled_pairs_are_self_adjoint(R, phi):
    bc = Coupled(phi, R)
    pair = as_matrix_pair(bc)
    validate_matrix_pair(pair.B_a, pair.B_b, tol=1e-10)


@given(st.floats(0, 3.14), st.floats(0, 3.14))
def test_separated_pairs_are_self_adjoint(pa, pb):
    pair = as_matrix_pair(Separated(pa, pb))
    validate_matrix_pair(pair.B_a, pair.B_b)


# discriminant --------------------------------------------------------------

def test_periodic_discriminant(free01):
    lams = np.array([0.3, 5.0, 17.0, 4 * math.pi ** 2])
    d = coupled_discriminant(free01, PERIODIC, lams)
    assert np.max(np.abs(d - (2 * np.cos(np.sqrt(lams)) - 2))) <= 1e-9
    assert abs(d[-1]) <= 1e-9


def test_antiperiodic_discriminant(free01):
    d = coupled_discriminant(free01, ANTIPERIODIC, math.pi ** 2)
    assert abs(d) <= 1e-9
    assert coupled_discriminant(free01, ANTIPERIODIC, 3.0) == pytest.approx(-2 * math.cos(math.sqrt(3)) - 2,
                                                                             abs=1e-10)


def test_quarter_phase_discriminant(free01):
    bc = Coupled(math.pi / 2, ((1, 0), (0, 1)))
    assert abs(coupled_discriminant(free01, bc, (math.pi / 2) ** 2)) <= 1e-9
    lam = 3.7
    assert coupled_discriminant(free01, bc, lam) == pytest.approx(2 * math.cos(math.sqrt(lam)), abs=1e-10)


def test_discriminant_real_and_matches_determinant():
    P = delta_problem()
    bc = Coupled(0.7, ((2.0, 0.5), (-1.0, 0.25)))
    lams = np.linspace(-1, 30, 200)
    T, _ = ivp.transfer_matrices(P, lams)
    d = coupled_discriminant(P, bc, lams)
    det = np.linalg.det(bc.coupling[None] - T)
    # det(e^{i phi} R - T) = -e^{i phi} Delta
    assert np.max(np.abs(det + np.exp(0.7j) * d)) <= 1e-9
    assert np.max(np.abs(np.imag(np.einsum("ij,nji->n", np.linalg.inv(bc.matrix), T)))) <= 1e-12


@given(st.floats(0, 3.1), st.floats(0, 3.1), st.floats(-2, 2), st.floats(-2, 2))
def test_separated_scaling_invariance(pa, pb, u, u1):
    bc = Separated(pa, pb)
    r1 = bc_residual(bc, (u, u1), (u1, u))
    r7 = bc_residual(bc, (7 * u, 7 * u1), (7 * u1, 7 * u))
    assert np.allclose(r7, 7 * r1, rtol=1e-14, atol=1e-14)
    assert np.array_equal(np.abs(r1) == 0, np.abs(r7) == 0)
