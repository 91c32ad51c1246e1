"""Self-adjoint boundary conditions for regular endpoints.

Separated:  u(a) cos(phi_a) - u1(a) sin(phi_a) = 0,  same at b with phi_b.
Coupled:    (u(b), u1(b)) = e^{i phi} R (u(a), u1(a)),  R real, det R = 1.
"""

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import ivp
from .errors import NotSelfAdjoint, PreconditionError, RankDeficient

J = np.array([[0.0, -1.0], [1.0, 0.0]])


def _reduce_angle(phi, name):
    phi = float(phi)
    if not math.isfinite(phi):
        raise PreconditionError(f"{name} must be finite")
    if 0.0 <= phi < math.pi:
        return phi
    red = math.fmod(phi, math.pi)
    if red < 0:
        red += math.pi
    if red >= math.pi:
        red = 0.0
    warnings.warn(f"{name} = {phi!r} reduced mod pi to {red!r}", stacklevel=3)
    return red


@dataclass(frozen=True)
class Separated:
    phi_a: float
    phi_b: float

    def __post_init__(self):
        object.__setattr__(self, "phi_a", _reduce_angle(self.phi_a, "phi_a"))
        object.__setattr__(self, "phi_b", _reduce_angle(self.phi_b, "phi_b"))

    @property
    def is_real(self):
        return True

    def to_json(self):
        return {"type": "separated", "phi_a": self.phi_a, "phi_b": self.phi_b}


@dataclass(frozen=True)
class Coupled:
    phi: float
    R: tuple

    def __post_init__(self):
        object.__setattr__(self, "phi", _reduce_angle(self.phi, "phi"))
        R = np.asarray(self.R, dtype=float)
        if R.shape != (2, 2) or not np.all(np.isfinite(R)):
            raise PreconditionError("R must be a finite real 2x2 matrix")
        det = R[0, 0] * R[1, 1] - R[0, 1] * R[1, 0]
        if abs(det - 1.0) > 1e-12:
            raise PreconditionError(f"det R must be 1 (got {det!r})")
        object.__setattr__(self, "R", tuple(tuple(float(v) for v in row) for row in R))

    @property
    def matrix(self):
        return np.array(self.R, dtype=float)

    @property
    def is_real(self):
        return self.phi == 0.0

    @property
    def coupling(self):
        """The complex matrix e^{i phi} R."""
        return np.exp(1j * self.phi) * self.matrix

    def to_json(self):
        return {"type": "coupled", "phi": self.phi, "R": [list(r) for r in self.R]}


DIRICHLET = Separated(0.0, 0.0)
NEUMANN = Separated(math.pi / 2, math.pi / 2)
PERIODIC = Coupled(0.0, ((1.0, 0.0), (0.0, 1.0)))
ANTIPERIODIC = Coupled(0.0, ((-1.0, 0.0), (0.0, -1.0)))

NAMED = {
    "dirichlet": DIRICHLET,
    "neumann": NEUMANN,
    "dirichlet-neumann": Separated(0.0, math.pi / 2),
    "neumann-dirichlet": Separated(math.pi / 2, 0.0),
    "periodic": PERIODIC,
    "antiperiodic": ANTIPERIODIC,
}


def bc_from_json(obj):
    if isinstance(obj, str):
        obj = json.loads(obj)
    kind = obj.get("type")
    if kind == "separated":
        return Separated(obj["phi_a"], obj["phi_b"])
    if kind == "coupled":
        return Coupled(obj.get("phi", 0.0), obj["R"])
    raise PreconditionError(f"unknown boundary condition type {kind!r}")


def parse_bc(text):
    """A named condition (dirichlet, neumann, periodic, ...), inline JSON, or
    a path to a JSON file."""
    key = text.strip().lower()
    if key in NAMED:
        return NAMED[key]
    if key.startswith("{"):
        return bc_from_json(text)
    with open(text) as fh:
        return bc_from_json(json.load(fh))


def _vec(state):
    if isinstance(state, ivp.QuasiState):
        return np.array([state.u, state.u1], dtype=complex)
    return np.asarray(state, dtype=complex)


def bc_residual(bc, state_a, state_b):
    """Length-2 residual vector of the boundary condition."""
    va, vb = _vec(state_a), _vec(state_b)
    if isinstance(bc, Separated):
        return np.array([va[0] * math.cos(bc.phi_a) - va[1] * math.sin(bc.phi_a),
                         vb[0] * math.cos(bc.phi_b) - vb[1] * math.sin(bc.phi_b)])
    return vb - bc.coupling @ va


@dataclass(frozen=True)
class MatrixPairBC:
    B_a: np.ndarray
    B_b: np.ndarray


def validate_matrix_pair(B_a, B_b, tol=1e-12):
    """Check rank(B_a | B_b) = 2 and B_a J B_a* = B_b J B_b*."""
    Ba = np.asarray(B_a, dtype=complex)
    Bb = np.asarray(B_b, dtype=complex)
    if Ba.shape != (2, 2) or Bb.shape != (2, 2):
        raise PreconditionError("B_a and B_b must be 2x2")
    if np.linalg.matrix_rank(np.hstack([Ba, Bb]), tol=1e-12) < 2:
        raise RankDeficient("rank(B_a | B_b) < 2")
    res = np.linalg.norm(Ba @ J @ Ba.conj().T - Bb @ J @ Bb.conj().T)
    if res > tol:
        raise NotSelfAdjoint(res)
    return MatrixPairBC(Ba, Bb)


def as_matrix_pair(bc):
    """Matrices (B_a, B_b) with B_a (u(a), u1(a)) = B_b (u(b), u1(b))
    encoding ``bc``."""
    if isinstance(bc, Separated):
        Ba = np.array([[math.cos(bc.phi_a), -math.sin(bc.phi_a)], [0, 0]], dtype=complex)
        Bb = np.array([[0, 0], [math.cos(bc.phi_b), -math.sin(bc.phi_b)]], dtype=complex)
        return MatrixPairBC(Ba, -Bb)
    return MatrixPairBC(bc.coupling, np.eye(2, dtype=complex))


def discriminant_from_T(bc, T):
    """tr(adj(R) T) - 2 cos(phi) for transfer matrices T (..., 2, 2)."""
    R = bc.matrix
    adj = np.array([[R[1, 1], -R[0, 1]], [-R[1, 0], R[0, 0]]])
    return np.einsum("ij,...ji->...", adj, T) - 2 * math.cos(bc.phi)


def coupled_discriminant(problem, bc, lam):
    """Delta(lambda) = tr(adj(R) T(lambda)) - 2 cos(phi); real for real lambda,
    zero exactly on the spectrum of the coupled problem."""
    if not isinstance(bc, Coupled):
        raise PreconditionError("coupled_discriminant needs a Coupled condition")
    lam_arr = np.atleast_1d(np.asarray(lam, dtype=float))
    T, _ = ivp.transfer_matrices(problem, lam_arr)
    d = np.real(discriminant_from_T(bc, T))
    return d if np.ndim(lam) else float(d[0])
