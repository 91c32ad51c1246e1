"""Friedrichs and Krein-von Neumann extensions, quadratic forms of the
self-adjoint realisations, positivity classification and extension
ordering."""

import math
from dataclasses import dataclass, field

import numpy as np

from . import ivp
from .boundary import Coupled, Separated
from .eigen import char_separated, eigenvalues, lower_bound
from .errors import (ComplexCouplingUnsupported, DegenerateShooting, DomainViolation,
                     HypothesisViolation, NegativeExtension, NotStrictlyPositive,
                     PreconditionError)
from .quadrature import Cumulative, merge_edges

IMPROVING = "Improving"
NOT_PRESERVING = "NotPreserving"
RANK_TOL = 1e-8
DOMAIN_TOL = 1e-10


def _require(problem):
    if not problem.regular:
        raise PreconditionError("extensions are implemented for regular problems only")
    if problem.p_sign() != 1:
        raise HypothesisViolation("extensions need p > 0")


def friedrichs_bc(problem):
    """The Friedrichs extension of a regular problem: Dirichlet at both ends."""
    _require(problem)
    return Separated(0.0, 0.0)


@dataclass
class KreinData:
    R: np.ndarray
    u1: object
    u2: object
    certificate: float
    dirichlet_bottom: float
    T0: np.ndarray

    @property
    def bc(self):
        # R_K carries the integrator error in its determinant (~1e-11); the
        # coupled condition wants det 1 to 1e-12, so rescale onto SL2
        return Coupled(0.0, self.R / math.sqrt(self.det()))

    def det(self):
        return float(np.linalg.det(self.R))

    def to_json(self):
        return {"R_K": self.R.tolist(), "det": self.det(), "certificate": self.certificate,
                "dirichlet_bottom": self.dirichlet_bottom}


def krein_matrix(problem, grid_n=256):
    """Boundary matrix of the Krein-von Neumann extension.

    u1, u2 solve tau u = 0 with u1(a) = 0, u1(b) = 1 and u2(a) = 1, u2(b) = 0;
    the matrix is assembled from their quasi-derivatives at a and b.
    """
    _require(problem)
    lam1 = lower_bound(problem, Separated(0.0, 0.0))
    eps = 0.5 * lam1
    if not eps > 0:
        raise NotStrictlyPositive(f"lowest Dirichlet eigenvalue {lam1:.6g} is not positive")
    a, b = problem.a, problem.b
    v1, v2 = ivp.fundamental_system(problem, 0.0, a)
    T = np.real(np.array([[v1.u(b), v2.u(b)], [v1.u1(b), v2.u1(b)]]))
    if abs(T[0, 1]) <= 1e-14 * np.abs(T).max():
        raise DegenerateShooting("0 is a Dirichlet eigenvalue")
    u1 = v2.scaled(1.0 / T[0, 1])
    u2 = v1.plus(v2, -T[0, 0] / T[0, 1])
    d1a, d1b = u1.u1(a).real, u1.u1(b).real
    d2a, d2b = u2.u1(a).real, u2.u1(b).real
    if abs(d1a) <= 1e-14 * max(abs(d1b), abs(d2a), abs(d2b), 1.0):
        raise DegenerateShooting("u1^[1](a) vanishes")
    R = np.array([[-d2a, 1.0], [d1a * d2b - d1b * d2a, d1b]]) / d1a
    xs = np.linspace(a, b, grid_n + 2)[1:-1]
    if np.any(np.real(u1.u(xs)) <= 0) or np.any(np.real(u2.u(xs)) <= 0):
        raise NotStrictlyPositive("u1 or u2 is not positive inside (a, b)")
    return KreinData(R, u1, u2, eps, lam1, T)


def _cumulative_s(problem, n_edges=65):
    edges = merge_edges(np.linspace(problem.a, problem.b, n_edges), problem.breakpoints,
                        lo=problem.a, hi=problem.b)
    return Cumulative(problem.s, edges, refine=True), edges


def krein_closed_form_q0(problem):
    """The Krein matrix for q = 0 from integrals of s and 1/p:

        [[e^-S, e^-S I], [0, e^S]],  S = int_a^b s,  I = int_a^b p^-1 e^{2 int_a^t s} dt.
    """
    if not problem.q.is_zero():
        raise PreconditionError("closed form needs q = 0")
    Sc, edges = _cumulative_s(problem)
    S = float(Sc.total)
    I = float(Cumulative(lambda t: np.exp(2 * Sc(t)) / problem.p(t), edges, refine=True).total)
    return np.array([[math.exp(-S), math.exp(-S) * I], [0.0, math.exp(S)]])


def kernel_dim(problem, bc):
    """Dimension of the space of solutions of tau u = 0 obeying ``bc``."""
    if isinstance(bc, Separated):
        d = char_separated(problem, bc.phi_a, bc.phi_b, 0.0)
        return 1 if abs(d) <= RANK_TOL else 0
    T = ivp.transfer_matrix(problem, 0.0).matrix
    sv = np.linalg.svd(bc.coupling - T, compute_uv=False)
    return int(2 - np.sum(sv > RANK_TOL * max(1.0, np.abs(T).max())))


def krein_kernel_dim(problem, data=None):
    data = krein_matrix(problem) if data is None else data
    return kernel_dim(problem, data.bc)


@dataclass
class FormValue:
    bc: object
    value: float
    kinetic: float
    potential: float
    boundary: float
    f_a: complex = 0j
    f_b: complex = 0j


def _check_real(bc):
    if isinstance(bc, Coupled) and bc.phi != 0.0:
        raise ComplexCouplingUnsupported("only real coupled conditions (phi = 0) are supported")


def _pair(f):
    if isinstance(f, tuple):
        fu, f1 = f
        return lambda x: (fu(x), f1(x)), None
    return f, getattr(f, "edges", None)


def form_value(problem, bc, f):
    """Quadratic form of the realisation with condition ``bc`` at f.

    ``f`` is a trajectory-like object (``f(x)`` returns (u, u^[1])) or a
    pair of vectorised callables (u, u^[1]).
    """
    _check_real(bc)
    fn, edge_fn = _pair(f)
    a, b = problem.a, problem.b
    grid = np.linspace(a, b, 65)
    edges = merge_edges(grid, problem.breakpoints, edge_fn() if edge_fn else grid, lo=a, hi=b)

    def kin(x):
        return np.abs(fn(x)[1]) ** 2 / problem.p(x)

    def pot(x):
        return problem.q(x) * np.abs(fn(x)[0]) ** 2

    K = float(np.real(Cumulative(kin, edges, refine=True).total))
    V = float(np.real(Cumulative(pot, edges, refine=True).total))
    fa = complex(np.atleast_1d(fn(np.array([a]))[0])[0])
    fb = complex(np.atleast_1d(fn(np.array([b]))[0])[0])
    scale = max(1.0, abs(fa), abs(fb))
    if isinstance(bc, Separated):
        B = 0.0
        if bc.phi_a == 0.0:
            if abs(fa) > DOMAIN_TOL * scale:
                raise DomainViolation(f"f(a) = {fa:.3e} must vanish")
        else:
            B += abs(fa) ** 2 / math.tan(bc.phi_a)
        if bc.phi_b == 0.0:
            if abs(fb) > DOMAIN_TOL * scale:
                raise DomainViolation(f"f(b) = {fb:.3e} must vanish")
        else:
            B -= abs(fb) ** 2 / math.tan(bc.phi_b)
    else:
        R = bc.matrix
        if R[0, 1] != 0.0:
            B = -(R[0, 0] * abs(fa) ** 2 - 2 * (np.conj(fa) * fb).real + R[1, 1] * abs(fb) ** 2) / R[0, 1]
        else:
            if abs(fb - R[0, 0] * fa) > DOMAIN_TOL * scale:
                raise DomainViolation(f"f(b) = {fb:.3e} must equal R11 f(a) = {R[0, 0] * fa:.3e}")
            B = -R[1, 0] * R[0, 0] * abs(fa) ** 2
    B = float(B)
    return FormValue(bc, K + V + B, K, V, B, fa, fb)


def classify_positivity(bc):
    """Improving for separated conditions; for real coupled ones iff
    R12 < 0, or R12 = 0 and R11 > 0; otherwise NotPreserving."""
    _check_real(bc)
    if isinstance(bc, Separated):
        return IMPROVING
    R = bc.matrix
    if R[0, 1] < 0 or (R[0, 1] == 0 and R[0, 0] > 0):
        return IMPROVING
    return NOT_PRESERVING


def _expanded(problem, bc, n):
    out = []
    for e in eigenvalues(problem, bc, count=n):
        out.extend([e.lam] * e.multiplicity)
    return out[:n]


@dataclass
class OrderingReport:
    krein: list
    friedrichs: list
    rows: list = field(default_factory=list)
    excluded: list = field(default_factory=list)
    tol: float = 1e-8

    @property
    def ok(self):
        return all(r["ok"] for r in self.rows)


def extension_ordering_check(problem, bc_list, n=3, tol=1e-8):
    """Check lambda_k(S_K) <= lambda_k(bc) <= lambda_k(S_F) for k <= n, for
    each boundary condition giving a nonnegative operator."""
    kd = krein_matrix(problem)
    lk = _expanded(problem, kd.bc, n)
    lf = _expanded(problem, friedrichs_bc(problem), n)
    rep = OrderingReport(lk, lf, tol=tol)
    for bc in bc_list:
        lb = _expanded(problem, bc, n)
        if lb[0] < -tol:
            rep.excluded.append({"bc": bc, "reason": str(NegativeExtension(f"lowest eigenvalue {lb[0]:.6g} < 0"))})
            continue
        for k in range(n):
            ok = lk[k] - tol * (1 + abs(lk[k])) <= lb[k] <= lf[k] + tol * (1 + abs(lf[k]))
            rep.rows.append({"bc": bc, "n": k + 1, "lambda_K": lk[k], "lambda_bc": lb[k],
                             "lambda_F": lf[k], "ok": bool(ok)})
    return rep
