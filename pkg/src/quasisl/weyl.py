"""Weyl solutions, the m-function and the (atomic) spectral measure of a
regular problem with separated boundary conditions."""

import math
from dataclasses import dataclass

import numpy as np

from . import ivp
from .boundary import Separated
from .coeffs import piecewise_from_spec
from .eigen import eigenvalues
from .errors import AtEigenvalue, PreconditionError
from .green import SINGULAR_REL, apply_resolvent, green_separated
from .quadrature import adaptive_gk, check_extrapolation, panel_nodes, richardson

DEFAULT_EPS = tuple(2.0 ** -k for k in range(4, 13))


def _require(problem, bc):
    if not problem.regular:
        raise PreconditionError("the m-function is implemented for regular problems only")
    if not isinstance(bc, Separated):
        raise PreconditionError("m-functions need separated boundary conditions")


def _pair_init(phi_a):
    c, s = math.cos(phi_a), math.sin(phi_a)
    # columns: theta, phi
    return np.array([[c, s], [-s, c]], dtype=complex)


@dataclass
class FundamentalPair:
    z: complex
    theta: object
    phi: object


def fundamental_pair(problem, phi_a, z):
    """theta, phi with theta(a) = phi^[1](a) = cos(phi_a) and
    -theta^[1](a) = phi(a) = sin(phi_a); W(theta, phi) = 1."""
    sol = ivp.solve_columns(problem, [z, z], _pair_init(phi_a), problem.a)
    return FundamentalPair(complex(z), ivp.Trajectory(sol, [1, 0]), ivp.Trajectory(sol, [0, 1]))


@dataclass
class WeylData:
    z: complex
    m: complex
    psi: object
    theta: object
    phi: object

    def to_json(self):
        return {"z": [self.z.real, self.z.imag], "m": [self.m.real, self.m.imag]}


def _bc_b(state, phi_b):
    return state[0] * math.cos(phi_b) - state[1] * math.sin(phi_b)


def m_function(problem, bc, z):
    """m(z) = -BC_b(theta_z) / BC_b(phi_z) and psi_z = theta_z + m phi_z."""
    _require(problem, bc)
    fp = fundamental_pair(problem, bc.phi_a, z)
    b = problem.b
    th, ph = np.array(fp.theta(b)), np.array(fp.phi(b))
    den = _bc_b(ph, bc.phi_b)
    scale = max(np.abs(ph).max(), np.abs(th).max())
    if abs(den) <= SINGULAR_REL * scale:
        raise AtEigenvalue(f"z = {z} is an eigenvalue (denominator {abs(den):.3e})")
    m = complex(-_bc_b(th, bc.phi_b) / den)
    return WeylData(complex(z), m, fp.theta.plus(fp.phi, m), fp.theta, fp.phi)


def m_values(problem, bc, zs):
    """m at many z from one batched sweep of transfer matrices."""
    _require(problem, bc)
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    T, _ = ivp.transfer_matrices(problem, zs)
    Y = T @ _pair_init(bc.phi_a)
    th = _bc_b((Y[:, 0, 0], Y[:, 1, 0]), bc.phi_b)
    ph = _bc_b((Y[:, 0, 1], Y[:, 1, 1]), bc.phi_b)
    return -th / ph


def m_denominator(problem, bc, lam):
    """BC_b(phi_lambda): vanishes exactly at the eigenvalues."""
    _require(problem, bc)
    T, _ = ivp.transfer_matrices(problem, np.atleast_1d(np.asarray(lam, dtype=complex)))
    Y = T @ _pair_init(bc.phi_a)
    d = _bc_b((Y[:, 0, 1], Y[:, 1, 1]), bc.phi_b)
    return d if np.ndim(lam) else complex(d[0])


def herglotz_residual(problem, bc, z):
    """|Im m(z) / Im z - ||psi_z||^2|."""
    z = complex(z)
    if z.imag == 0:
        raise PreconditionError("herglotz_residual needs Im z != 0")
    w = m_function(problem, bc, z)
    return abs(w.m.imag / z.imag - w.psi.norm2())


class SpectralMeasure:
    """Atoms (lambda_n, w_n) with w_n = ||phi_{lambda_n}||^-2 inside a window."""

    def __init__(self, problem, bc, lams, weights, window, solution, tolerances):
        self.problem = problem
        self.bc = bc
        self.lams = np.asarray(lams, dtype=float)
        self.weights = np.asarray(weights, dtype=float)
        self.window = window
        self.solution = solution
        self.tolerances = tolerances
        self.densities = []
        self._quad = {}

    @property
    def atoms(self):
        return list(zip(self.lams.tolist(), self.weights.tolist()))

    def __len__(self):
        return len(self.lams)

    def phi(self, n):
        """phi_{lambda_n} (not normalised)."""
        w = np.zeros(len(self.lams))
        w[n] = 1.0
        return ivp.Trajectory(self.solution, w)

    def quadrature(self, n=8):
        """Nodes, weights and phi values (nodes x atoms) on the accepted
        steps of the joint integration."""
        if n not in self._quad:
            xs, ws = panel_nodes(self.solution.edges(), n)
            xs, ws = xs.ravel(), ws.ravel()
            self._quad[n] = (xs, ws, self.solution.states(xs)[:, 0, :])
        return self._quad[n]

    def total(self, lo=-np.inf, hi=np.inf):
        sel = (self.lams > lo) & (self.lams <= hi)
        return float(self.weights[sel].sum())


def spectral_atoms(problem, bc, window=None, count=None):
    """Atoms of the spectral measure for eigenvalues in ``window`` (or the
    first ``count``)."""
    _require(problem, bc)
    if count is not None:
        ev = eigenvalues(problem, bc, count=count)
    else:
        ev = eigenvalues(problem, bc, window[0], window[1])
    lams = np.array([e.lam for e in ev])
    if not len(lams):
        return SpectralMeasure(problem, bc, lams, lams, window, None, {"rtol": ivp.RTOL})
    Y0 = np.tile(np.array([[math.sin(bc.phi_a)], [math.cos(bc.phi_a)]], dtype=complex), len(lams))
    sol = ivp.solve_columns(problem, lams, Y0, problem.a)
    m = SpectralMeasure(problem, bc, lams, np.zeros(len(lams)), window if window else (lams[0], lams[-1]),
                        sol, {"rtol": ivp.RTOL, "atol": ivp.ATOL})
    xs, ws, U = m.quadrature()
    m.weights = 1.0 / np.real((np.abs(U) ** 2 * (ws * problem.r(xs))[:, None]).sum(axis=0))
    return m


def stieltjes_inversion(problem, bc, lam1, lam2, eps_seq=DEFAULT_EPS, delta=None, tol=1e-4,
                        quad_tol=1e-9, quad_rtol=1e-8, full=False):
    """mu((lam1, lam2]) from (1/pi) int Im m(lambda + i eps) d lambda over
    (lam1 + delta, lam2 + delta], extrapolated to eps -> 0.

    With ``full`` the per-eps values and the extrapolation spread are
    returned too.
    """
    _require(problem, bc)
    if not lam1 < lam2:
        raise PreconditionError("need lam1 < lam2")
    delta = 1e-4 * (lam2 - lam1) if delta is None else float(delta)
    guard = 10 * delta
    near = eigenvalues(problem, bc, lam1 - guard, lam2 + guard)
    for e in near:
        if min(abs(e.lam - lam1), abs(e.lam - lam2)) < guard:
            raise PreconditionError(f"eigenvalue {e.lam:.10g} within {guard:.3g} of a window endpoint")
    lo, hi = lam1 + delta, lam2 + delta
    eps = np.sort(np.asarray(eps_seq, dtype=float))[::-1]
    # panels: split at atoms so that each Lorentzian peak sits on an edge
    inside = [e.lam for e in near if lo < e.lam < hi]
    init = np.unique(np.concatenate([np.linspace(lo, hi, 9), inside]))
    vals = []
    for ep in eps:
        f = lambda lam, ep=ep: np.imag(m_values(problem, bc, lam + 1j * ep)) / math.pi
        v, _, _ = adaptive_gk(f, lo, hi, tol=quad_tol, init=init, rtol=quad_rtol)
        vals.append(v)
    limit, spread = richardson(eps, vals)
    check_extrapolation(limit, spread, tol)
    if full:
        return limit, spread, eps, np.array(vals)
    return limit


def _as_callable(f, problem):
    if callable(f) and not hasattr(f, "exprs") and not hasattr(f, "program"):
        return f
    return piecewise_from_spec(f, problem.a, problem.b, "f")


def spectral_transform(problem, bc, f, atoms):
    """f_hat(lambda_n) = int phi_{lambda_n} f r dx for every atom."""
    fn = _as_callable(f, problem)
    xs, ws, U = atoms.quadrature()
    return (U * (fn(xs) * problem.r(xs) * ws)[:, None]).sum(axis=0)


def inverse_transform(atoms, coeffs, x):
    """sum_n f_hat_n phi_{lambda_n}(x) w_n."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    S = atoms.solution.states(x)[:, 0, :]
    out = S @ (np.asarray(coeffs) * atoms.weights)
    return out


def parseval_defect(problem, bc, f, atoms):
    """Relative defect |sum |f_hat|^2 w - ||f||^2| / ||f||^2."""
    fn = _as_callable(f, problem)
    fh = spectral_transform(problem, bc, fn, atoms)
    lhs = float(np.sum(np.abs(fh) ** 2 * atoms.weights))
    xs, ws, _ = atoms.quadrature()
    nrm = float(np.sum(np.abs(fn(xs)) ** 2 * problem.r(xs) * ws))
    return abs(lhs - nrm) / nrm


def transform_green_identity(problem, bc, z, x, atoms, quasi=False):
    """max_n |int G_z(x, y) phi_n(y) r(y) dy - phi_n(x) / (lambda_n - z)|,
    or the same for the quasi-derivative in x when ``quasi`` is set."""
    K = green_separated(problem, bc.phi_a, bc.phi_b, z)
    res = 0.0
    for n in range(len(atoms)):
        ph = atoms.phi(n)
        R = apply_resolvent(K, lambda y, ph=ph: ph(y)[0])
        got = R(float(x))[1 if quasi else 0]
        want = ph(float(x))[1 if quasi else 0] / (atoms.lams[n] - z)
        res = max(res, abs(got - want))
    return res
