"""Green's functions, resolvents, Hilbert-Schmidt norms and positivity scans.

Every kernel is stored as

    G(x, y) = sum_ij m[i, j] u_i(x) u_j(y),   m = m_plus for y <= x, m_minus for y >= x,

over a basis (u_1, u_2) of solutions of (tau - z)u = 0.  With that form the
resolvent and the Hilbert-Schmidt norm reduce to cumulative integrals of
basis products, so no two-dimensional quadrature over the kernel's kink is
needed.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import ivp
from .boundary import Coupled, Separated
from .coeffs import piecewise_from_spec
from .errors import AtEigenvalue, ComplexCouplingUnsupported, PreconditionError
from .quadrature import Cumulative, merge_edges

COND_MAX = 1e12
# an exact eigenvalue leaves a Wronskian of integrator-noise size, so the
# singularity floor follows the integration tolerance
SINGULAR_REL = max(1e-12, 10 * ivp.RTOL)
J_SKEW = np.array([[0.0, 1.0], [-1.0, 0.0]])


class GreenKernel:
    """Resolvent kernel of the operator with boundary condition ``bc`` at
    spectral parameter ``z``."""

    def __init__(self, problem, bc, z, basis, m_plus, m_minus, wronskian=None, cond=None):
        self.problem = problem
        self.bc = bc
        self.z = complex(z)
        self.basis = tuple(basis)
        self.m_plus = np.asarray(m_plus, dtype=complex)
        self.m_minus = np.asarray(m_minus, dtype=complex)
        self.wronskian = wronskian
        self.cond = cond

    def _states(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        vals = [b(x) for b in self.basis]
        U = np.stack([v[0] for v in vals], axis=-1)
        U1 = np.stack([v[1] for v in vals], axis=-1)
        return U, U1

    def __call__(self, x, y):
        """G(x, y) with numpy broadcasting of x and y."""
        xb, yb = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        Ux, _ = self._states(xb.ravel())
        Uy, _ = self._states(yb.ravel())
        gp = np.einsum("ni,ij,nj->n", Ux, self.m_plus, Uy)
        gm = np.einsum("ni,ij,nj->n", Ux, self.m_minus, Uy)
        out = np.where(yb.ravel() <= xb.ravel(), gp, gm).reshape(xb.shape)
        return out if out.ndim else complex(out)

    def quasi_dx(self, x, y, side=0):
        """Quasi-derivative of G(., y) at x.  ``side`` = +1 / -1 selects the
        branch y <= x / y >= x explicitly (for jumps on the diagonal)."""
        xb, yb = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        _, U1x = self._states(xb.ravel())
        Uy, _ = self._states(yb.ravel())
        gp = np.einsum("ni,ij,nj->n", U1x, self.m_plus, Uy)
        gm = np.einsum("ni,ij,nj->n", U1x, self.m_minus, Uy)
        if side > 0:
            out = gp
        elif side < 0:
            out = gm
        else:
            out = np.where(yb.ravel() <= xb.ravel(), gp, gm)
        out = out.reshape(xb.shape)
        return out if out.ndim else complex(out)

    def grid(self, xs, ys):
        """Matrix G[i, j] = G(xs[i], ys[j])."""
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        Ux, _ = self._states(xs)
        Uy, _ = self._states(ys)
        gp = Ux @ self.m_plus @ Uy.T
        gm = Ux @ self.m_minus @ Uy.T
        return np.where(ys[None, :] <= xs[:, None], gp, gm)

    def edges(self):
        p = self.problem
        return merge_edges(*[b.edges() for b in self.basis], lo=p.a, hi=p.b)


def green_separated(problem, phi_a, phi_b, z):
    """G_z(x, y) = u_a(min(x, y)) u_b(max(x, y)) / W(u_b, u_a)."""
    if not problem.regular:
        raise PreconditionError("Green's functions need a regular problem")
    a, b = problem.a, problem.b
    ua = ivp.integrate(problem, z, (a, math.sin(phi_a), math.cos(phi_a)), b)
    ub = ivp.integrate(problem, z, (b, math.sin(phi_b), math.cos(phi_b)), a)
    xm = 0.5 * (a + b)
    W = complex(ivp.wronskian(ub, ua, xm))
    sa, sb = np.abs(ua(xm)), np.abs(ub(xm))
    scale = max(sa) * max(sb)
    if abs(W) <= SINGULAR_REL * max(scale, 1e-300):
        raise AtEigenvalue(f"z = {z} is an eigenvalue (W = {W:.3e})")
    m_plus = np.array([[0, 0], [1 / W, 0]])
    m_minus = np.array([[0, 1 / W], [0, 0]])
    return GreenKernel(problem, Separated(phi_a, phi_b), z, (ua, ub), m_plus, m_minus, wronskian=W)


def _coupled_general(problem, bc, z, ua, ub, sb):
    """Coupled kernel over any basis (u_a, u_b) with state matrices W_a, W_b
    at the ends and C = e^{i phi} R:

        m_minus = (C W_a - W_b)^{-1} W_b J / w,   m_plus = m_minus + J / w,

    w = W(u_a, u_b)."""
    a, b = problem.a, problem.b
    w = complex(ivp.wronskian(ua, ub, b))
    Wa = np.array([ua(a), ub(a)], dtype=complex).T
    Wb = np.array([sb, ub(b)], dtype=complex).T
    C = bc.coupling
    A = C @ Wa - Wb
    cond = float(np.linalg.cond(A))
    # det(C W_a - W_b) / w is the discriminant up to a phase; its rounding
    # scale is |C| |T| with |T| ~ |W_a| |W_b| / |w|
    noise = 2 + np.abs(C).max() * np.abs(Wa).max() * np.abs(Wb).max() / abs(w)
    if not np.isfinite(cond) or cond > COND_MAX or abs(np.linalg.det(A) / w) <= SINGULAR_REL * noise:
        raise AtEigenvalue(f"z = {z} is an eigenvalue (condition number {cond:.3e})")
    m_minus = np.linalg.solve(A, Wb @ J_SKEW) / w
    return m_minus + J_SKEW / w, m_minus, cond


def green_coupled(problem, bc, z):
    """Kernel for (u(b), u1(b)) = e^{i phi} R (u(a), u1(a)).

    Away from the Dirichlet spectrum the kernel is the Dirichlet kernel plus
    a rank-two boundary correction,

        G = G_D + sum_ij c_ij chi_i(x) chi_j(y),

    where chi_a, chi_b solve the equation with chi_a(a) = chi_b(b) = 1 and
    chi_a(b) = chi_b(a) = 0.  Every term then stays of the size of G even
    when solutions grow strongly.  At a Dirichlet eigenvalue the
    coefficients come from a direct solve over the same basis.
    """
    if not problem.regular:
        raise PreconditionError("Green's functions need a regular problem")
    a, b = problem.a, problem.b
    ua = ivp.integrate(problem, z, (a, 0.0, 1.0), b)
    sb = np.array(ua(b), dtype=complex)
    nb = np.linalg.norm(sb)
    if abs(sb[0]) <= 1e-3 * nb:
        ub = ivp.integrate(problem, z, (b, -np.conj(sb[1]) / nb, np.conj(sb[0]) / nb), a)
        m_plus, m_minus, cond = _coupled_general(problem, bc, z, ua, ub, sb)
        return GreenKernel(problem, bc, z, (ua, ub), m_plus, m_minus, cond=cond)
    ub = ivp.integrate(problem, z, (b, 0.0, 1.0), a)
    sa = np.array(ub(a), dtype=complex)
    W = complex(ivp.wronskian(ub, ua, 0.5 * (a + b)))
    # boundary states of chi_a = u_b / u_b(a) and chi_b = u_a / u_a(b)
    Xa = np.array([[1.0, 0.0], [sa[1] / sa[0], 1.0 / sb[0]]])
    Xb = np.array([[0.0, 1.0], [1.0 / sa[0], sb[1] / sb[0]]])
    # quasi-derivatives of G_D(., y) at the ends: d_a chi_a(y), d_b chi_b(y)
    Da = np.array([[0.0, 0.0], [sa[0] / W, 0.0]])
    Db = np.array([[0.0, 0.0], [0.0, sb[0] / W]])
    C = bc.coupling
    A = Xb - C @ Xa
    cond = float(np.linalg.cond(A))
    noise = (1 + np.abs(C).max()) * (1 + np.abs(Xa).max() + np.abs(Xb).max())
    if not np.isfinite(cond) or cond > COND_MAX or abs(np.linalg.det(A)) <= SINGULAR_REL * noise ** 2:
        raise AtEigenvalue(f"z = {z} is an eigenvalue (condition number {cond:.3e})")
    c = np.linalg.solve(A, C @ Da - Db)
    # chi_a is basis function 1 scaled by 1 / u_b(a), chi_b is basis function 0
    idx, scale = (1, 0), (1 / sa[0], 1 / sb[0])
    corr = np.zeros((2, 2), dtype=complex)
    for i in range(2):
        for j in range(2):
            corr[idx[i], idx[j]] += c[i, j] * scale[i] * scale[j]
    m_plus = corr + np.array([[0, 0], [1 / W, 0]])
    m_minus = corr + np.array([[0, 1 / W], [0, 0]])
    return GreenKernel(problem, bc, z, (ua, ub), m_plus, m_minus, wronskian=W, cond=cond)


def green(problem, bc, z):
    if isinstance(bc, Separated):
        return green_separated(problem, bc.phi_a, bc.phi_b, z)
    if isinstance(bc, Coupled):
        return green_coupled(problem, bc, z)
    raise PreconditionError(f"unsupported boundary condition {bc!r}")


def _as_function(g, problem):
    if callable(g) and not hasattr(g, "exprs") and not hasattr(g, "program"):
        return g, ()
    fn = piecewise_from_spec(g, problem.a, problem.b, "g")
    return fn, fn.breakpoints


def apply_resolvent(kernel, g, points=()):
    """(R_z g)(x) = int G_z(x, y) g(y) r(y) dy as a trajectory-like object.

    ``g`` is a vectorised callable, a number or an expression; ``points``
    lists extra breakpoints of g.
    """
    p = kernel.problem
    gf, bps = _as_function(g, p)
    edges = merge_edges(kernel.edges(), np.asarray(tuple(points) + tuple(bps), dtype=float), lo=p.a, hi=p.b)
    cums = []
    for j in range(2):
        bj = kernel.basis[j]
        cums.append(Cumulative(lambda x, bj=bj: bj(x)[0] * gf(x) * p.r(x), edges, refine=True))
    total = np.array([c.total for c in cums])
    mp, mm = kernel.m_plus, kernel.m_minus

    def fn(x):
        P = np.stack([c(x) for c in cums], axis=-1)
        coef = P @ mp.T + (total[None, :] - P) @ mm.T
        U, U1 = kernel._states(x)
        return (U * coef).sum(axis=1), (U1 * coef).sum(axis=1)

    return ivp.FunctionTrajectory(p, kernel.z, fn, edges)


def hs_norm(kernel):
    """Hilbert-Schmidt norm (double integral of |G|^2 r r)^(1/2)."""
    p = kernel.problem
    edges = kernel.edges()
    basis = kernel.basis
    cum = {}
    for j in range(2):
        for l in range(2):
            f = lambda x, j=j, l=l: basis[j](x)[0] * np.conj(basis[l](x)[0]) * p.r(x)
            cum[j, l] = Cumulative(f, edges, refine=True)
    mp, mm = kernel.m_plus, kernel.m_minus

    def integrand(x):
        U, _ = kernel._states(x)
        P = np.empty((len(x), 2, 2), dtype=complex)
        Q = np.empty_like(P)
        for (j, l), c in cum.items():
            P[:, j, l] = c(x)
            Q[:, j, l] = c.total - P[:, j, l]
        # sum_ijkl m_ij conj(m_kl) u_i conj(u_k) P_jl
        A = np.einsum("ij,kl,ni,nk->njl", mp, np.conj(mp), U, np.conj(U))
        B = np.einsum("ij,kl,ni,nk->njl", mm, np.conj(mm), U, np.conj(U))
        return np.real((A * P).sum(axis=(1, 2)) + (B * Q).sum(axis=(1, 2))) * p.r(x)

    total = Cumulative(integrand, edges, refine=True).total
    return math.sqrt(max(float(np.real(total)), 0.0))


def _check_real(bc):
    if isinstance(bc, Coupled) and bc.phi != 0.0:
        raise ComplexCouplingUnsupported("positivity needs a real boundary condition (phi = 0)")


def _check_below(problem, bc, lam):
    from .eigen import lower_bound
    lb = lower_bound(problem, bc)
    if not lam < lb:
        raise PreconditionError(f"lambda = {lam} must lie below the spectrum (lowest eigenvalue {lb:.10g})")
    return lb


@dataclass
class PositivityReport:
    min: float
    argmin: tuple
    interior_min: float
    max: float
    lower_bound: float
    grid_n: int

    @property
    def positive(self):
        return self.interior_min > 0.0

    def to_json(self):
        return {"min": self.min, "argmin": list(self.argmin), "interior_min": self.interior_min,
                "max": self.max, "lower_bound": self.lower_bound, "grid_n": self.grid_n,
                "positive": self.positive}


def _grids(problem, grid_n):
    a, b = problem.a, problem.b
    h = (b - a) / grid_n
    return np.linspace(a, b, grid_n), np.linspace(a + h, b - h, grid_n)


def positivity_scan(problem, bc, lam, grid_n=32):
    """Minimum of the real kernel G_lambda on a grid_n x grid_n grid; the
    interior grid keeps a margin of (b - a)/grid_n from the boundary."""
    _check_real(bc)
    lb = _check_below(problem, bc, lam)
    K = green(problem, bc, float(lam))
    full, inner = _grids(problem, grid_n)
    G = np.real(K.grid(full, full))
    Gi = np.real(K.grid(inner, inner))
    i, j = np.unravel_index(np.argmin(G), G.shape)
    return PositivityReport(float(G.min()), (float(full[i]), float(full[j])), float(Gi.min()),
                            float(G.max()), lb, grid_n)


@dataclass
class DominationReport:
    min_difference: float
    argmin: tuple
    min_dirichlet: float
    grid_n: int
    tol: float = 1e-10

    @property
    def dominated(self):
        return self.min_difference >= -self.tol and self.min_dirichlet >= -self.tol

    def to_json(self):
        return {"min_difference": self.min_difference, "argmin": list(self.argmin),
                "min_dirichlet": self.min_dirichlet, "grid_n": self.grid_n, "dominated": self.dominated}


def domination_check(problem, bc, lam, grid_n=32):
    """min over the grid of G_{lambda,bc} - G_{lambda,Dirichlet}."""
    _check_real(bc)
    dirichlet = Separated(0.0, 0.0)
    _check_below(problem, bc, lam)
    _check_below(problem, dirichlet, lam)
    full, _ = _grids(problem, grid_n)
    G = np.real(green(problem, bc, float(lam)).grid(full, full))
    G0 = np.real(green(problem, dirichlet, float(lam)).grid(full, full))
    D = G - G0
    i, j = np.unravel_index(np.argmin(D), D.shape)
    return DominationReport(float(D.min()), (float(full[i]), float(full[j])), float(G0.min()), grid_n)
