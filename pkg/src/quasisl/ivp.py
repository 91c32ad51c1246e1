"""Initial value problems for (tau - z) u = g in quasi-derivative form.

The state is (u, u1) with u1 = p (u' + s u).  All integration goes through the
compiled Dormand-Prince kernel; a ``Trajectory`` answers queries at any x by
re-taking one partial step from the nearest accepted node, so interpolation is
as accurate as the integrator itself.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import _kernel
from .coeffs import compile_coefficients, piecewise_from_spec
from .errors import (NonFiniteState, PreconditionError, StepSizeUnderflow,
                     ZeroClusterUnresolved)
from .quadrature import Cumulative, merge_edges, panel_nodes

RTOL = 1e-10
ATOL = 1e-12
MAX_STEPS = 10 ** 6


@dataclass(frozen=True)
class QuasiState:
    x: float
    u: complex
    u1: complex

    def vector(self):
        return np.array([self.u, self.u1], dtype=complex)


def _as_state(init, default_x=None):
    if isinstance(init, QuasiState):
        return init
    if len(init) == 3:
        return QuasiState(float(init[0]), complex(init[1]), complex(init[2]))
    return QuasiState(float(default_x), complex(init[0]), complex(init[1]))


class _Leg:
    """Accepted nodes of one integration sweep (monotone in x)."""

    def __init__(self, nodes, stepseg, Ys):
        self.nodes = nodes
        self.stepseg = stepseg
        self.Ys = Ys
        self.forward = nodes[-1] >= nodes[0]
        self.lo, self.hi = (nodes[0], nodes[-1]) if self.forward else (nodes[-1], nodes[0])

    def locate(self, x):
        if self.forward:
            i = np.searchsorted(self.nodes, x, side="right") - 1
        else:
            i = np.searchsorted(-self.nodes, -x, side="right") - 1
        return np.clip(i, 0, len(self.nodes) - 2)


def _run(prog, has_g, x0, x1, Y0, zs, rtol, atol, store=True, track=False, kap=None,
         group=None, rescale=False, max_steps=MAX_STEPS):
    m = Y0.shape[1]
    kap = np.ones(m) if kap is None else np.asarray(kap, dtype=float)
    group = np.zeros(m, dtype=np.int64) if group is None else np.asarray(group, dtype=np.int64)
    ngroups = int(group.max()) + 1 if m else 1
    res = _kernel.integrate(float(x0), float(x1), np.ascontiguousarray(Y0, dtype=np.complex128),
                            np.asarray(zs, dtype=np.complex128), kap, group, ngroups,
                            prog.ops, prog.args, prog.consts, prog.starts, prog.lengths,
                            prog.table, prog.bps, bool(has_g), float(rtol), float(atol), -1.0,
                            int(max_steps), bool(store), bool(track), bool(rescale))
    status, nodes, stepseg, Ys, theta, logsc, steps = res
    if status == _kernel.UNDERFLOW:
        raise StepSizeUnderflow(f"step size underflow near x = {nodes[-1]:.10g}")
    if status == _kernel.NONFINITE:
        raise NonFiniteState(f"non-finite state near x = {nodes[-1]:.10g}")
    if status == _kernel.MAXSTEPS:
        raise StepSizeUnderflow(f"step limit {max_steps} reached near x = {nodes[-1]:.10g}")
    return _Leg(nodes, stepseg, Ys), theta, logsc


def _check_range(problem, *xs):
    tol = 1e-12 * (1 + abs(problem.a) + abs(problem.b))
    for x in xs:
        if not (problem.a - tol <= x <= problem.b + tol):
            raise PreconditionError(f"x = {x} outside [{problem.a}, {problem.b}]")


class Solution:
    """Columns of a joint integration: column j solves the system with
    spectral parameter ``zs[j]``.  Trajectories are linear combinations of
    columns sharing one z."""

    def __init__(self, problem, prog, has_g, zs, legs, rtol, atol, g=None):
        self.problem = problem
        self.prog = prog
        self.has_g = has_g
        self.zs = np.asarray(zs, dtype=complex)
        self.legs = legs
        self.rtol = rtol
        self.atol = atol
        self.g = g
        self.lo = min(leg.lo for leg in legs)
        self.hi = max(leg.hi for leg in legs)

    @property
    def x_range(self):
        return self.lo, self.hi

    def edges(self, lo=None, hi=None):
        """Accepted step boundaries in [lo, hi] (default: whole range)."""
        lo = self.lo if lo is None else lo
        hi = self.hi if hi is None else hi
        return merge_edges(*[leg.nodes for leg in self.legs], self.problem.breakpoints, lo=lo, hi=hi)

    def states(self, x, cols=None):
        """Array of shape (len(x), 2, len(cols)) of (u, u1) values."""
        xa = np.atleast_1d(np.asarray(x, dtype=float))
        tol = 1e-10 * (1 + abs(self.lo) + abs(self.hi))
        if xa.size and (xa.min() < self.lo - tol or xa.max() > self.hi + tol):
            raise PreconditionError(f"query outside the integrated range [{self.lo}, {self.hi}]")
        xa = np.clip(xa, self.lo, self.hi)
        cols = np.arange(len(self.zs)) if cols is None else np.atleast_1d(cols)
        out = np.empty((len(xa), 2, len(cols)), dtype=complex)
        todo = np.ones(len(xa), dtype=bool)
        p = self.prog
        for leg in self.legs:
            sel = todo & (xa >= leg.lo) & (xa <= leg.hi)
            if not sel.any():
                continue
            xs = xa[sel]
            i = leg.locate(xs)
            Yb = np.ascontiguousarray(leg.Ys[i][:, :, cols])
            out[sel] = _kernel.dense(xs, leg.nodes[i], Yb, leg.stepseg[i],
                                     np.ascontiguousarray(self.zs[cols]), p.ops, p.args, p.consts,
                                     p.starts, p.lengths, p.table, self.has_g)
            todo &= ~sel
        return out


class Trajectory:
    """Solution of (tau - z)u = g queryable for (u, u1) anywhere in its range.

    Calling ``traj(x)`` returns the pair ``(u(x), u1(x))``; scalars in, scalars
    out.
    """

    def __init__(self, solution, weights):
        self.solution = solution
        w = np.asarray(weights, dtype=complex)
        self.weights = w
        self._cols = np.nonzero(w)[0]
        zs = solution.zs[self._cols]
        if len(zs) and np.any(zs != zs[0]):
            raise ValueError("a trajectory must combine columns with a common z")
        self.z = complex(zs[0]) if len(zs) else complex(solution.zs[0])

    @property
    def problem(self):
        return self.solution.problem

    @property
    def x_range(self):
        return self.solution.x_range

    @property
    def tolerances(self):
        return {"rtol": self.solution.rtol, "atol": self.solution.atol}

    def __call__(self, x):
        if len(self._cols) == 0:
            z = np.zeros(np.shape(x), dtype=complex)
            return (z, z.copy()) if np.ndim(x) else (0j, 0j)
        S = self.solution.states(x, self._cols)
        v = S @ self.weights[self._cols]
        if np.ndim(x) == 0:
            return complex(v[0, 0]), complex(v[0, 1])
        return v[:, 0], v[:, 1]

    def u(self, x):
        return self(x)[0]

    def u1(self, x):
        return self(x)[1]

    def state(self, x):
        u, u1 = self(float(x))
        return QuasiState(float(x), u, u1)

    def scaled(self, c):
        return Trajectory(self.solution, self.weights * c)

    def plus(self, other, c=1.0):
        """self + c * other; both must come from the same joint integration."""
        if other.solution is not self.solution:
            raise ValueError("can only combine trajectories of one integration")
        return Trajectory(self.solution, self.weights + c * other.weights)

    def edges(self, lo=None, hi=None):
        return self.solution.edges(lo, hi)

    def integral(self, fn, lo=None, hi=None, n=8):
        """Integral of fn(x, u, u1) over [lo, hi] by Gauss rules on the
        accepted steps."""
        e = self.edges(lo, hi)
        xs, ws = panel_nodes(e, n)
        u, u1 = self(xs.ravel())
        vals = fn(xs.ravel(), u, u1).reshape(xs.shape)
        return (vals * ws).sum()

    def norm2(self, lo=None, hi=None):
        """Weighted squared norm: integral of |u|^2 r."""
        r = self.problem.r
        return float(np.real(self.integral(lambda x, u, u1: np.abs(u) ** 2 * r(x), lo, hi)))

    def inner(self, other, lo=None, hi=None, n=8):
        """<self, other>_r = integral of u conj(v) r."""
        e = merge_edges(self.edges(lo, hi), other.edges(lo, hi))
        xs, ws = panel_nodes(e, n)
        u = self(xs.ravel())[0]
        v = other(xs.ravel())[0]
        return complex(((u * np.conj(v) * self.problem.r(xs.ravel())).reshape(xs.shape) * ws).sum())


class FunctionTrajectory(Trajectory):
    """Trajectory-like object defined by closed functions of x (used for
    quadrature-built solutions)."""

    def __init__(self, problem, z, fn, edges):
        self._problem = problem
        self.z = complex(z)
        self._fn = fn
        self._edges = np.asarray(edges, dtype=float)

    @property
    def problem(self):
        return self._problem

    @property
    def x_range(self):
        return float(self._edges[0]), float(self._edges[-1])

    def __call__(self, x):
        u, u1 = self._fn(np.atleast_1d(np.asarray(x, dtype=float)))
        if np.ndim(x) == 0:
            return complex(u[0]), complex(u1[0])
        return u, u1

    def scaled(self, c):
        return FunctionTrajectory(self._problem, self.z,
                                  lambda x: tuple(c * v for v in self._fn(x)), self._edges)

    def edges(self, lo=None, hi=None):
        lo = self._edges[0] if lo is None else lo
        hi = self._edges[-1] if hi is None else hi
        return merge_edges(self._edges, lo=lo, hi=hi)


def _g_program(problem, g):
    gfn = piecewise_from_spec(g, problem.a, problem.b, "g")
    bps = merge_edges(problem.breakpoints, gfn.breakpoints)
    return compile_coefficients([problem.p, problem.q, problem.r, problem.s, gfn], bps), gfn


def integrate(problem, z, init, x_target, g=None, rtol=RTOL, atol=ATOL):
    """Solve (tau - z)u = g from ``init`` to ``x_target`` (either direction).

    Parameters
    ----------
    init : QuasiState or (x, u, u1)
    g : None, or an expression / number / piece list / PiecewiseFn.  The
        inhomogeneity runs inside the compiled stepper, so Python callables
        are not accepted here (use ``variation_of_parameters`` for those).
    """
    st = _as_state(init)
    _check_range(problem, st.x, x_target)
    if g is None:
        prog, has_g, gfn = problem.program(), False, None
    else:
        if callable(g) and not hasattr(g, "exprs") and not hasattr(g, "program"):
            raise TypeError("integrate() needs g as an expression; see variation_of_parameters")
        prog, gfn = _g_program(problem, g)
        has_g = True
    Y0 = np.array([[st.u], [st.u1]], dtype=complex)
    leg, _, _ = _run(prog, has_g, st.x, x_target, Y0, [z], rtol, atol)
    return Trajectory(Solution(problem, prog, has_g, [z], [leg], rtol, atol, gfn), [1.0])


def solve_columns(problem, zs, Y0, c, x_range=None, rtol=RTOL, atol=ATOL):
    """Integrate the columns of ``Y0`` (2 x m, data at x = c) over
    ``x_range`` (default [a, b]) in both directions from c."""
    lo, hi = x_range if x_range is not None else (problem.a, problem.b)
    _check_range(problem, c, lo, hi)
    prog = problem.program()
    Y0 = np.asarray(Y0, dtype=complex)
    legs = []
    if hi > c:
        legs.append(_run(prog, False, c, hi, Y0, zs, rtol, atol)[0])
    if lo < c:
        legs.append(_run(prog, False, c, lo, Y0, zs, rtol, atol)[0])
    if not legs:
        legs.append(_run(prog, False, c, c, Y0, zs, rtol, atol)[0])
    return Solution(problem, prog, False, zs, legs, rtol, atol)


def fundamental_system(problem, z, c, x_range=None, rtol=RTOL, atol=ATOL):
    """Solutions u1, u2 with u1(c) = u2^[1](c) = 1, u1^[1](c) = u2(c) = 0, so
    that W(u1, u2) = 1."""
    sol = solve_columns(problem, [z, z], np.eye(2), c, x_range, rtol, atol)
    return Trajectory(sol, [1, 0]), Trajectory(sol, [0, 1])


@dataclass(frozen=True)
class TransferMatrix:
    z: complex
    matrix: np.ndarray

    def det(self):
        return complex(np.linalg.det(self.matrix))


def transfer_matrices(problem, zs, rtol=RTOL, atol=ATOL, rescale=False):
    """Transfer matrices T(z) for many z in one sweep.

    Returns (T, logscale) with T of shape (n, 2, 2); the true matrix is
    T * exp(logscale) (logscale is zero unless ``rescale`` is set).
    """
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    n = len(zs)
    Y0 = np.tile(np.eye(2, dtype=complex), n)
    zz = np.repeat(zs, 2)
    group = np.repeat(np.arange(n), 2)
    leg, _, logsc = _run(problem.program(), False, problem.a, problem.b, Y0, zz, rtol, atol,
                         store=False, group=group, rescale=rescale)
    Yb = leg.Ys[-1]
    T = np.stack([Yb[:, 0::2], Yb[:, 1::2]], axis=-1)  # (2, n, 2) -> reorder
    T = np.transpose(T, (1, 0, 2))
    return T, logsc


def transfer_matrix(problem, z, rtol=RTOL, atol=ATOL):
    """T(z): columns are (u_j(b), u_j^[1](b)) for the fundamental system at a."""
    T, _ = transfer_matrices(problem, [z], rtol, atol)
    return TransferMatrix(complex(z), T[0])


def propagate(problem, zs, Y0, x0, x1, rtol=RTOL, atol=ATOL):
    """Final states (2, m) at x1 of the columns of Y0 given at x0, column j
    with spectral parameter zs[j]; no nodes are stored."""
    _check_range(problem, x0, x1)
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    leg, _, _ = _run(problem.program(), False, x0, x1, np.asarray(Y0, dtype=complex), zs, rtol, atol,
                     store=False)
    return leg.Ys[-1]


def shoot(problem, zs, Y0, rtol=RTOL, atol=ATOL, track=True, kap=None, rescale=True):
    """Propagate initial data at a to b for many z without storing nodes.

    Returns (final states (2, m), Pruefer angles (m,), log scales (m,)).
    """
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    m = len(zs)
    if kap is None:
        kap = np.sqrt(np.maximum(np.abs(zs.real), 1.0))
    leg, theta, logsc = _run(problem.program(), False, problem.a, problem.b, Y0, zs, rtol, atol,
                             store=False, track=track, kap=kap, group=np.arange(m), rescale=rescale)
    return leg.Ys[-1], theta, logsc


def wronskian(f, g, x):
    """Modified Wronskian W(f, g)(x) = f g^[1] - f^[1] g."""
    fu, f1 = f(x)
    gu, g1 = g(x)
    return fu * g1 - f1 * gu


def plucker_residual(f1, f2, f3, f4, x):
    """|W12 W34 + W13 W42 + W14 W23| at x."""
    W = lambda f, g: wronskian(f, g, x)
    return np.abs(W(f1, f2) * W(f3, f4) + W(f1, f3) * W(f4, f2) + W(f1, f4) * W(f2, f3))


def variation_of_parameters(problem, z, g, c, d1, d2, rtol=RTOL, atol=ATOL, points=()):
    """Solution of (tau - z)f = g with f(c) = d1, f^[1](c) = d2 from the
    fundamental system normalised at c:

        f = (d1 + int_c^x u2 g r) u1 + (d2 - int_c^x u1 g r) u2.

    ``g`` may be any vectorised callable or an expression; ``points`` lists
    extra breakpoints of g for the quadrature.
    """
    if callable(g) and not hasattr(g, "exprs"):
        gf = g
    else:
        gf = piecewise_from_spec(0.0 if g is None else g, problem.a, problem.b, "g")
        points = tuple(points) + gf.breakpoints
    u1, u2 = fundamental_system(problem, z, c, rtol=rtol, atol=atol)
    r = problem.r
    edges = merge_edges(u1.edges(), np.asarray(points, dtype=float), lo=problem.a, hi=problem.b)
    I1 = Cumulative(lambda x: u1(x)[0] * gf(x) * r(x), edges, refine=True)
    I2 = Cumulative(lambda x: u2(x)[0] * gf(x) * r(x), edges, refine=True)
    I1c, I2c = I1(c), I2(c)

    def fn(x):
        a1, a2 = u1(x), u2(x)
        c1 = d1 + I2(x) - I2c
        c2 = d2 - (I1(x) - I1c)
        return c1 * a1[0] + c2 * a2[0], c1 * a1[1] + c2 * a2[1]

    return FunctionTrajectory(problem, z, fn, I1.edges)


def apply_tau(problem, traj, x, z=0.0, h=1e-4):
    """Numerical (tau - z) f at interior points x, from fourth-order central
    differences of the quasi-derivative."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    f, f1 = traj(x)
    d = (-traj(x + 2 * h)[1] + 8 * traj(x + h)[1] - 8 * traj(x - h)[1] + traj(x - 2 * h)[1]) / (12 * h)
    return (-d + problem.s(x) * f1 + problem.q(x) * f) / problem.r(x) - z * f


def sign_changes(traj, lo=None, hi=None, refine=True):
    """Interior zeros of Re u on (lo, hi), located between accepted nodes and
    refined by Brent's method.  Raises ZeroClusterUnresolved when two zeros
    are closer than 1e-10."""
    e = traj.edges(lo, hi)
    fine = np.sort(np.concatenate([e, 0.5 * (e[:-1] + e[1:])]))
    vals = np.real(traj(fine)[0])
    zeros = []
    for i in range(len(fine) - 1):
        a, b = vals[i], vals[i + 1]
        if a == 0.0 and 0 < i:
            if vals[i - 1] * b < 0:
                zeros.append(fine[i])
            continue
        if a * b < 0:
            if refine:
                zeros.append(brentq(lambda t: float(np.real(traj(t)[0])), fine[i], fine[i + 1],
                                    xtol=1e-14, rtol=1e-15))
            else:
                zeros.append(0.5 * (fine[i] + fine[i + 1]))
    zeros = np.asarray(zeros)
    if len(zeros) > 1 and np.min(np.diff(zeros)) < 1e-10:
        raise ZeroClusterUnresolved("two zeros closer than 1e-10")
    return zeros
