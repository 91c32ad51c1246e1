"""Eigenvalues, eigenfunctions, oscillation counts and principal solutions
for regular problems.

Separated conditions are handled by a scaled Pruefer angle: the angle at b
counts the eigenvalues below lambda exactly, so batched bisection on the count
isolates each eigenvalue before a batched Illinois iteration on the
normalised characteristic function polishes it.  Coupled conditions scan the
discriminant between consecutive Dirichlet eigenvalues.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from . import ivp
from .boundary import Coupled, Separated, bc_residual, discriminant_from_T
from .coeffs import quad, tail_trend
from .errors import (HypothesisViolation, NonConvergent, OscillatoryAtEndpoint,
                     PreconditionError, WindowTooCoarse, ZeroInWindow)
from .quadrature import Cumulative, merge_edges

D_TOL = 1e-10
LAM_RTOL = 1e-10
DOUBLE_TOL = 1e-7


def _require_regular(problem):
    if not problem.regular:
        raise PreconditionError("eigenvalue computations need a regular problem")


def _require_positive_p(problem):
    if problem.p_sign() != 1:
        raise HypothesisViolation("separated eigenvalue search needs p > 0 on [a, b]")


def _kappa(lams):
    return np.sqrt(np.maximum(np.abs(np.real(lams)), 1.0))


def _scaled_angle(phi, kap):
    """Boundary angle in the scaled Pruefer plane, mapped into (0, pi]."""
    t = np.arctan2(kap * math.sin(phi), math.cos(phi))
    return np.where(t <= 0.0, t + math.pi, t)


def _probe(problem, phi_a, phi_b, lams):
    """Eigenvalue counts below each lambda and the normalised characteristic
    function at each lambda, from one batched sweep."""
    lams = np.asarray(lams, dtype=float)
    m = len(lams)
    Y0 = np.tile(np.array([[math.sin(phi_a)], [math.cos(phi_a)]], dtype=complex), m)
    kap = _kappa(lams)
    Yb, theta, logsc = ivp.shoot(problem, lams.astype(complex), Y0, kap=kap)
    u, u1 = Yb[0].real, Yb[1].real
    x = (theta - _scaled_angle(phi_b, kap)) / math.pi
    counts = np.where(x > 0, np.ceil(x - 1e-12), 0).astype(int)
    d = u * math.cos(phi_b) - u1 * math.sin(phi_b)
    mag = np.maximum(np.abs(u), np.abs(u1))
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        big = np.log(np.maximum(mag, 1e-300)) + logsc >= 0
        dn = np.where(big, d / mag, d * np.exp(logsc))
    return counts, dn


def char_separated(problem, phi_a, phi_b, lam):
    """D(lambda) = u_a(b) cos(phi_b) - u_a^[1](b) sin(phi_b) for the solution
    with u_a(a) = sin(phi_a), u_a^[1](a) = cos(phi_a).

    Accepts a scalar or an array of real lambdas.
    """
    _require_regular(problem)
    lams = np.atleast_1d(np.asarray(lam, dtype=float))
    Y0 = np.tile(np.array([[math.sin(phi_a)], [math.cos(phi_a)]], dtype=complex), len(lams))
    Yb, _, logsc = ivp.shoot(problem, lams.astype(complex), Y0, track=False)
    d = (Yb[0].real * math.cos(phi_b) - Yb[1].real * math.sin(phi_b)) * np.exp(logsc)
    return d if np.ndim(lam) else float(d[0])


def eigenvalue_count(problem, phi_a, phi_b, lam):
    """Number of eigenvalues strictly below ``lam`` for separated conditions."""
    _require_regular(problem)
    _require_positive_p(problem)
    lams = np.atleast_1d(np.asarray(lam, dtype=float))
    c, _ = _probe(problem, phi_a, phi_b, lams)
    return c if np.ndim(lam) else int(c[0])


def _illinois(f, lo, hi, flo, fhi, xtol, ftol=0.0, max_iter=200):
    """Batched Illinois (modified regula falsi) on brackets with
    flo * fhi <= 0.  ``f`` maps an array of abscissae to values."""
    lo, hi = np.array(lo, float), np.array(hi, float)
    flo, fhi = np.array(flo, float), np.array(fhi, float)
    n = len(lo)
    root = np.full(n, np.nan)
    side = np.zeros(n, dtype=int)
    prev = np.full(n, np.nan)
    done = np.zeros(n, dtype=bool)
    for arr, fa in ((lo, flo), (hi, fhi)):
        hit = (fa == 0) & ~done
        root[hit] = arr[hit]
        done |= hit
    for it in range(max_iter):
        act = np.nonzero(~done)[0]
        if not len(act):
            return root
        a, b, fa, fb = lo[act], hi[act], flo[act], fhi[act]
        with np.errstate(divide="ignore", invalid="ignore"):
            c = (a * fb - b * fa) / (fb - fa)
        bad = ~np.isfinite(c) | (c <= np.minimum(a, b)) | (c >= np.maximum(a, b))
        if it % 6 == 5:
            bad[:] = True  # periodic bisection guards against stalls
        c[bad] = 0.5 * (a + b)[bad]
        fc = f(c)
        step = np.abs(c - prev[act])
        prev[act] = c
        left = np.sign(fc) == np.sign(fa)
        for k, i in enumerate(act):
            if fc[k] == 0:
                root[i], done[i] = c[k], True
                continue
            if left[k]:
                lo[i], flo[i] = c[k], fc[k]
                if side[i] == -1:
                    fhi[i] *= 0.5
                side[i] = -1
            else:
                hi[i], fhi[i] = c[k], fc[k]
                if side[i] == 1:
                    flo[i] *= 0.5
                side[i] = 1
            tol = xtol(c[k])
            if abs(hi[i] - lo[i]) <= tol or (abs(fc[k]) <= ftol and step[k] <= tol):
                root[i], done[i] = c[k], True
    raise NonConvergent("root refinement did not converge")


def _lam_tol(lam):
    return LAM_RTOL * (1.0 + abs(lam))


class Eigenpair:
    """An eigenvalue with its r-normalised eigenfunction(s).

    ``index`` is the oscillation index (number of interior zeros) for
    separated conditions and None for coupled ones.  Eigenfunctions are
    integrated on first access.
    """

    def __init__(self, problem, bc, lam, multiplicity=1, index=None, init=None):
        self.problem = problem
        self.bc = bc
        self.lam = float(lam)
        self.multiplicity = int(multiplicity)
        self.index = index
        self._init = init
        self._funcs = None

    def __repr__(self):
        return f"Eigenpair(lam={self.lam!r}, multiplicity={self.multiplicity}, index={self.index})"

    @property
    def eigenfunctions(self):
        if self._funcs is None:
            self._funcs = _eigenfunctions(self.problem, self.lam, self._init)
        return self._funcs

    @property
    def eigenfunction(self):
        return self.eigenfunctions[0]

    def bc_residual(self):
        """Largest boundary residual over the eigenfunctions."""
        p = self.problem
        res = 0.0
        for u in self.eigenfunctions:
            res = max(res, float(np.max(np.abs(bc_residual(self.bc, u(p.a), u(p.b))))))
        return res

    def norm_check(self):
        """Largest deviation of the eigenfunction norms from 1, measured by an
        adaptive quadrature independent of the one used to normalise."""
        p = self.problem
        out = 0.0
        for u in self.eigenfunctions:
            n2 = quad(lambda x: float(np.abs(u(np.atleast_1d(x))[0][0]) ** 2 * p.r(x)), p.a, p.b,
                      points=p.breakpoints, epsabs=1e-13, epsrel=1e-12)
            out = max(out, abs(n2 - 1.0))
        return out


def _eigenfunctions(problem, lam, inits):
    a, b = problem.a, problem.b
    sol = ivp.solve_columns(problem, [lam] * len(inits), np.array(inits, dtype=complex).T, a, (a, b))
    funcs = []
    for j in range(len(inits)):
        w = np.zeros(len(inits), dtype=complex)
        w[j] = 1.0
        u = ivp.Trajectory(sol, w)
        for v in funcs:
            u = u.plus(v, -u.inner(v))
        funcs.append(u.scaled(1.0 / math.sqrt(u.norm2())))
    return tuple(funcs)


# separated conditions ------------------------------------------------------

def _initial_bounds(problem, phi_a, phi_b, n_hi):
    """lambda_lo with count 0 and lambda_hi with count >= n_hi."""
    samples = {}
    lo = 0.0
    step = 1.0 + 1 / math.e
    while True:
        c, d = _probe(problem, phi_a, phi_b, [lo])
        samples[lo] = (int(c[0]), float(d[0]))
        if c[0] == 0:
            break
        lo = -step
        step *= 4.0
        if step > 1e20:
            raise WindowTooCoarse("no lower bound for the spectrum found")
    hi = math.sqrt(2.0)
    while True:
        c, d = _probe(problem, phi_a, phi_b, [hi])
        samples[hi] = (int(c[0]), float(d[0]))
        if c[0] >= n_hi:
            break
        hi *= 3.7
        if hi > 1e20:
            raise WindowTooCoarse("upper window bound grew beyond 1e20")
    return samples


def _isolate(problem, phi_a, phi_b, targets, samples, max_rounds=200):
    """Batched bisection on the count until each target index n has a bracket
    (lo, hi) with count(lo) = n and count(hi) = n + 1."""
    for _ in range(max_rounds):
        lams = np.array(sorted(samples))
        counts = np.array([samples[t][0] for t in lams])
        brackets, mids = {}, set()
        for n in targets:
            i_lo = np.nonzero(counts <= n)[0]
            i_hi = np.nonzero(counts >= n + 1)[0]
            lo, hi = lams[i_lo[-1]], lams[i_hi[0]]
            if counts[i_lo[-1]] == n and counts[i_hi[0]] == n + 1:
                brackets[n] = (lo, hi)
            else:
                mid = 0.5 * (lo + hi)
                if hi - lo <= 1e-13 * (1 + abs(mid)):
                    raise WindowTooCoarse(f"eigenvalues near {mid:.12g} could not be separated")
                mids.add(mid)
        if not mids:
            return brackets
        new = np.array(sorted(mids))
        c, d = _probe(problem, phi_a, phi_b, new)
        for t, ci, di in zip(new, c, d):
            samples[float(t)] = (int(ci), float(di))
    raise WindowTooCoarse("eigenvalue isolation did not finish")


def _tighten(problem, pa, pb, ns, lo, hi, flo, fhi, idx, rounds=80):
    """Shrink count-isolating brackets (in place) until the characteristic
    function changes sign; needed when a sample lands on an eigenvalue."""
    idx = list(idx)
    for _ in range(rounds):
        if not idx:
            return
        mid = 0.5 * (lo[idx] + hi[idx])
        c, d = _probe(problem, pa, pb, mid)
        keep = []
        for k, i in enumerate(idx):
            n = ns[k] if np.ndim(ns) else ns
            if c[k] <= n:
                lo[i], flo[i] = mid[k], d[k]
            else:
                hi[i], fhi[i] = mid[k], d[k]
            if flo[i] * fhi[i] > 0 and hi[i] - lo[i] > _lam_tol(lo[i]):
                keep.append(i)
            elif flo[i] * fhi[i] > 0:
                lo[i] = hi[i] = 0.5 * (lo[i] + hi[i])
                flo[i] = 0.0
        ns = [ns[idx.index(i)] for i in keep]
        idx = keep
    raise WindowTooCoarse("characteristic function has no sign change on an isolating bracket")


def _separated(problem, bc, lam_min, lam_max, count, start):
    _require_positive_p(problem)
    pa, pb = bc.phi_a, bc.phi_b
    if count is not None:
        samples = _initial_bounds(problem, pa, pb, start + count)
        targets = list(range(start, start + count))
    else:
        samples = _initial_bounds(problem, pa, pb, 1)
        edge = np.array([lam_min, lam_max + _lam_tol(lam_max)])
        c, d = _probe(problem, pa, pb, edge)
        for t, ci, di in zip(edge, c, d):
            samples[float(t)] = (int(ci), float(di))
        targets = list(range(int(c[0]), int(c[1])))
        if targets:
            samples.update(_initial_bounds(problem, pa, pb, targets[-1] + 1))
        # an eigenvalue sitting exactly on lam_min is not counted below it
        if abs(d[0]) <= D_TOL and int(c[0]) > 0:
            targets = [int(c[0]) - 1] + targets
            samples.update(_initial_bounds(problem, pa, pb, targets[-1] + 1))
    if not targets:
        return []
    brackets = _isolate(problem, pa, pb, targets, samples)
    lo = np.array([brackets[n][0] for n in targets])
    hi = np.array([brackets[n][1] for n in targets])
    flo = np.array([samples[t][1] for t in lo])
    fhi = np.array([samples[t][1] for t in hi])
    bad = np.nonzero(flo * fhi > 0)[0]
    if len(bad):
        _tighten(problem, pa, pb, np.array(targets)[bad], lo, hi, flo, fhi, bad)
    roots = _illinois(lambda x: _probe(problem, pa, pb, x)[1], lo, hi, flo, fhi, _lam_tol, D_TOL)
    init = [(math.sin(pa), math.cos(pa))]
    out = [Eigenpair(problem, bc, lam, 1, n, init) for n, lam in zip(targets, roots)]
    if count is None:
        tol = _lam_tol(lam_max)
        out = [e for e in out if lam_min - _lam_tol(lam_min) <= e.lam <= lam_max + tol]
    return out


# coupled conditions --------------------------------------------------------

def _coupled_eval(problem, bc, lams):
    T, _ = ivp.transfer_matrices(problem, np.asarray(lams, dtype=float))
    # real lambda: T is real up to rounding
    T = np.real(T)
    return np.real(discriminant_from_T(bc, T)), T


def _coincidence(bc, T):
    return float(np.linalg.norm(bc.coupling - T))


def _refine_double(problem, bc, lam0, width):
    """Locate a candidate double eigenvalue by a secant iteration on the
    entry of R - T(lambda) that varies fastest."""
    h = max(1e-6 * (1 + abs(lam0)), 1e-3 * width)
    _, T = _coupled_eval(problem, bc, [lam0 - h, lam0, lam0 + h])
    E = bc.coupling.real - T
    dE = (E[2] - E[0]) / (2 * h)
    i, j = np.unravel_index(np.argmax(np.abs(dE)), (2, 2))

    def g(x):
        _, Tx = _coupled_eval(problem, bc, np.atleast_1d(x))
        return bc.coupling.real[i, j] - Tx[:, i, j]

    x0, x1 = lam0, lam0 - E[1, i, j] / dE[i, j] if dE[i, j] != 0 else lam0
    f0 = E[1, i, j]
    for _ in range(60):
        f1 = float(g(x1)[0])
        if f1 == f0 or abs(x1 - x0) <= 0.1 * _lam_tol(x1):
            break
        x0, x1, f0 = x1, x1 - f1 * (x1 - x0) / (f1 - f0), f1
    return x1


def _null_inits(bc, T, mult):
    if mult == 2:
        return [(1.0, 0.0), (0.0, 1.0)]
    _, _, vh = np.linalg.svd(bc.coupling - T)
    v = vh[-1].conj()
    return [tuple(v)]


def _scan_nodes(lo, hi, mus, per_gap=24):
    pts = [lo, hi] + [m for m in mus if lo < m < hi]
    pts = np.unique(pts)
    out = [pts[:1]]
    for a, b in zip(pts[:-1], pts[1:]):
        out.append(np.linspace(a, b, per_gap + 1)[1:])
    return np.concatenate(out)


def _downward_nodes(problem, bc, top, scale):
    """Geometric scan below ``top`` until the discriminant is large and
    growing monotonically; returns the sample points reached."""
    pts = [top]
    vals = []
    k = 0
    while True:
        k += 1
        t = top - scale * (2.0 ** k - 1)
        pts.append(t)
        d, _ = _coupled_eval(problem, bc, [t])
        vals.append(abs(d[0]))
        if (len(vals) >= 4 and vals[-1] > 1e8 * (1 + abs(2 * math.cos(bc.phi)))
                and vals[-1] > vals[-2] > vals[-3]):
            return float(t)
        if k > 80:
            raise WindowTooCoarse("discriminant did not grow below the Dirichlet ground state")


def _coupled_roots(problem, bc, lo, hi, mus):
    nodes = _scan_nodes(lo, hi, mus)
    # refine geometric gaps below the first Dirichlet eigenvalue
    if mus and lo < mus[0]:
        gap = mus[0] - lo
        extra = mus[0] - gap * np.geomspace(1e-3, 1.0, 40)
        extra = extra[(extra > lo) & (extra < hi)]
        nodes = np.unique(np.concatenate([nodes, extra]))
    vals, _ = _coupled_eval(problem, bc, nodes)
    cands = []
    sc = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
    if len(sc):
        r = _illinois(lambda x: _coupled_eval(problem, bc, x)[0], nodes[sc], nodes[sc + 1],
                      vals[sc], vals[sc + 1], _lam_tol, 1e-12)
        cands.extend(r.tolist())
    cands.extend(nodes[vals == 0].tolist())
    scale = 1.0 + np.abs(vals).max()
    for i in range(1, len(nodes) - 1):
        v = vals[i - 1:i + 2]
        if not (np.all(v > 0) or np.all(v < 0)):
            continue
        if abs(v[1]) > min(abs(v[0]), abs(v[2])):
            continue
        sgn = 1.0 if v[1] > 0 else -1.0
        res = minimize_scalar(lambda x: sgn * _coupled_eval(problem, bc, [x])[0][0],
                              bounds=(nodes[i - 1], nodes[i + 1]), method="bounded",
                              options={"xatol": 1e-9 * (1 + abs(nodes[i]))})
        ext = sgn * res.fun
        if np.sign(ext) != sgn and ext != 0:
            # the extremum crosses zero: two close simple roots
            for a, b in ((nodes[i - 1], res.x), (res.x, nodes[i + 1])):
                fa = _coupled_eval(problem, bc, [a])[0][0]
                r = _illinois(lambda x: _coupled_eval(problem, bc, x)[0], [a], [b], [fa], [ext],
                              _lam_tol, 1e-12)
                cands.append(float(r[0]))
        elif abs(ext) <= 1e-6 * scale:
            cands.append(float(res.x))
    cands.sort()
    clusters = []
    for c in cands:
        if clusters and abs(c - clusters[-1][-1]) <= 1e-6 * (1 + abs(c)):
            clusters[-1].append(c)
        else:
            clusters.append([c])
    out = []
    for cl in clusters:
        lam = float(np.mean(cl))
        d, T = _coupled_eval(problem, bc, [lam])
        if bc.phi == 0.0 and _coincidence(bc, T[0]) <= 1e-3:
            lam2 = _refine_double(problem, bc, lam, 1e-6 * (1 + abs(lam)))
            d2, T2 = _coupled_eval(problem, bc, [lam2])
            if _coincidence(bc, T2[0]) <= DOUBLE_TOL:
                out.append((lam2, 2, T2[0]))
                continue
        if len(cl) >= 2 and max(cl) - min(cl) > 2 * _lam_tol(lam):
            for c in (min(cl), max(cl)):
                out.append((c, 1, _coupled_eval(problem, bc, [c])[1][0]))
        else:
            out.append((lam, 1, T[0]))
    return out


def _coupled(problem, bc, lam_min, lam_max, count):
    d = Separated(0.0, 0.0)
    pos = problem.p_sign() == 1
    if not pos:
        raise HypothesisViolation("coupled eigenvalue search needs p > 0 on [a, b]")
    if count is not None:
        mus = [e.lam for e in _separated(problem, d, None, None, count + 2, 0)]
        top = mus[-1]
        scale = max(1.0, mus[1] - mus[0]) if len(mus) > 1 else 1.0
        lo = _downward_nodes(problem, bc, mus[0], scale)
        hi = top
    else:
        lo, hi = float(lam_min), float(lam_max)
        n_hi = eigenvalue_count(problem, 0.0, 0.0, hi + _lam_tol(hi)) + 1
        mus = [e.lam for e in _separated(problem, d, None, None, n_hi, 0)]
    roots = _coupled_roots(problem, bc, lo, hi, mus)
    if count is None:
        roots = [r for r in roots if lo - _lam_tol(lo) <= r[0] <= hi + _lam_tol(hi)]
    n_dir = sum(1 for m in mus if lo <= m <= hi)
    n_cpl = sum(mult for _, mult, _ in roots)
    if count is None and abs(n_cpl - n_dir) > 2:
        raise WindowTooCoarse(f"found {n_cpl} coupled eigenvalues against {n_dir} Dirichlet ones")
    pairs = [Eigenpair(problem, bc, lam, mult, None, _null_inits(bc, T, mult))
             for lam, mult, T in roots]
    if count is not None:
        out, total = [], 0
        for e in pairs:
            if total >= count:
                break
            out.append(e)
            total += e.multiplicity
        if total < count:
            raise WindowTooCoarse(f"only {total} coupled eigenvalues located below {hi:.6g}")
        return out
    return [e for e in pairs if lo - _lam_tol(lo) <= e.lam <= hi + _lam_tol(hi)]


def eigenvalues(problem, bc, lam_min=None, lam_max=None, count=None, start=0):
    """Eigenvalues in [lam_min, lam_max], or the first ``count`` of them.

    Parameters
    ----------
    bc : Separated or Coupled
    count : number of eigenvalues from the bottom of the spectrum (counted
        with multiplicity for coupled conditions).
    start : first oscillation index in count mode (separated only).

    Returns
    -------
    list of Eigenpair sorted by lambda.
    """
    _require_regular(problem)
    if count is None and (lam_min is None or lam_max is None):
        raise PreconditionError("give either a window [lam_min, lam_max] or a count")
    if count is not None and count < 0:
        raise PreconditionError("count must be nonnegative")
    if count is None and lam_min > lam_max:
        raise PreconditionError("empty window")
    if isinstance(bc, Separated):
        return _separated(problem, bc, lam_min, lam_max, count, start)
    if isinstance(bc, Coupled):
        if count == 0:
            return []
        return _coupled(problem, bc, lam_min, lam_max, count)
    raise PreconditionError(f"unsupported boundary condition {bc!r}")


def lower_bound(problem, bc):
    """Smallest eigenvalue (the operator is bounded below by it)."""
    ev = eigenvalues(problem, bc, count=1)
    return ev[0].lam


def oscillation_count(problem, phi_a, lam):
    """Interior zeros on (a, b) of the solution with u(a) = sin(phi_a),
    u^[1](a) = cos(phi_a)."""
    _require_regular(problem)
    if problem.p_sign() == 0:
        raise HypothesisViolation("oscillation counting needs p of one sign")
    a, b = problem.a, problem.b
    u = ivp.integrate(problem, float(lam), (a, math.sin(phi_a), math.cos(phi_a)), b)
    z = ivp.sign_changes(u, a, b)
    tol = 1e-9 * (b - a)
    return int(np.sum((z > a + tol) & (z < b - tol)))


# principal solutions -------------------------------------------------------

@dataclass
class PrincipalPair:
    """Principal solution u0 and non-principal u1 at ``endpoint`` with the
    window evidence for the integrals of 1/(p u^2)."""

    u0: object
    u1: object
    endpoint: str
    x0: float
    wronskian: float
    evidence: dict = field(default_factory=dict)

    def ratio(self, x):
        """u0(x) / u1(x); tends to 0 at the endpoint."""
        return np.real(self.u0(x)[0] / self.u1(x)[0])


_CANDIDATES = ((1.0, 0.0), (1.0, 1.0), (1.0, -1.0), (1.0, 3.0), (1.0, -3.0))


def _window_sequence(f_cum, base, pts):
    return [abs(float(np.real(f_cum(t) - f_cum(base)))) for t in pts]


def principal_solution(problem, lam, endpoint="b", x0=None, n_windows=12):
    """Principal and non-principal solutions at ``endpoint``.

    A zero-free real solution u on the window between x0 and the endpoint
    gives u1 = u * int_{x0}^x dt/(p u^2) and u0 = u * int_x^end dt/(p u^2).
    """
    if endpoint not in ("a", "b"):
        raise PreconditionError("endpoint must be 'a' or 'b'")
    a, b = problem.a, problem.b
    x0 = float(a if endpoint == "b" else b) if x0 is None else float(x0)
    end = b if endpoint == "b" else a
    sing = problem.singular_b if endpoint == "b" else problem.singular_a
    if problem.p_sign() != 1:
        raise HypothesisViolation("principal solutions need p > 0")
    L = abs(end - x0)
    if sing:
        # stop short of a singular endpoint
        end_eff = end - math.copysign(L * 0.5 ** (n_windows + 2), end - x0)
    else:
        end_eff = end
    lo, hi = sorted((x0, end_eff))
    best, zeros_seen = None, []
    for u0, du0 in _CANDIDATES:
        sol = ivp.solve_columns(problem, [float(lam)], np.array([[u0], [du0]], dtype=complex), x0, (lo, hi))
        u = ivp.Trajectory(sol, [1.0])
        z = ivp.sign_changes(u, lo, hi)
        e = u.edges(lo, hi)
        xs = np.linspace(lo, hi, 2001)
        vals = np.concatenate([np.real(u(e)[0]), np.real(u(xs)[0])])
        if len(z) == 0 and np.all(vals != 0) and (np.all(vals > 0) or np.all(vals < 0)):
            best = u
            break
        zeros_seen.append(z)
    if best is None:
        counts = [len(z) for z in zeros_seen]
        tail = [np.sum(np.abs(z - end) < 0.25 * L) for z in zeros_seen]
        if min(counts) >= 8 and min(tail) >= 3:
            raise OscillatoryAtEndpoint(f"solutions at lambda = {lam} oscillate towards {endpoint}")
        zs = zeros_seen[int(np.argmin(counts))]
        raise ZeroInWindow(f"every trial solution vanishes in the window (e.g. at x = {zs[0]:.10g}); "
                           "move x0 closer to the endpoint")
    u = best
    p = problem.p
    edges = merge_edges(u.edges(lo, hi), lo=lo, hi=hi)
    dens = lambda x: 1.0 / (p(x) * np.real(u(x)[0]) ** 2)
    I = Cumulative(dens, edges, refine=True)
    sgn = 1.0 if end > x0 else -1.0

    # F(x) = int_{x0}^x dt/(p u^2), oriented towards the endpoint
    F = lambda x: sgn * (I(x) - I(x0))
    Fend = F(end_eff)
    k = np.arange(1, n_windows + 1)
    pts = end - sgn * L * 0.5 ** k
    mid = x0 + sgn * 0.5 * L
    conv_u = tail_trend(_window_sequence(F, mid, pts[pts * sgn <= end_eff * sgn]))
    evidence = {"windows": pts.tolist(), "base": mid}
    if sing and conv_u != "converges":
        # u itself is principal
        def u0_fn(x):
            uu, uq = u(x)
            return np.real(uu), np.real(uq)
        wr = 1.0
    else:
        def u0_fn(x):
            uu, uq = u(x)
            f = Fend - F(x)
            return np.real(uu) * f, np.real(uq) * f - sgn / np.real(uu)
        wr = float(Fend)

    def u1_fn(x):
        uu, uq = u(x)
        f = F(x)
        return np.real(uu) * f, np.real(uq) * f + sgn / np.real(uu)

    U0 = ivp.FunctionTrajectory(problem, lam, u0_fn, I.edges)
    U1 = ivp.FunctionTrajectory(problem, lam, u1_fn, I.edges)

    # window evidence: int dx/(p u1^2) converges, int dx/(p u0^2) diverges
    def cum_of(traj):
        e2 = merge_edges(I.edges, pts, lo=lo, hi=hi)
        return Cumulative(lambda x: 1.0 / (p(x) * np.real(traj(x)[0]) ** 2), e2)
    inside = pts[(pts - lo) * (hi - pts) >= 0]
    inside = inside[np.abs(inside - end) > 0]
    seq1 = _window_sequence(cum_of(U1), mid, inside)
    with np.errstate(divide="ignore", over="ignore"):
        seq0 = _window_sequence(cum_of(U0), mid, inside)
    evidence["nonprincipal_integral"] = {"values": seq1, "trend": tail_trend(seq1)}
    evidence["principal_integral"] = {"values": seq0, "trend": tail_trend(seq0)}
    return PrincipalPair(U0, U1, endpoint, x0, wr, evidence)
