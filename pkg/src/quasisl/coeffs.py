"""Coefficients p, q, r, s on (a, b): parsing, validation, quadrature and
endpoint classification.

The differential expression is

    tau f = (1/r) ( -(f1)' + s f1 + q f ),   f1 = p (f' + s f),

so a jump in ``s`` realises a point interaction; no distributions are stored.
"""

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate as _spi

from .errors import (HypothesisViolation, IntegrationFailure, NonConvergent,
                     NonIntegrable, ProblemSpecError)
from .expr import Expr, as_expr, linear, parse_expr

COEFF_NAMES = ("p", "q", "r", "s")
DEFAULTS = {"p": "1", "q": "0", "r": "1", "s": "0"}

REGULAR = "Regular"
LIMIT_CIRCLE = "LimitCircle"
LIMIT_POINT = "LimitPoint"
INCONCLUSIVE = "Inconclusive"


class PiecewiseFn:
    """Piecewise closed-form function on ``[breakpoints[0], breakpoints[-1]]``.

    Piece ``i`` lives on ``[breakpoints[i], breakpoints[i+1]]``; at an interior
    breakpoint the right-hand piece is used.  ``continuous[i]`` records whether
    piece ``i`` meets piece ``i+1`` continuously (the last flag is always True).
    """

    def __init__(self, breakpoints, exprs):
        bps = np.asarray(breakpoints, dtype=float)
        exprs = tuple(as_expr(e) for e in exprs)
        if bps.ndim != 1 or len(bps) != len(exprs) + 1:
            raise ProblemSpecError("need exactly one expression per piece")
        if not np.all(np.diff(bps) > 0):
            raise ProblemSpecError(f"breakpoints must be strictly increasing: {bps.tolist()}")
        self.breakpoints = tuple(float(b) for b in bps)
        self.exprs = exprs
        flags = []
        for i in range(len(exprs) - 1):
            xb = bps[i + 1]
            left, right = exprs[i](xb), exprs[i + 1](xb)
            flags.append(bool(np.isfinite(left) and np.isfinite(right)
                              and abs(left - right) <= 1e-12 * (1 + abs(left))))
        flags.append(True)
        self.continuous = tuple(flags)

    @classmethod
    def constant(cls, a, b, value):
        return cls([a, b], [as_expr(value)])

    @property
    def a(self):
        return self.breakpoints[0]

    @property
    def b(self):
        return self.breakpoints[-1]

    def piece_index(self, x):
        idx = np.searchsorted(self.breakpoints, x, side="right") - 1
        return np.clip(idx, 0, len(self.exprs) - 1)

    def __call__(self, x):
        xa = np.asarray(x, dtype=float)
        if len(self.exprs) == 1:
            return self.exprs[0](xa)
        idx = self.piece_index(xa)
        if xa.ndim == 0:
            return self.exprs[int(idx)](xa)
        out = np.empty(xa.shape)
        for i, e in enumerate(self.exprs):
            mask = idx == i
            if mask.any():
                out[mask] = e(xa[mask])
        return out

    def is_zero(self):
        return all(e.is_constant() and e(0.0) == 0.0 for e in self.exprs)

    def to_json(self):
        bp = self.breakpoints
        return [{"from": bp[i], "to": bp[i + 1], "expr": str(e)} for i, e in enumerate(self.exprs)]

    def __repr__(self):
        return f"PiecewiseFn({self.to_json()!r})"


def _num(value, what):
    if isinstance(value, str):
        e = parse_expr(value)
        if not e.is_constant():
            raise ProblemSpecError(f"{what} must be a constant, got {value!r}")
        return e(0.0)
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ProblemSpecError(f"{what} must be a number, got {value!r}") from None


def piecewise_from_spec(spec, a, b, name="coefficient"):
    """Build a PiecewiseFn from the file format (a list of pieces), a bare
    expression string, a number, an Expr or an existing PiecewiseFn."""
    if isinstance(spec, PiecewiseFn):
        return spec
    if isinstance(spec, (str, int, float, Expr)):
        return PiecewiseFn([a, b], [as_expr(spec)])
    if not isinstance(spec, (list, tuple)) or not spec:
        raise ProblemSpecError(f"{name}: expected a non-empty list of pieces")
    bps, exprs = [], []
    for k, piece in enumerate(spec):
        if isinstance(piece, (list, tuple)) and len(piece) == 3:
            piece = {"from": piece[0], "to": piece[1], "expr": piece[2]}
        if not isinstance(piece, dict) or "from" not in piece or "to" not in piece:
            raise ProblemSpecError(f"{name}: piece {k} needs 'from' and 'to'")
        lo, hi = _num(piece["from"], f"{name}.from"), _num(piece["to"], f"{name}.to")
        if not hi > lo:
            raise ProblemSpecError(f"{name}: piece {k} has empty range [{lo}, {hi}]")
        if bps and abs(lo - bps[-1]) > 1e-12 * (1 + abs(lo)):
            raise ProblemSpecError(f"{name}: pieces must be contiguous (gap at {bps[-1]})")
        if not bps:
            bps.append(lo)
        if "expr" in piece:
            exprs.append(as_expr(piece["expr"]))
            bps.append(hi)
        elif "table" in piece:
            tab = np.asarray(piece["table"], dtype=float)
            if tab.ndim != 2 or tab.shape[1] != 2 or len(tab) < 2:
                raise ProblemSpecError(f"{name}: table must be a list of [x, y] pairs")
            tab = tab[np.argsort(tab[:, 0], kind="stable")]
            inner = tab[(tab[:, 0] > lo) & (tab[:, 0] < hi), 0]
            xs = np.concatenate([[lo], inner, [hi]])
            ys = np.interp(xs, tab[:, 0], tab[:, 1])
            for j in range(len(xs) - 1):
                exprs.append(linear(xs[j], ys[j], xs[j + 1], ys[j + 1]))
                bps.append(float(xs[j + 1]))
        else:
            raise ProblemSpecError(f"{name}: piece {k} needs 'expr' or 'table'")
    if abs(bps[0] - a) > 1e-12 * (1 + abs(a)) or abs(bps[-1] - b) > 1e-12 * (1 + abs(b)):
        raise ProblemSpecError(f"{name}: pieces must cover [{a}, {b}], got [{bps[0]}, {bps[-1]}]")
    bps[0], bps[-1] = a, b
    return PiecewiseFn(bps, exprs)


@dataclass(frozen=True, eq=False)
class Problem:
    """Validated coefficient data; build with :func:`build_problem` or
    :func:`make_problem`."""

    a: float
    b: float
    p: PiecewiseFn
    q: PiecewiseFn
    r: PiecewiseFn
    s: PiecewiseFn
    grid_n: int = 257
    singular_a: bool = False
    singular_b: bool = False
    breakpoints: tuple = field(default=())

    def coefficient(self, name):
        return getattr(self, name)

    @property
    def regular(self):
        return not (self.singular_a or self.singular_b)

    @property
    def length(self):
        return self.b - self.a

    def to_json(self):
        return {"interval": [self.a, self.b],
                "coefficients": {n: getattr(self, n).to_json() for n in COEFF_NAMES},
                "singular": {"a": self.singular_a, "b": self.singular_b}}

    def program(self):
        """Flattened coefficient bytecode for the integrator kernel (cached)."""
        prog = self.__dict__.get("_program")
        if prog is None:
            prog = _compile_problem(self)
            object.__setattr__(self, "_program", prog)
        return prog

    def p_sign(self):
        """+1 or -1 if p has one sign on the validation grid, else 0."""
        xs = validation_grid(self)
        vals = self.p(xs)
        if np.all(vals > 0):
            return 1
        if np.all(vals < 0):
            return -1
        return 0


def validation_grid(problem, per_segment=None):
    """Interior sample points of every smoothness segment."""
    bps = np.asarray(problem.breakpoints)
    nseg = len(bps) - 1
    n = per_segment or max(8, problem.grid_n // nseg)
    t = (np.arange(n) + 0.5) / n
    return (bps[:-1, None] + np.diff(bps)[:, None] * t[None, :]).ravel()


def make_problem(a, b, p="1", q="0", r="1", s="0", singular=(False, False), grid_n=257,
                 check_integrable=True):
    """Convenience constructor; coefficients may be expressions, numbers,
    piece lists or PiecewiseFn objects."""
    spec = {"interval": [a, b], "coefficients": {"p": p, "q": q, "r": r, "s": s},
            "singular": {"a": bool(singular[0]), "b": bool(singular[1])}}
    return build_problem(spec, grid_n=grid_n, check_integrable=check_integrable)


def load_problem(path):
    with open(path) as fh:
        return build_problem(json.load(fh))


def build_problem(spec, grid_n=257, check_integrable=True):
    """Validate a problem description (see the README for the JSON layout).

    Raises ``HypothesisViolation`` when r <= 0 or p == 0 on the validation grid
    and ``NonIntegrable`` when a coefficient fails the integrability check near
    an endpoint that is not declared singular.
    """
    if isinstance(spec, str):
        return load_problem(spec)
    if not isinstance(spec, dict) or "interval" not in spec:
        raise ProblemSpecError("problem needs an 'interval'")
    try:
        a, b = (_num(v, "interval") for v in spec["interval"])
    except ValueError:
        raise ProblemSpecError("interval must be [a, b]") from None
    if not (math.isfinite(a) and math.isfinite(b) and a < b):
        raise ProblemSpecError(f"interval must satisfy a < b, both finite; got [{a}, {b}]")
    coeffs = dict(spec.get("coefficients", {}))
    unknown = set(coeffs) - set(COEFF_NAMES)
    if unknown:
        raise ProblemSpecError(f"unknown coefficient(s): {sorted(unknown)}")
    fns = {n: piecewise_from_spec(coeffs.get(n, DEFAULTS[n]), a, b, n) for n in COEFF_NAMES}
    sing = spec.get("singular", {}) or {}
    bps = sorted(set().union(*(f.breakpoints for f in fns.values())))
    merged = [bps[0]]
    for x in bps[1:]:
        if x - merged[-1] > 1e-13 * (1 + abs(x)):
            merged.append(x)
    merged[-1] = b
    prob = Problem(a, b, fns["p"], fns["q"], fns["r"], fns["s"], int(grid_n),
                   bool(sing.get("a", False)), bool(sing.get("b", False)), tuple(merged))
    _check_hypothesis(prob)
    if check_integrable:
        _check_integrable(prob)
    return prob


def _check_hypothesis(prob):
    xs = validation_grid(prob)
    with np.errstate(all="ignore"):
        vals = {n: prob.coefficient(n)(xs) for n in COEFF_NAMES}
    for n, v in vals.items():
        bad = ~np.isfinite(v)
        if bad.any():
            raise HypothesisViolation(f"{n} is not finite at x = {xs[bad][0]:.6g}")
    if np.any(vals["r"] <= 0):
        x = xs[vals["r"] <= 0][0]
        raise HypothesisViolation(f"r must be positive; r({x:.6g}) = {prob.r(x):.6g}")
    if np.any(vals["p"] == 0):
        raise HypothesisViolation(f"p vanishes at x = {xs[vals['p'] == 0][0]:.6g}")
    # a sign change of p between samples of one smooth segment hides a zero
    bps = np.asarray(prob.breakpoints)
    seg = np.searchsorted(bps, xs, side="right") - 1
    flips = (np.sign(vals["p"][1:]) != np.sign(vals["p"][:-1])) & (seg[1:] == seg[:-1])
    if flips.any():
        raise HypothesisViolation(f"p changes sign inside a smooth piece near x = {xs[1:][flips][0]:.6g}")


def _check_integrable(prob):
    mid = 0.5 * (prob.a + prob.b)
    for endpoint, flagged in (("a", prob.singular_a), ("b", prob.singular_b)):
        if flagged:
            continue
        lo, hi = (prob.a, mid) if endpoint == "a" else (mid, prob.b)
        for n in COEFF_NAMES:
            fn = prob.coefficient(n)
            f = (lambda x, fn=fn: np.abs(1.0 / fn(x))) if n == "p" else (lambda x, fn=fn: np.abs(fn(x)))
            try:
                val = quad(f, lo, hi, points=prob.breakpoints, epsabs=1e-10, epsrel=1e-10)
            except NonConvergent as exc:
                raise NonIntegrable("1/p" if n == "p" else n, endpoint, str(exc)) from None
            if not math.isfinite(val):
                raise NonIntegrable("1/p" if n == "p" else n, endpoint)


# --- quadrature ------------------------------------------------------------

def quad(f, x0, x1, points=None, epsabs=1e-12, epsrel=1e-12, limit=200):
    """Adaptive Gauss-Kronrod quadrature of ``f`` over [x0, x1].

    The range is split at every breakpoint of ``f`` (when it is a
    PiecewiseFn) and at the extra ``points``; complex integrands are handled
    component-wise.  Raises ``NonConvergent`` when the error estimate stays
    above tolerance.
    """
    if x0 == x1:
        return 0.0
    sign = 1.0
    if x1 < x0:
        x0, x1, sign = x1, x0, -1.0
    cuts = set()
    if isinstance(f, PiecewiseFn):
        cuts.update(f.breakpoints)
    if points is not None:
        cuts.update(float(p) for p in points)
    edges = [x0] + sorted(c for c in cuts if x0 < c < x1) + [x1]
    probe = f(0.5 * (edges[0] + edges[1]))
    is_complex = np.iscomplexobj(probe)
    total = 0.0 + 0.0j if is_complex else 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        if is_complex:
            re = _quad_piece(lambda x: np.real(f(x)), lo, hi, epsabs, epsrel, limit)
            im = _quad_piece(lambda x: np.imag(f(x)), lo, hi, epsabs, epsrel, limit)
            total += re + 1j * im
        else:
            total += _quad_piece(f, lo, hi, epsabs, epsrel, limit)
    return sign * total


def _quad_piece(f, lo, hi, epsabs, epsrel, limit):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with np.errstate(all="ignore"):
            res = _spi.quad(lambda t: float(f(t)), lo, hi, epsabs=epsabs, epsrel=epsrel,
                            limit=limit, full_output=1)
    val, err = res[0], res[1]
    ier = 0 if len(res) == 3 else 1
    if not math.isfinite(val):
        raise NonConvergent(f"quadrature on [{lo:.6g}, {hi:.6g}] produced {val}")
    if ier and err > 1e-8 * (1 + abs(val)):
        raise NonConvergent(f"quadrature on [{lo:.6g}, {hi:.6g}] did not converge "
                            f"(estimate {val:.6g}, error {err:.3g})")
    return val


# --- endpoint classification -----------------------------------------------

@dataclass(frozen=True)
class EndpointClass:
    endpoint: str
    cls: str
    evidence: dict

    def to_json(self):
        return {"endpoint": self.endpoint, "class": self.cls, "evidence": self.evidence}


def window_points(problem, endpoint, n=8, scale="auto"):
    """Truncation points approaching ``endpoint`` and the fixed base point.

    ``scale="finite"`` halves the distance to the endpoint at each window;
    ``scale="infinite"`` doubles the distance from the opposite end, which is
    the right geometry when a long interval stands in for a half-line.
    ``"auto"`` picks ``infinite`` when b - a > 100.
    """
    a, b = problem.a, problem.b
    L = b - a
    if scale == "auto":
        scale = "infinite" if L > 100 else "finite"
    k = np.arange(1, n + 1)
    if scale == "finite":
        base = 0.5 * (a + b)
        t = b - 0.5 * L * 0.5 ** k if endpoint == "b" else a + 0.5 * L * 0.5 ** k
    elif scale == "infinite":
        frac = 0.5 ** (n - k)
        if endpoint == "b":
            base = a + L * 0.5 ** n
            t = a + L * frac
        else:
            base = b - L * 0.5 ** n
            t = b - L * frac
    else:
        raise ValueError(f"unknown window scale {scale!r}")
    return float(base), t


def tail_trend(values):
    """Classify a nondecreasing sequence of partial integrals.

    Returns ``"diverges"`` when the last value is at least twice the one two
    windows earlier, ``"converges"`` when the last two increments shrink and
    the final increment is below 1e-3 of the total or when the last three
    increments decay geometrically (ratio <= 0.75), else ``"unclear"``.
    """
    v = np.asarray(values, dtype=float)
    if len(v) < 3 or not np.all(np.isfinite(v)):
        return "diverges" if len(v) and not np.isfinite(v[-1]) else "unclear"
    if v[-3] > 0 and v[-1] >= 2.0 * v[-3]:
        return "diverges"
    d = np.diff(v)
    if d[-1] <= d[-2] * (1 + 1e-12) and abs(d[-1]) <= 1e-3 * max(abs(v[-1]), 1e-300):
        return "converges"
    # geometric decay of the increments: the remaining tail is a convergent series
    if len(d) >= 3 and np.all(d[-3:] >= 0) and np.all(d[-2:] <= 0.75 * d[-3:-1]):
        return "converges"
    if v[-1] == 0:
        return "converges"
    return "unclear"


def _partial_integrals(f, base, pts, bps):
    vals, acc, last = [], 0.0, base
    for t in pts:
        acc += abs(quad(f, last, t, points=bps, epsabs=1e-12, epsrel=1e-10, limit=400))
        vals.append(acc)
        last = t
    return vals


def classify_endpoint(problem, endpoint, z0=0.0, tail_windows=None, n_windows=8, scale="auto"):
    """Numerical Weyl classification of ``endpoint`` ('a' or 'b').

    Returns Regular immediately when the endpoint is not declared singular.
    Otherwise partial integrals over growing windows decide, in order:
    Regular (all of |1/p|, |q|, |r|, |s| converge), LimitCircle (both
    solutions of (tau - z0)u = 0 square integrable), LimitPoint (either
    a solution with divergent norm, or divergent integral of sqrt(r/p)
    with no zero accumulation of a real solution), else Inconclusive.
    """
    if endpoint not in ("a", "b"):
        raise ValueError("endpoint must be 'a' or 'b'")
    flagged = problem.singular_a if endpoint == "a" else problem.singular_b
    if not flagged:
        return EndpointClass(endpoint, REGULAR, {"declared_singular": False})
    if tail_windows is None:
        base, pts = window_points(problem, endpoint, n_windows, scale)
    else:
        pts = np.asarray(tail_windows, dtype=float)
        base = 0.5 * (problem.a + problem.b)
    bps = problem.breakpoints
    evidence = {"declared_singular": True, "windows": [float(t) for t in pts], "base": base}
    try:
        tails = {}
        for n in COEFF_NAMES:
            fn = problem.coefficient(n)
            f = (lambda x, fn=fn: 1.0 / fn(x)) if n == "p" else fn
            tails["1/p" if n == "p" else n] = _partial_integrals(f, base, pts, bps)
        hr = _partial_integrals(lambda x: np.sqrt(np.abs(problem.r(x) / problem.p(x))), base, pts, bps)
    except NonConvergent as exc:
        raise IntegrationFailure(str(exc)) from None
    trends = {k: tail_trend(v) for k, v in tails.items()}
    evidence["coefficient_tails"] = {k: {"values": v, "trend": trends[k]} for k, v in tails.items()}
    evidence["sqrt_r_over_p"] = {"values": hr, "trend": tail_trend(hr)}
    if all(t == "converges" for t in trends.values()):
        return EndpointClass(endpoint, REGULAR, evidence)

    from . import ivp  # late import: ivp depends on this module
    target = pts[-1]
    sys_ = ivp.fundamental_system(problem, complex(z0), base, x_range=(min(base, target), max(base, target)))
    norms, zeros = [], []
    for u in sys_:
        vals, acc, last = [], 0.0, base
        for t in pts:
            acc += u.norm2(last, t) if t > last else u.norm2(t, last)
            vals.append(acc)
            last = t
        norms.append(vals)
    grid_pts = np.concatenate([[base], pts])
    for k in range(len(pts)):
        lo, hi = sorted((grid_pts[k], grid_pts[k + 1]))
        zeros.append(len(ivp.sign_changes(sys_[1], lo, hi)))
    norm_trends = [tail_trend(v) for v in norms]
    evidence["solution_norms"] = [{"values": v, "trend": t} for v, t in zip(norms, norm_trends)]
    evidence["zeros_per_window"] = zeros
    nonosc = sum(zeros[-3:]) == 0
    evidence["non_oscillatory"] = bool(nonosc)
    if all(t == "converges" for t in norm_trends):
        return EndpointClass(endpoint, LIMIT_CIRCLE, evidence)
    if evidence["sqrt_r_over_p"]["trend"] == "diverges" and nonosc:
        evidence["criterion"] = "divergent sqrt(r/p) integral, non-oscillatory"
        return EndpointClass(endpoint, LIMIT_POINT, evidence)
    if any(t == "diverges" for t in norm_trends):
        evidence["criterion"] = "solution with divergent norm"
        return EndpointClass(endpoint, LIMIT_POINT, evidence)
    return EndpointClass(endpoint, INCONCLUSIVE, evidence)


def _compile_problem(prob):
    return compile_coefficients([prob.p, prob.q, prob.r, prob.s], prob.breakpoints)


def compile_coefficients(fns, breakpoints):
    """Bytecode tables for the integrator kernel.

    Program ``k`` occupies ``ops[starts[k]:starts[k]+lengths[k]]``;
    ``table[c, j]`` is the program of function ``fns[c]`` on segment ``j`` of
    ``breakpoints``.  Every breakpoint of every function must be listed.
    """
    bps = np.asarray(breakpoints, dtype=float)
    mids = 0.5 * (bps[:-1] + bps[1:])
    ops, args, consts, starts, lengths = [], [], [], [], []
    table = np.zeros((len(fns), len(mids)), dtype=np.int64)
    for c, fn in enumerate(fns):
        cache = {}
        for j, i in enumerate(fn.piece_index(mids)):
            i = int(i)
            if i not in cache:
                o, a_, k_, depth = fn.exprs[i].program()
                if depth > 32:
                    raise ProblemSpecError("expression is nested too deeply")
                cache[i] = len(starts)
                starts.append(len(ops))
                lengths.append(len(o))
                ops.extend(o)
                args.extend(x + len(consts) if op == 0 else x for op, x in zip(o, a_))
                consts.extend(k_)
            table[c, j] = cache[i]
    return CoefProgram(np.asarray(ops, dtype=np.int64), np.asarray(args, dtype=np.int64),
                       np.asarray(consts + [0.0], dtype=float), np.asarray(starts, dtype=np.int64),
                       np.asarray(lengths, dtype=np.int64), table, bps.copy())


@dataclass(frozen=True, eq=False)
class CoefProgram:
    ops: np.ndarray
    args: np.ndarray
    consts: np.ndarray
    starts: np.ndarray
    lengths: np.ndarray
    table: np.ndarray
    bps: np.ndarray
