"""Vectorised quadrature helpers: composite Gauss-Legendre on panels,
cumulative integrals, adaptive Gauss-Kronrod over batched integrands and
Richardson extrapolation."""

from functools import lru_cache

import numpy as np

from .errors import ExtrapolationDiverged, NonConvergent


@lru_cache(maxsize=None)
def gauss_legendre(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def panel_nodes(edges, n=8):
    """Gauss nodes and weights on every panel [edges[i], edges[i+1]]."""
    e = np.asarray(edges, dtype=float)
    t, w = gauss_legendre(n)
    mid = 0.5 * (e[:-1] + e[1:])
    half = 0.5 * np.diff(e)
    return mid[:, None] + half[:, None] * t[None, :], half[:, None] * w[None, :]


def merge_edges(*groups, lo=None, hi=None):
    """Sorted union of edge arrays, clipped to [lo, hi], with near-duplicates
    removed."""
    e = np.unique(np.concatenate([np.asarray(g, dtype=float).ravel() for g in groups]))
    if lo is not None:
        e = e[(e >= lo) & (e <= hi)]
        e = np.unique(np.concatenate([[lo], e, [hi]]))
    keep = np.concatenate([[True], np.diff(e) > 1e-14 * (1 + np.abs(e[1:]))])
    e = e[keep]
    if hi is not None:
        e[-1] = hi
    return e


def refine_edges(f, edges, n=10, tol=1e-13, max_rounds=14):
    """Bisect panels where an n-point Gauss rule disagrees with the two-half
    composite rule by more than ``tol`` (absolute, scaled by the total)."""
    e = np.asarray(edges, dtype=float)
    for _ in range(max_rounds):
        xs, ws = panel_nodes(e, n)
        whole = (f(xs.ravel()).reshape(xs.shape) * ws).sum(axis=1)
        mids = 0.5 * (e[:-1] + e[1:])
        halves = np.empty(2 * len(mids) + 1)
        halves[0::2] = e
        halves[1::2] = mids
        xh, wh = panel_nodes(halves, n)
        parts = (f(xh.ravel()).reshape(xh.shape) * wh).sum(axis=1)
        split = parts[0::2] + parts[1::2]
        scale = max(1.0, float(np.abs(split).sum()))
        bad = np.abs(split - whole) > tol * scale
        if not bad.any():
            return e
        new = np.sort(np.concatenate([e, mids[bad]]))
        e = new
    return e


class Cumulative:
    """F(x) = integral of f from edges[0] to x, by composite Gauss-Legendre.

    ``f`` must accept an array of points.  Values at arbitrary x come from the
    partial panel containing x.
    """

    def __init__(self, f, edges, n=10, refine=False, tol=1e-13):
        e = np.asarray(edges, dtype=float)
        if refine:
            e = refine_edges(f, e, n, tol)
        self.f = f
        self.edges = e
        self.n = n
        xs, ws = panel_nodes(e, n)
        vals = f(xs.ravel()).reshape(xs.shape)
        self.dtype = vals.dtype
        panel = (vals * ws).sum(axis=1)
        self.at_edges = np.concatenate([[0.0], np.cumsum(panel)])

    @property
    def total(self):
        return self.at_edges[-1]

    def __call__(self, x):
        xa = np.atleast_1d(np.asarray(x, dtype=float))
        e = self.edges
        i = np.clip(np.searchsorted(e, xa, side="right") - 1, 0, len(e) - 2)
        t, w = gauss_legendre(self.n)
        lo = e[i]
        half = 0.5 * (xa - lo)
        pts = (lo + half)[:, None] + half[:, None] * t[None, :]
        part = (self.f(pts.ravel()).reshape(pts.shape) * (half[:, None] * w[None, :])).sum(axis=1)
        out = self.at_edges[i] + part
        return out if np.ndim(x) else out[0]


# 7-15 Gauss-Kronrod pair (QUADPACK qk15 abscissae and weights)
_XGK = np.array([0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                 0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                 0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                 0.207784955007898467600689403773245, 0.0])
_WGK = np.array([0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                 0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                 0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                 0.204432940075298892414161999234649, 0.209482141084727828012999174891714])
_WG = np.array([0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                0.381830050505118944950369775488975, 0.417959183673469387755102040816327])
GK_X = np.concatenate([-_XGK[:-1], _XGK[::-1]])
GK_W = np.concatenate([_WGK[:-1], _WGK[::-1]])
_G_W = np.zeros(15)
_G_W[[1, 3, 5, 7, 9, 11, 13]] = np.concatenate([_WG[:3], [_WG[3]], _WG[2::-1]])


def adaptive_gk(f, a, b, tol=1e-10, init=None, max_rounds=40, max_panels=20000, rtol=0.0):
    """Globally adaptive 7-15 Gauss-Kronrod for a batched integrand.

    ``f`` maps an array of points to values.  Panels whose Kronrod-Gauss
    difference exceeds both their share of ``tol`` and ``rtol`` times their
    own value are bisected each round, so all new nodes of a round are
    evaluated in one call.  The relative test keeps noisy integrands (values
    from an ODE solve) from refining forever near tall peaks.  Returns
    (value, error estimate, None).
    """
    edges = np.linspace(a, b, 9) if init is None else np.asarray(init, dtype=float)
    done_val = 0.0
    done_err = 0.0
    active = np.stack([edges[:-1], edges[1:]], axis=1)
    for _ in range(max_rounds):
        mid = 0.5 * (active[:, 0] + active[:, 1])
        half = 0.5 * (active[:, 1] - active[:, 0])
        pts = mid[:, None] + half[:, None] * GK_X[None, :]
        vals = f(pts.ravel()).reshape(pts.shape)
        kron = (vals * GK_W).sum(axis=1) * half
        gauss = (vals * _G_W).sum(axis=1) * half
        err = np.abs(kron - gauss)
        total = done_val + kron.sum()
        budget = max(tol, 1e-14 * abs(total)) * (2 * half) / (b - a)
        ok = (err <= budget) | (err <= rtol * np.abs(kron))
        done_val += kron[ok].sum()
        done_err += err[ok].sum()
        if ok.all():
            return done_val, done_err, None
        bad = active[~ok]
        if 2 * len(bad) > max_panels:
            break
        m = 0.5 * (bad[:, 0] + bad[:, 1])
        active = np.concatenate([np.stack([bad[:, 0], m], 1), np.stack([m, bad[:, 1]], 1)])
    raise NonConvergent(f"adaptive quadrature on [{a}, {b}] did not reach tolerance {tol}")


def richardson(eps, values, powers=(1, 2, 3)):
    """Extrapolate values(eps) to eps -> 0 assuming an expansion in the given
    powers of eps.  Uses the last len(powers)+1 samples (smallest eps).

    Returns (limit, difference between the two highest-order estimates).
    """
    eps = np.asarray(eps, dtype=float)
    vals = np.asarray(values, dtype=float)
    k = min(len(powers), len(eps) - 1)
    if k < 1:
        return float(vals[-1]), float("inf")

    def fit(e, v):
        A = np.stack([np.ones_like(e)] + [e ** p for p in powers[:len(e) - 1]], axis=1)
        return float(np.linalg.solve(A, v)[0])

    best = fit(eps[-(k + 1):], vals[-(k + 1):])
    prev = fit(eps[-(k + 1):-1], vals[-(k + 1):-1]) if k >= 1 else vals[-1]
    alt = fit(eps[-k:], vals[-k:]) if k >= 1 else prev
    return best, max(abs(best - alt), abs(best - prev)) if k > 1 else abs(best - alt)


def check_extrapolation(limit, spread, tol):
    if not np.isfinite(limit) or spread > tol:
        raise ExtrapolationDiverged(f"extrapolated value {limit:.6g} unstable (spread {spread:.2e} > {tol:.1e})")
