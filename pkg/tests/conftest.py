import math

import numpy as np
import pytest
from hypothesis import settings
from scipy.integrate import solve_ivp

from quasisl.coeffs import make_problem

settings.register_profile("quasisl", max_examples=25, deadline=None, derandomize=True)
settings.load_profile("quasisl")

PI = math.pi
HALF_PI = 0.5 * math.pi


def free(a=0.0, b=1.0, **kw):
    return make_problem(a, b, **kw)


def delta_problem():
    """s = unit step at pi/2 with q = -s^2 on (0, pi): a point interaction of
    strength -1 at the midpoint."""
    s = [{"from": 0, "to": HALF_PI, "expr": "0"}, {"from": HALF_PI, "to": PI, "expr": "1"}]
    q = [{"from": 0, "to": HALF_PI, "expr": "0"}, {"from": HALF_PI, "to": PI, "expr": "-1"}]
    return make_problem(0.0, PI, q=q, s=s)


def random_problem(rng, n_pieces=3, a=0.0, b=1.0):
    """Piecewise-constant p, q, r, s with p, r in [0.5, 2]."""
    cuts = np.sort(rng.uniform(a, b, n_pieces - 1))
    bps = np.concatenate([[a], cuts, [b]])

    def pieces(lo, hi):
        vals = rng.uniform(lo, hi, n_pieces)
        return [{"from": float(bps[i]), "to": float(bps[i + 1]), "expr": repr(float(vals[i]))}
                for i in range(n_pieces)]

    return make_problem(a, b, p=pieces(0.5, 2.0), q=pieces(-1.0, 1.0), r=pieces(0.5, 2.0),
                        s=pieces(-1.0, 1.0))


def reference_solution(P, z, y0, x0, x1):
    """Independent oracle for piecewise-constant coefficients: scipy DOP853
    piece by piece on the real/imag split of the first-order system."""
    bps = [b for b in P.breakpoints if min(x0, x1) < b < max(x0, x1)]
    stops = [x0] + (sorted(bps) if x1 > x0 else sorted(bps, reverse=True)) + [x1]
    y = np.array([y0[0].real, y0[0].imag, y0[1].real, y0[1].imag])
    for lo, hi in zip(stops[:-1], stops[1:]):
        xm = 0.5 * (lo + hi)
        p, q, r, s = (float(P.coefficient(n)(xm)) for n in "pqrs")

        def rhs(x, Y):
            u = Y[0] + 1j * Y[1]
            u1 = Y[2] + 1j * Y[3]
            du = -s * u + u1 / p
            du1 = (q - z * r) * u + s * u1
            return [du.real, du.imag, du1.real, du1.imag]

        y = solve_ivp(rhs, (lo, hi), y, method="DOP853", rtol=1e-13, atol=1e-14).y[:, -1]
    return complex(y[0], y[1]), complex(y[2], y[3])


def reference_char(P, phi_a, phi_b, lam):
    """Separated characteristic function from the reference integrator."""
    u, u1 = reference_solution(P, lam, (complex(math.sin(phi_a)), complex(math.cos(phi_a))), P.a, P.b)
    return (u * math.cos(phi_b) - u1 * math.sin(phi_b)).real


@pytest.fixture(scope="session")
def free01():
    return free(0.0, 1.0)


@pytest.fixture(scope="session")
def free0pi():
    return free(0.0, PI)


@pytest.fixture(scope="session")
def delta():
    return delta_problem()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
