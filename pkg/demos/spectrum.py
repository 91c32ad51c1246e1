#! /usr/bin/env python3
"""Eigenvalues of a step potential with a point interaction, compared
against the root equation of the piecewise-constant problem."""
import math
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from quasisl import eigen
from quasisl.boundary import DIRICHLET, PERIODIC, Separated
from quasisl.coeffs import load_problem

HERE = Path(__file__).resolve().parent


def reference(n):
    # odd branch: tan(k pi/2) = 2k; even branch: k = 2m
    out = [(2 * m) ** 2 for m in range(1, n + 1)]
    for j in range(n):
        lo, hi = 2 * j + 1e-9, 2 * j + 1 - 1e-9
        f = lambda k: math.sin(k * math.pi / 2) - 2 * k * math.cos(k * math.pi / 2)
        if f(lo) * f(hi) < 0:
            out.append(brentq(f, lo, hi, xtol=1e-14) ** 2)
    return np.sort(out)[:n]


def main():
    P = load_problem(HERE / "problems" / "delta_step.json")
    ev = eigen.eigenvalues(P, DIRICHLET, count=8)
    ref = reference(8)
    print(" n        lambda_n           reference     |diff|")
    for e, r in zip(ev, ref):
        print(f"{e.index:2d} {e.lam:18.12f} {r:18.12f} {abs(e.lam - r):9.2e}")

    # oscillation index of eigenfunction n equals its number of interior zeros
    xs = np.linspace(P.a, P.b, 4001)[1:-1]
    zeros = [int(np.sum(np.diff(np.sign(np.real(e.eigenfunctions[0](xs)[0]))) != 0)) for e in ev]
    print("interior zeros:", zeros)

    print("\nRobin (0.4, 2.0):", np.round([e.lam for e in eigen.eigenvalues(P, Separated(0.4, 2.0), count=5)], 8))
    per = eigen.eigenvalues(P, PERIODIC, count=6)
    print("periodic:", [(round(e.lam, 8), e.multiplicity) for e in per])


if __name__ == "__main__":
    main()
