#! /usr/bin/env python3
"""Weyl m-function of the free problem on (0, pi) and its spectral
measure, recovered both from eigenfunction norms and by Stieltjes
inversion."""
import math
from pathlib import Path

import numpy as np

from quasisl import weyl
from quasisl.boundary import DIRICHLET
from quasisl.coeffs import load_problem

HERE = Path(__file__).resolve().parent


def main():
    P = load_problem(HERE / "problems" / "free_0_pi.json")

    zs = np.array([-1.0, 2.5, 1 + 1j, 10 - 3j])
    m = weyl.m_values(P, DIRICHLET, zs)
    exact = -np.sqrt(zs) / np.tan(np.sqrt(zs) * math.pi)
    for z, a, b in zip(zs, m, exact):
        print(f"m({z:>8}) = {a:.12f}   closed form {b:.12f}")

    mu = weyl.spectral_atoms(P, DIRICHLET, count=5)
    print("\natoms (lambda, weight); weights are 2 n^2 / pi")
    for n, (lam, w) in enumerate(mu.atoms, 1):
        print(f"{lam:10.6f} {w:14.10f} {2 * n * n / math.pi:14.10f}")

    # mass of (0.5, 4.5] holds the atoms at 1 and 4
    v = weyl.stieltjes_inversion(P, DIRICHLET, 0.5, 4.5)
    print(f"\nStieltjes mass of (0.5, 4.5]: {v:.6f}  (atoms: {mu.total(0.5, 4.5):.6f})")

    f = lambda x: x * (math.pi - x)
    print(f"Parseval defect for x(pi - x): {weyl.parseval_defect(P, DIRICHLET, f, weyl.spectral_atoms(P, DIRICHLET, count=40)):.3e}")


if __name__ == "__main__":
    main()
