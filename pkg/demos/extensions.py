#! /usr/bin/env python3
"""Krein-von Neumann and Friedrichs extensions of the free problem on
(0, 1), and the sign of the resolvent kernel for several boundary
conditions."""
from pathlib import Path

import numpy as np

from quasisl import eigen
from quasisl.boundary import ANTIPERIODIC, DIRICHLET, NEUMANN, PERIODIC, Separated
from quasisl.coeffs import load_problem
from quasisl.extensions import classify_positivity, extension_ordering_check, friedrichs_bc, krein_matrix
from quasisl.green import positivity_scan

HERE = Path(__file__).resolve().parent


def main():
    P = load_problem(HERE / "problems" / "free_0_1.json")

    kd = krein_matrix(P)
    print("R_K =\n", np.round(kd.R, 10), "\ndet =", kd.det())
    print("Krein eigenvalues:", [(round(e.lam + 0.0, 8), e.multiplicity) for e in eigen.eigenvalues(P, kd.bc, count=4)])
    print("Friedrichs eigenvalues:", np.round([e.lam for e in eigen.eigenvalues(P, friedrichs_bc(P), count=3)], 8))

    named = {"neumann": NEUMANN, "periodic": PERIODIC, "robin(0.3, 2)": Separated(0.3, 2.0)}
    rep = extension_ordering_check(P, list(named.values()), n=3)
    print("\nlambda_K <= lambda_bc <= lambda_F:", rep.ok)
    for r in rep.rows:
        name = next((k for k, v in named.items() if v == r["bc"]), "?")
        print(f"  {name:14s} n={r['n']}  {r['lambda_K'] + 0.0:10.5f} {r['lambda_bc'] + 0.0:10.5f} {r['lambda_F']:10.5f}")

    print("\nkernel sign below the spectrum")
    for name, bc in [("dirichlet", DIRICHLET), ("neumann", NEUMANN), ("periodic", PERIODIC),
                     ("antiperiodic", ANTIPERIODIC), ("krein", kd.bc)]:
        lam = eigen.lower_bound(P, bc) - 1.0
        s = positivity_scan(P, bc, lam)
        print(f"  {name:13s} {classify_positivity(bc):15s} lambda={lam:9.4f}  min G={s.min: .4e}  interior min={s.interior_min: .4e}")


if __name__ == "__main__":
    main()
