"""Driven response of the discrete Hamiltonian against the continuum Green function.

A homogeneous medium with a flat band-limited bath is discretised with M bath
frequencies; the response to a point drive at w + i eta is compared with
-i mu0 z G(x, x_src) built from the same bath.  Shows the error shrinking as
the bath gets finer.

    python3 scripts/oracle_comparison.py --baths 15 30 60
"""

import argparse

import numpy as np

from fanodiag import crosscheck
from fanodiag.greenfn import LayerStack
from fanodiag.material import (BathModel, FrequencyMesh, Grid1D,
                               MaterialProfile, compute_chi)
from fanodiag.oracle import assemble_hamiltonian, classical_response


def relative_error(n_points, n_bath, omega, half_width=10.0, top=3.0, near=3.0):
    g = Grid1D(-half_width, half_width, n_points)
    prof = MaterialProfile.uniform(g, 1.0, 1.0, 1.0)
    d = top / n_bath
    mesh = FrequencyMesh(d * np.arange(1, n_bath + 1), np.full(n_bath, d))
    v = np.full((n_points, n_bath), np.sqrt(0.2))
    model = assemble_hamiltonian(prof, mesh.omega, mesh.weights, v)
    z = omega + 3j * d                      # broadening a few bath spacings wide
    src = n_points // 2
    j = np.zeros(n_points)
    j[src] = 1.0 / g.h
    E = classical_response(model, z, j)
    chi = compute_chi(prof, BathModel.tabulated(mesh, v), mesh, [z]).chi[0, 0]
    Ec = crosscheck.driven_field(LayerStack([1.0], [1 + chi]), z, g.x, g.x[src])
    mask = np.abs(g.x - g.x[src]) <= near
    return float(np.max(np.abs(E - Ec)[mask]) / np.max(np.abs(Ec[mask])))


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--points", type=int, default=200)
    ap.add_argument("--baths", type=int, nargs="+", default=[15, 30, 60])
    ap.add_argument("--omega", type=float, nargs="+", default=[0.3, 0.9, 1.3])
    args = ap.parse_args()
    print("M      " + "  ".join(f"w={w:<6g}" for w in args.omega))
    for M in args.baths:
        errs = [relative_error(args.points, M, w) for w in args.omega]
        print(f"{M:<6d} " + "  ".join(f"{e:8.3%}" for e in errs))


if __name__ == "__main__":
    main()
