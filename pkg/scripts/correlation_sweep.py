"""Equal-time [E, E] commutator and correlation-route agreement vs. cladding thickness.

Thin claddings let outgoing waves reach the open grid ends, which shows up as
a finite commutator; thick ones push it down to the quadrature floor.

    python3 scripts/correlation_sweep.py --half-widths 4 6 10
"""

import argparse

import numpy as np
from scipy.special import erfc

from fanodiag.fields import (equal_time_commutator_residual, green_sweep,
                             vacuum_correlation_E)
from fanodiag.material import (FrequencyMesh, Grid1D, compute_chi,
                               drude_lorentz_setup)


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--half-widths", type=float, nargs="+", default=[4.0, 6.0, 10.0])
    ap.add_argument("--spacing", type=float, default=0.05)
    ap.add_argument("--window", type=float, nargs=3, default=[1.0, 2.0, 0.1],
                    metavar=("LO", "HI", "WIDTH"))
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    lo, hi, width = args.window

    def window(w):
        return 0.25 * erfc((lo - w) / width) * erfc((w - hi) / width)

    mesh = FrequencyMesh.uniform(0.01, 3.0, 600)
    print(f"{'L':>6} {'n':>6} {'[E,E]':>10} {'routes':>10}")
    for L in args.half_widths:
        n = int(round(2 * L / args.spacing)) + 1
        g = Grid1D(-L, L, n)
        core = np.abs(g.x) <= 2
        prof, bath = drude_lorentz_setup(g, np.where(core, 1.0, 3.0), np.where(core, 1.3, 1.0),
                                         np.where(core, 0.2, 2.0))
        pts = np.flatnonzero(core)[::10]
        sweep = green_sweep(compute_chi(prof, bath, mesh), mesh, pts, threads=args.threads)
        comm = equal_time_commutator_residual(sweep, window=window)
        routes = vacuum_correlation_E(sweep, tau=[0.0], window=window).route_agreement
        print(f"{L:6g} {n:6d} {comm:10.2e} {routes:10.2e}")


if __name__ == "__main__":
    main()
