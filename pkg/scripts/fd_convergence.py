"""Finite-difference Green function against the transfer-matrix solution.

Prints max |G_fd - G_tm| and the observed order for a sequence of grids.

    python3 scripts/fd_convergence.py --omega 1.0 --sizes 101 201 401 801
"""

import argparse

import numpy as np

from fanodiag.greenfn import LayerStack, green_fd, green_multilayer
from fanodiag.material import Grid1D


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--omega", type=float, default=1.0)
    ap.add_argument("--sizes", type=int, nargs="+", default=[101, 201, 401, 801])
    ap.add_argument("--half-width", type=float, default=5.0)
    args = ap.parse_args()

    L = args.half_width
    stack = LayerStack([L - 1, 2.0, L - 1], [1.0, 3.0 + 0.4j, 1.5], x0=-L)
    prev = None
    print(f"{'n':>6} {'h':>10} {'max err':>12} {'order':>7}")
    for n in args.sizes:
        g = Grid1D(-L, L, n)
        err = np.max(np.abs(green_fd(stack.response(g, args.omega)).G
                            - green_multilayer(stack, args.omega, g).G))
        order = "" if prev is None else f"{np.log(prev[1] / err) / np.log(prev[0] / g.h):7.3f}"
        print(f"{n:6d} {g.h:10.4g} {err:12.4e} {order:>7}")
        prev = (g.h, err)


if __name__ == "__main__":
    main()
