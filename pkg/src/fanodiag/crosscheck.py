"""Continuum-side quantities that the discrete oscillator model is compared with.

All of them use the transfer-matrix Green function of a piecewise-constant
stack, evaluated in the upper half plane z = w + i eta where a finite bath
has a well-defined response.
"""

import numpy as np

from .greenfn import LayerStack, layer_green
from .units import HBAR, MU0


def stack_from_segments(segments, eps_values, x0):
    """LayerStack from consecutive (x_lo, x_hi) pieces and one eps per piece."""
    d = np.array([hi - lo for lo, hi in segments])
    return LayerStack(d, np.asarray(eps_values, dtype=complex), x0=x0)


def driven_field(stack, z, x, x_src, amplitude=1.0):
    """E(x) = -i mu0 z G(x, x_src; z) J for a point current J e^{-izt} at x_src."""
    return -1j * MU0 * z * amplitude * layer_green(stack, z, np.asarray(x), np.array([x_src]))[:, 0]


def smoothed_vacuum_correlation(stack_at, z, weights, window, x):
    """(hbar mu0 / pi) sum_k w_k W(Re z_k) Im(-z_k**2 G(x, x'; z_k)).

    Parameters
    ----------
    stack_at : callable
        k -> LayerStack at the k-th complex frequency.
    z : (K,) complex array
    weights : (K,) array
        Quadrature weights in Re z.
    window : callable
        Spectral window W(w).
    x : (P,) array
        Observation points.

    Returns
    -------
    (P, P) real array
    """
    x = np.asarray(x, dtype=float)
    W = np.asarray(window(z.real), dtype=float) * weights
    out = np.zeros((x.size, x.size))
    for k, zk in enumerate(z):
        if W[k] == 0.0:
            continue
        G = layer_green(stack_at(k), zk, x, x)
        out += W[k] * np.imag(-zk ** 2 * G)
    return HBAR * MU0 / np.pi * out
