"""Principal-value quadrature on a frequency mesh.

All integrals here have the form

    PV int_a^b g(w') / (w**2 - w'**2) dw'

with ``g`` sampled on the mesh nodes.  The pole at ``w' = w`` is removed by
subtracting ``g(w)`` analytically; what remains is a smooth difference
quotient integrated with the mesh weights.
"""

import warnings

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import EdgeWarning

_ON_NODE_RTOL = 1e-12


def _node_derivative(g, nodes, j):
    """Derivative of ``g`` along the last axis at node ``j``.

    Five-point centred stencil on uniform meshes away from the edges; the
    coincident-node limit dominates the total error, so second order there
    is not enough.
    """
    K = nodes.size
    if 2 <= j <= K - 3:
        h = np.diff(nodes[j - 2:j + 3])
        if np.allclose(h, h[0], rtol=1e-9, atol=0.0):
            h = h[0]
            return (g[..., j - 2] - 8 * g[..., j - 1] + 8 * g[..., j + 1] - g[..., j + 2]) / (12 * h)
    return np.gradient(g, nodes, axis=-1, edge_order=2)[..., j]


def _log_term(omega, a, b, h_left, h_right):
    """PV int_a^b dw' / (w**2 - w'**2) for real w > 0."""
    da = abs(omega - a)
    db = abs(b - omega)
    edge = False
    if da == 0.0:
        da, edge = 0.5 * h_left, True
    if db == 0.0:
        db, edge = 0.5 * h_right, True
    val = (np.log((omega + b) / db) - np.log((omega + a) / da)) / (2 * omega)
    return val, edge


def pv_integral(nodes, weights, g, omega):
    """Principal value of int g(w') / (w**2 - w'**2) over the mesh span.

    Parameters
    ----------
    nodes : (K,) array
        Ascending positive mesh nodes.
    weights : (K,) array
        Quadrature weights for the nodes.
    g : (..., K) array
        Numerator samples; leading axes are batched.
    omega : float
        Real evaluation frequency, inside ``[nodes[0], nodes[-1]]`` or outside.

    Returns
    -------
    (...) array
    """
    nodes = np.asarray(nodes, dtype=float)
    g = np.asarray(g)
    omega = float(omega)
    diff = nodes - omega
    on = np.abs(diff) <= _ON_NODE_RTOL * omega
    inside = nodes[0] <= omega <= nodes[-1]

    if on.any():
        j = int(np.argmax(on))
        g0 = g[..., j]
        dg0 = _node_derivative(g, nodes, j)
    elif inside:
        spline = CubicSpline(nodes, g, axis=-1)
        g0 = spline(omega)
        dg0 = spline(omega, 1)
    else:
        # no pole on the integration range: plain quadrature
        return g @ (weights / (omega ** 2 - nodes ** 2))

    denom = omega ** 2 - nodes ** 2
    denom = np.where(on, 1.0, denom)
    q = (g - g0[..., None]) / denom
    if on.any():
        q[..., j] = -dg0 / (2 * omega)
    regular = q @ weights

    log_val, edge = _log_term(omega, nodes[0], nodes[-1],
                              nodes[1] - nodes[0], nodes[-1] - nodes[-2])
    if edge and np.any(np.abs(g0) > 1e-8 * np.max(np.abs(g), initial=0.0)):
        warnings.warn(
            f"principal value at mesh edge w={omega:g} with nonzero weight; "
            "log singularity regularised by half a cell", EdgeWarning, stacklevel=2)
    return regular + g0 * log_val


def pole_integral(nodes, weights, g, z):
    """int g(w') / (z**2 - w'**2) dw' for complex ``z`` off the real axis."""
    return np.asarray(g) @ (weights / (z ** 2 - nodes ** 2))


def interpolate_rows(nodes, g, omega):
    """Value of the tabulated rows of ``g`` at ``omega`` (exact on nodes)."""
    nodes = np.asarray(nodes, dtype=float)
    on = np.abs(nodes - omega) <= _ON_NODE_RTOL * abs(omega)
    if on.any():
        return np.asarray(g)[..., int(np.argmax(on))]
    if omega < nodes[0] or omega > nodes[-1]:
        return np.zeros(np.shape(g)[:-1])
    return CubicSpline(nodes, g, axis=-1)(omega)


def unique_rows(a):
    """Deduplicate rows of a 2-D array; returns (unique, inverse)."""
    a = np.ascontiguousarray(a)
    uniq, inverse = np.unique(a, axis=0, return_inverse=True)
    return uniq, inverse.reshape(-1)
