"""Heisenberg-picture field kernels and vacuum correlation functions.

With the noise amplitude n(x, w) = sqrt(hbar eps0 Im chi / pi) w the fields
read

    E(x, t) = int dx' int dw K_E(x, x'; w) e^{-iwt} C(x', w) + h.c.

and likewise for D.  Correlators of the mode vacuum follow from
[C(x, w), C^+(x', w')] = delta(x - x') delta(w - w').
"""

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import TruncationWarning
from .greenfn import DielectricResponse, green_fd_columns
from .modes import NoiseAmplitude
from .units import C_LIGHT, HBAR, MU0

TRUNCATION_RATIO = 1e-4


@dataclass
class FieldKernel:
    """K(x_i, x_j; w) for one field type ("E" or "D")."""

    K: np.ndarray
    omega: float
    field: str


def efield_kernel(G, noise, omega):
    """K_E(x, x') = -i mu0 w G(x, x') n(x')."""
    Gm = G.G if hasattr(G, "G") else np.asarray(G)
    if Gm.shape[1] != noise.values.size:
        raise ValueError("Green function and noise amplitude live on different grids")
    return FieldKernel(-1j * MU0 * omega * Gm * noise.values[None, :], omega, "E")


def dfield_kernel(G, chi, noise, omega):
    """K_D = -(i/c^2) w (1 + chi(x)) G(x, x') n(x') + (i/w) n(x) delta(x - x').

    The delta is the grid delta 1/h at the coincident node.
    """
    Gm = G.G if hasattr(G, "G") else np.asarray(G)
    h = G.grid.h
    chi = np.asarray(chi)
    K = -1j / C_LIGHT ** 2 * omega * (1.0 + chi)[:, None] * Gm * noise.values[None, :]
    K = K + np.diag(1j / omega * noise.values / h)
    return FieldKernel(K, omega, "D")


@dataclass
class GreenSweep:
    """Green-function rows G(x_p, x'', w_k) for a few points over a mesh.

    ``rows`` has shape (n_omega, n_points_requested, n_grid); ``imchi`` is
    (n_grid, n_omega).
    """

    grid: object
    omega: np.ndarray
    weights: np.ndarray
    points: np.ndarray
    rows: np.ndarray
    imchi: np.ndarray

    @property
    def coincident(self):
        """G(x_p, x_q, w) for the requested points, shape (n_omega, P, P)."""
        return self.rows[:, :, self.points]


def green_sweep(table, mesh, points, threads=1):
    """Finite-difference Green rows at ``points`` for every mesh frequency.

    Parameters
    ----------
    table : SusceptibilityTable
        chi on the grid at the mesh nodes.
    mesh : FrequencyMesh
    points : index array
    threads : int
        Worker threads; results are collected in mesh order, so the output
        does not depend on scheduling.
    """
    points = np.atleast_1d(np.asarray(points))
    grid = table.grid

    def one(k):
        w = mesh.omega[k]
        resp = DielectricResponse(grid, w, 1.0 + table.chi[:, k])
        return green_fd_columns(resp, points).T

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, range(mesh.size)))
    else:
        rows = [one(k) for k in range(mesh.size)]
    return GreenSweep(grid, mesh.omega.copy(), mesh.weights.copy(), points,
                      np.stack(rows), np.maximum(table.chi.imag, 0.0))


@dataclass
class CorrelationResult:
    """<0| E(x_p, t) E(x_q, t') |0> for tau = t - t'.

    ``direct`` integrates K_E K_E^+ over the noise sources; ``identity``
    uses -Im G instead.  Arrays are (P, P, n_tau).
    """

    points: np.ndarray
    tau: np.ndarray
    direct: np.ndarray
    identity: np.ndarray
    omega_max: float
    tail_ratio: float
    route_agreement: float
    metadata: dict = field(default_factory=dict)


def spectral_density_direct(sweep):
    """hbar mu0^2 w^4 / pi * h sum_x'' Im chi G(x_p, x'') G*(x_q, x''), shape (K, P, P)."""
    h = sweep.grid.h
    w = sweep.omega
    out = np.empty((w.size, sweep.points.size, sweep.points.size), dtype=complex)
    for k in range(w.size):
        R = sweep.rows[k]
        n2 = HBAR * sweep.imchi[:, k] / np.pi * w[k] ** 2       # eps0 = 1 folded in
        out[k] = (MU0 * w[k]) ** 2 * h * (R * n2[None, :]) @ R.conj().T
    return out


def spectral_density_identity(sweep):
    """(hbar mu0 / pi) w^2 (-Im G(x_p, x_q, w)), shape (K, P, P)."""
    w = sweep.omega
    return (HBAR * MU0 / np.pi) * (w ** 2)[:, None, None] * (-sweep.coincident.imag)


def _transform(density, omega, weights, tau):
    phase = np.exp(-1j * np.outer(omega, tau))               # (K, T)
    return np.einsum("kpq,kt->pqt", density * weights[:, None, None], phase)


def vacuum_correlation_E(sweep, tau=(0.0,), window=None):
    """Vacuum correlation of the electric field, by two routes.

    Parameters
    ----------
    sweep : GreenSweep
    tau : sequence of float
    window : callable, optional
        Spectral window W(w) applied to both routes (band limiting).

    Warns
    -----
    TruncationWarning
        If the windowed integrand at the top of the mesh exceeds 1e-4 of
        its peak.
    """
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    d1 = spectral_density_direct(sweep)
    d2 = spectral_density_identity(sweep)
    W = np.ones_like(sweep.omega) if window is None else np.asarray(window(sweep.omega), dtype=float)
    d1 = d1 * W[:, None, None]
    d2 = d2 * W[:, None, None]
    mag = np.max(np.abs(d2), axis=(1, 2))
    tail = float(mag[-1] / mag.max()) if mag.max() > 0 else 0.0
    if tail > TRUNCATION_RATIO:
        warnings.warn(f"correlation integrand at w_max is {tail:.2e} of its peak; "
                      "result depends on the mesh cutoff", TruncationWarning, stacklevel=2)
    c1 = _transform(d1, sweep.omega, sweep.weights, tau)
    c2 = _transform(d2, sweep.omega, sweep.weights, tau)
    scale = float(np.max(np.abs(c2)))
    agreement = float(np.max(np.abs(c1 - c2)) / scale) if scale > 0 else 0.0
    meta = {"omega_min": float(sweep.omega[0]), "omega_max": float(sweep.omega[-1]),
            "n_omega": int(sweep.omega.size), "windowed": window is not None}
    return CorrelationResult(sweep.points, tau, c1, c2, float(sweep.omega[-1]), tail, agreement, meta)


def hermiticity_residual(result):
    """max |C(x, x', tau) - C(x', x, -tau)^*| relative to max |C|; needs a tau grid symmetric about 0."""
    tau = result.tau
    order = np.argsort(-tau)
    if not np.allclose(tau[order], -tau):
        raise ValueError("tau list must be symmetric about zero")
    out = []
    for vals in (result.direct, result.identity):
        swapped = np.conj(np.transpose(vals, (1, 0, 2))[:, :, order])
        out.append(float(np.max(np.abs(vals - swapped)) / np.max(np.abs(vals))))
    return max(out)


def equal_time_commutator_residual(sweep, source_mask=None, window=None):
    """max |[E(x_p, t), E(x_q, t)]| relative to max <E(x_p)^2>.

    The commutator is int dw [(K K^+)(x_p, x_q) - (K K^+)(x_q, x_p)].
    ``source_mask`` restricts the noise sources x'' (a deliberately broken
    field, used as a negative control).  ``window`` band-limits both the
    commutator and the fluctuation scale, as in ``vacuum_correlation_E``.
    """
    full = spectral_density_direct(sweep)
    d = full if source_mask is None else _masked_density(sweep, np.asarray(source_mask, dtype=bool))
    wts = sweep.weights if window is None else sweep.weights * np.asarray(window(sweep.omega))
    comm = np.einsum("kpq,k->pq", d - np.transpose(d, (0, 2, 1)), wts)
    fluct = np.real(np.einsum("kpp,k->p", full, wts))
    return float(np.max(np.abs(comm)) / np.max(fluct))


def kernel_route_residual(fE, G, chi, omega, labels=None):
    """Relative max difference between f_E and the noise-current kernel K_E.

    Both describe the electric-field amplitude of the mode labelled x'; the
    first is built from the bath coupling and the s-tensor, the second from
    Im chi alone.  Columns outside ``labels`` are ignored.
    """
    K = efield_kernel(G, NoiseAmplitude.from_chi(chi, omega), omega).K
    E = fE.dense if hasattr(fE, "dense") else np.asarray(fE)
    cols = np.arange(K.shape[1]) if labels is None else np.asarray(labels)
    scale = float(np.max(np.abs(K[:, cols])))
    return float(np.max(np.abs(E[:, cols] - K[:, cols]))) / scale if scale > 0 else 0.0


def positivity_residual(result):
    """Most negative eigenvalue of the equal-time correlation matrix, relative.

    Uses the Hermitian part of C(x_p, x_q, 0) for both routes; needs tau = 0
    in the result.  Returns max(0, -lambda_min / lambda_max).
    """
    i0 = np.flatnonzero(result.tau == 0.0)
    if i0.size == 0:
        raise ValueError("positivity check needs tau = 0")
    worst = 0.0
    for vals in (result.direct, result.identity):
        C = vals[:, :, i0[0]]
        lam = np.linalg.eigvalsh(0.5 * (C + C.conj().T))
        worst = max(worst, max(0.0, -lam[0] / lam[-1]))
    return worst


def _masked_density(sweep, mask):
    masked = GreenSweep(sweep.grid, sweep.omega, sweep.weights, sweep.points,
                        sweep.rows, sweep.imchi * mask[:, None])
    return spectral_density_direct(masked)
