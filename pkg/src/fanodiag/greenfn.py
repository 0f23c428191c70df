"""Green function of the 1D dielectric wave equation.

Fields are polarised along y and propagate along x, so the transverse
projector is the identity and the Green function obeys

    (d^2/dx^2 + (w/c)^2 eps(x, w)) G(x, x') = delta(x - x')

with outgoing (retarded) behaviour at both ends.  The wavenumber branch is
always Im k >= 0, and Re k > 0 for real positive eps.
"""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ResolutionWarning, SingularityError
from .units import C_LIGHT

MIN_POINTS_PER_WAVELENGTH = 20


def wavenumber(eps, omega):
    """k = (w/c) sqrt(eps) on the retarded branch."""
    k = np.asarray(omega / C_LIGHT * np.sqrt(np.asarray(eps, dtype=complex)), dtype=complex)
    flip = (k.imag < 0) | ((k.imag == 0) & (k.real < 0))
    return np.where(flip, -k, k)


@dataclass(frozen=True)
class DielectricResponse:
    """eps(x) = 1 + chi(x) on the grid at one frequency.

    The medium beyond each grid end continues the end node's eps.
    """

    grid: object
    omega: complex
    eps: np.ndarray

    def __post_init__(self):
        eps = np.broadcast_to(np.asarray(self.eps, dtype=complex), (self.grid.n_points,)).copy()
        if np.any(eps.imag < -1e-12 * np.maximum(1.0, np.abs(eps))):
            raise ValueError("Im eps must be >= 0")
        object.__setattr__(self, "eps", eps)

    @classmethod
    def from_chi(cls, table, omega):
        return cls(table.grid, omega, 1.0 + table.at(omega))

    @property
    def boundary(self):
        ends = self.eps[[0, -1]]
        if np.all(ends == 1.0):
            return "vacuum"
        if np.all(ends.imag > 0):
            return "absorbing"
        return "open"

    @property
    def lossless(self):
        return bool(np.all(self.eps.imag == 0))


@dataclass(frozen=True)
class LayerStack:
    """Piecewise-constant medium; the two outer layers extend to infinity."""

    thickness: np.ndarray
    eps: np.ndarray
    x0: float = 0.0

    def __post_init__(self):
        d = np.atleast_1d(np.asarray(self.thickness, dtype=float))
        e = np.atleast_1d(np.asarray(self.eps, dtype=complex))
        if d.size < 1 or d.shape != e.shape:
            raise ValueError("LayerStack needs at least one layer and one eps per layer")
        if np.any(d <= 0):
            raise ValueError("layer thicknesses must be positive")
        if np.any(e.imag < 0):
            raise ValueError("Im eps must be >= 0")
        object.__setattr__(self, "thickness", d)
        object.__setattr__(self, "eps", e)

    @property
    def interfaces(self):
        """Internal interface positions (len = n_layers - 1)."""
        return self.x0 + np.cumsum(self.thickness)[:-1]

    def region_of(self, x):
        return np.searchsorted(self.interfaces, np.asarray(x, dtype=float), side="right")

    def eps_on(self, grid):
        """eps at the grid nodes; nodes on an interface take the mean of both sides."""
        x = grid.x
        eps = self.eps[self.region_of(x)]
        tol = 1e-9 * max(1.0, grid.h)
        for r, b in enumerate(self.interfaces):
            on = np.abs(x - b) < tol
            eps[on] = 0.5 * (self.eps[r] + self.eps[r + 1])
        return eps

    def response(self, grid, omega):
        return DielectricResponse(grid, omega, self.eps_on(grid))


@dataclass
class GreenSolution:
    """G[i, j] = G(x_i, x_j; omega) with its provenance."""

    G: np.ndarray
    omega: complex
    grid: object
    eps: np.ndarray
    solver: str
    boundary: str = "outgoing"

    def reciprocity_residual(self):
        return float(np.max(np.abs(self.G - self.G.T)))


def green_homogeneous(eps, omega, x, xp):
    """e^{ik|x-x'|} / (2ik) for a homogeneous medium."""
    if eps == 0:
        raise ValueError("degenerate medium: eps = 0")
    k = wavenumber(eps, omega)
    d = np.abs(np.subtract.outer(np.atleast_1d(x), np.atleast_1d(xp)))
    out = np.exp(1j * k * d) / (2j * k)
    return out if np.ndim(x) or np.ndim(xp) else complex(out[0, 0])


def _coeffs_from_values(u, du, k, t):
    """(a, b) of u = a e^{ikt} + b e^{-ikt} given u, u' at local coordinate t."""
    p = u + du / (1j * k)
    m = u - du / (1j * k)
    return 0.5 * np.exp(-1j * k * t) * p, 0.5 * np.exp(1j * k * t) * m


def _layer_solutions(stack, omega):
    """Per-region coefficients of the left- and right-outgoing solutions.

    Region r uses the local coordinate t = x - ref[r]; ref[0] = first
    interface (or x0 for a single layer), ref[r] = interfaces[r-1] otherwise.
    """
    k = wavenumber(stack.eps, omega)
    if np.any(k == 0):
        raise ValueError("degenerate medium: k = 0")
    L = stack.eps.size
    itf = stack.interfaces
    ref = np.empty(L)
    ref[0] = itf[0] if L > 1 else stack.x0
    ref[1:] = itf
    # local coordinate of the right edge of each region (inner regions only)
    right_t = np.zeros(L)
    right_t[1:-1] = stack.thickness[1:-1]

    am = np.zeros(L, complex)
    bm = np.zeros(L, complex)
    bm[0] = 1.0                       # e^{-ik0 t}: outgoing to the left
    for r in range(L - 1):
        T = right_t[r]
        u = am[r] * np.exp(1j * k[r] * T) + bm[r] * np.exp(-1j * k[r] * T)
        du = 1j * k[r] * (am[r] * np.exp(1j * k[r] * T) - bm[r] * np.exp(-1j * k[r] * T))
        am[r + 1], bm[r + 1] = _coeffs_from_values(u, du, k[r + 1], 0.0)

    ap = np.zeros(L, complex)
    bp = np.zeros(L, complex)
    ap[-1] = 1.0                      # e^{+ik t}: outgoing to the right
    for r in range(L - 1, 0, -1):
        u = ap[r] + bp[r]
        du = 1j * k[r] * (ap[r] - bp[r])
        ap[r - 1], bp[r - 1] = _coeffs_from_values(u, du, k[r - 1], right_t[r - 1])

    wronskian = 2j * k[0] * ap[0]
    scale = abs(k[0]) * (abs(ap[0]) + abs(bp[0]))
    if abs(wronskian) < 1e-13 * scale:
        raise SingularityError(
            f"vanishing Wronskian at omega={omega}: resonance of a lossless stack",
            location=(None, complex(omega)))
    return k, ref, (am, bm), (ap, bp), wronskian


def _evaluate(k, ref, coeffs, region, x):
    a, b = coeffs
    t = x - ref[region]
    kk = k[region]
    ep = np.exp(1j * kk * t)
    em = np.exp(-1j * kk * t)
    u = a[region] * ep + b[region] * em
    du = 1j * kk * (a[region] * ep - b[region] * em)
    return u, du


def layer_green(stack, omega, x, xp):
    """Transfer-matrix G(x, x') for arbitrary point sets."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    xp = np.atleast_1d(np.asarray(xp, dtype=float))
    k, ref, minus, plus, W = _layer_solutions(stack, omega)
    rx, rxp = stack.region_of(x), stack.region_of(xp)
    um_x, _ = _evaluate(k, ref, minus, rx, x)
    up_x, _ = _evaluate(k, ref, plus, rx, x)
    um_p, _ = _evaluate(k, ref, minus, rxp, xp)
    up_p, _ = _evaluate(k, ref, plus, rxp, xp)
    right = np.greater_equal.outer(x, xp)
    return np.where(right, np.outer(up_x, um_p), np.outer(um_x, up_p)) / W


def layer_solutions_at(stack, omega, x):
    """u-, u-', u+, u+' and the Wronskian at the points ``x`` (diagnostics)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    k, ref, minus, plus, W = _layer_solutions(stack, omega)
    r = stack.region_of(x)
    um, dum = _evaluate(k, ref, minus, r, x)
    up, dup = _evaluate(k, ref, plus, r, x)
    return um, dum, up, dup, W


def green_multilayer(stack, omega, grid):
    """Transfer-matrix Green function on the grid nodes."""
    G = layer_green(stack, omega, grid.x, grid.x)
    return GreenSolution(G, omega, grid, stack.eps_on(grid), "transfer-matrix")


def laplacian_matrix(grid, k_left, k_right):
    """Second-difference matrix with outgoing closures e^{ikh} at both ends."""
    n, h = grid.n_points, grid.h
    L = (np.diag(np.full(n, -2.0 + 0j)) + np.diag(np.ones(n - 1), 1)
         + np.diag(np.ones(n - 1), -1))
    L[0, 0] += np.exp(1j * k_left * h)
    L[-1, -1] += np.exp(1j * k_right * h)
    return L / h ** 2


def _end_wavenumbers(response):
    k = wavenumber(response.eps[[0, -1]], response.omega)
    return k[0], k[1]


def wave_operator(response):
    """Dense discrete operator d^2/dx^2 + (w/c)^2 eps with outgoing closures."""
    kl, kr = _end_wavenumbers(response)
    L = laplacian_matrix(response.grid, kl, kr)
    return L + np.diag((response.omega / C_LIGHT) ** 2 * response.eps)


def points_per_wavelength(response):
    k = wavenumber(response.eps, response.omega)
    kmax = float(np.max(np.abs(k.real)))
    if kmax == 0:
        return np.inf
    return 2 * np.pi / (kmax * response.grid.h)


def _banded_operator(response):
    """h^2 times the wave operator in LAPACK banded storage."""
    grid, omega = response.grid, response.omega
    ppw = points_per_wavelength(response)
    if ppw < MIN_POINTS_PER_WAVELENGTH:
        warnings.warn(f"grid under-resolves the wavelength: {ppw:.1f} points per wavelength "
                      f"(< {MIN_POINTS_PER_WAVELENGTH})", ResolutionWarning, stacklevel=3)
    n, h = grid.n_points, grid.h
    kl, kr = _end_wavenumbers(response)
    diag = (-2.0 + (omega / C_LIGHT) ** 2 * response.eps * h ** 2).astype(complex)
    diag[0] += np.exp(1j * kl * h)
    diag[-1] += np.exp(1j * kr * h)
    ab = np.zeros((3, n), dtype=complex)
    ab[0, 1:] = 1.0
    ab[1] = diag
    ab[2, :-1] = 1.0
    return ab


def _solve(response, rhs):
    try:
        out = scipy.linalg.solve_banded((1, 1), _banded_operator(response), rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularityError(f"singular wave operator at omega={response.omega}",
                               location=(None, complex(response.omega))) from exc
    if not np.all(np.isfinite(out)):
        raise SingularityError(f"singular wave operator at omega={response.omega}",
                               location=(None, complex(response.omega)))
    return out


def green_fd(response, omega=None, grid=None):
    """Finite-difference Green function, one column per source node.

    Solves A G = I / h with A the discrete wave operator (second-order
    stencil, outgoing e^{ikh} closures), then symmetrises.  ``omega`` may be
    complex (upper half plane) for smoothed responses.

    Warns
    -----
    ResolutionWarning
        Fewer than 20 points per shortest wavelength.
    """
    if grid is not None and grid != response.grid:
        raise ValueError("response and grid disagree")
    if omega is not None and omega != response.omega:
        response = DielectricResponse(response.grid, omega, response.eps)
    n, h = response.grid.n_points, response.grid.h
    # (1/h^2) A_banded G = I/h  ->  A_banded G = h I
    G = _solve(response, h * np.eye(n, dtype=complex))
    G = 0.5 * (G + G.T)
    return GreenSolution(G, response.omega, response.grid, response.eps, "finite-difference")


def green_fd_columns(response, points):
    """Columns G[:, points] of the finite-difference Green function.

    By reciprocity these are also the rows G[points, :].
    """
    n, h = response.grid.n_points, response.grid.h
    points = np.atleast_1d(points)
    rhs = np.zeros((n, points.size), dtype=complex)
    rhs[points, np.arange(points.size)] = h
    return _solve(response, rhs)


@dataclass
class GreenIdentityReport:
    """Im G = -(w/c)^2 int Im eps G G* + surface term, checked pointwise."""

    residual: float
    volume_residual: float
    flux: float
    flux_relative: float
    scale: float
    regime: str


def _surface_weights(solution):
    """Weights s_end with surface term = -s_end G(x, end) G*(x', end)."""
    k = wavenumber(solution.eps[[0, -1]], solution.omega)
    if solution.solver == "finite-difference":
        # discrete closure: Im(e^{ikh}) / h per end node (times h from the sum)
        return np.sin(k.real * solution.grid.h) * np.exp(-k.imag * solution.grid.h) / solution.grid.h
    return k.real


def green_identity_residual(solution, response, points=None):
    """Check Im G(x,x') = -(w/c)^2 int Im eps(x'') G(x,x'') G*(x',x'') dx'' + surface.

    Parameters
    ----------
    solution : GreenSolution
    response : DielectricResponse
        Must be at the same (real) frequency.
    points : index array, optional
        Restrict (x, x') to these nodes.  The surface term is still taken at
        the grid ends.

    Returns
    -------
    GreenIdentityReport
        ``residual`` includes the surface term; ``volume_residual`` omits it.
        All residuals are relative to max |Im G| over the checked block.
    """
    omega = solution.omega
    if np.iscomplexobj(omega) and np.imag(omega) != 0:
        raise ValueError("Green identity is checked at real frequencies only")
    omega = float(np.real(omega))
    if not np.isclose(response.omega, omega, rtol=1e-12):
        raise ValueError("G and eps are at different frequencies")
    G = solution.G
    idx = np.arange(G.shape[0]) if points is None else np.asarray(points)
    Gp = G[idx]
    h = solution.grid.h
    volume = -(omega / C_LIGHT) ** 2 * h * (Gp * response.eps.imag) @ Gp.conj().T
    s = _surface_weights(solution)
    ends = [0, -1]
    surface = -sum(s[e] * np.outer(Gp[:, end], Gp[:, end].conj()) for e, end in enumerate(ends))
    imG = G[np.ix_(idx, idx)].imag
    scale = float(np.max(np.abs(imG)))
    residual = np.max(np.abs(imG - volume - surface)) / scale
    vol_res = np.max(np.abs(imG - volume)) / scale
    flux = float(np.max(np.abs(surface)))
    vol_mag = float(np.max(np.abs(volume)))
    if vol_mag < 1e-12 * scale:
        regime = "surface-dominated"
    elif flux < 1e-8 * scale:
        regime = "volume-dominated"
    else:
        regime = "mixed"
    return GreenIdentityReport(float(residual), float(vol_res), flux, flux / scale, scale, regime)
