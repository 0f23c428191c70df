"""Dielectric and bath parameters, and the susceptibility they produce.

The matter oscillator at each grid point couples to a continuum of bath
oscillators with strength ``v(x, w)``.  Eliminating the bath gives a local
susceptibility

    chi(x, w) = -(alpha**2 / (eps0 rho)) / D(x, w)
    D(x, w)   = w**2 - w0**2 - I(x, w) / rho**2
    I(x, w)   = int dw' w'**2 v(x, w')**2 / ((w + i0)**2 - w'**2)

where ``I`` is called the bath self-energy below.  The ``+i0`` is handled as
principal value plus the delta term ``-i pi w v(w)**2 / 2``.
"""

import hashlib
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import quadrature
from .errors import LosslessPointError, SingularityError, TruncationWarning
from .units import EPS0

SINGULAR_DENOMINATOR = 1e-14


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid on ``[x_min, x_max]`` with ``n_points`` nodes.

    Every node carries the quadrature weight ``h``; the grid delta function
    is ``1/h`` at a node.  This matches the finite-difference Green function
    and keeps its discrete Green identity exact.
    """

    x_min: float
    x_max: float
    n_points: int

    def __post_init__(self):
        if int(self.n_points) != self.n_points or self.n_points < 3:
            raise ValueError("Grid1D needs n_points >= 3")
        if not self.x_max > self.x_min:
            raise ValueError("Grid1D needs x_max > x_min")

    @property
    def h(self):
        return (self.x_max - self.x_min) / (self.n_points - 1)

    @property
    def x(self):
        return np.linspace(self.x_min, self.x_max, self.n_points)

    @property
    def weights(self):
        return np.full(self.n_points, self.h)

    def index_of(self, x, tol=1e-9):
        """Index of the node at ``x``; raises if ``x`` is not a node."""
        i = int(round((x - self.x_min) / self.h))
        if i < 0 or i >= self.n_points or abs(self.x[i] - x) > tol * max(1.0, abs(x)):
            raise ValueError(f"x={x} is not a grid node")
        return i

    def digest(self):
        text = f"{self.x_min!r}:{self.x_max!r}:{self.n_points}"
        return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class FrequencyMesh:
    """Positive ascending frequency nodes with trapezoidal weights."""

    omega: np.ndarray
    weights: np.ndarray = None

    def __post_init__(self):
        om = np.asarray(self.omega, dtype=float)
        if om.ndim != 1 or om.size < 3:
            raise ValueError("FrequencyMesh needs at least 3 nodes")
        if om[0] <= 0:
            raise ValueError("FrequencyMesh needs omega_min > 0")
        if np.any(np.diff(om) <= 0):
            raise ValueError("FrequencyMesh nodes must be strictly ascending")
        w = self.weights
        if w is None:
            dw = np.diff(om)
            w = np.zeros_like(om)
            w[:-1] += dw / 2
            w[1:] += dw / 2
        w = np.asarray(w, dtype=float)
        if w.shape != om.shape or np.any(w <= 0):
            raise ValueError("FrequencyMesh weights must be positive, one per node")
        object.__setattr__(self, "omega", om)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, omega_min, omega_max, n_points):
        return cls(np.linspace(omega_min, omega_max, n_points))

    @property
    def size(self):
        return self.omega.size

    @property
    def spacing(self):
        return float(np.max(np.diff(self.omega)))

    def index_of(self, omega, rtol=1e-9):
        j = int(np.argmin(np.abs(self.omega - omega)))
        if abs(self.omega[j] - omega) > rtol * abs(omega):
            raise ValueError(f"omega={omega} is not a mesh node")
        return j

    def index_nearest(self, omega):
        return int(np.argmin(np.abs(self.omega - omega)))

    def same_as(self, other):
        return other is self or (
            other is not None and other.omega.shape == self.omega.shape
            and np.array_equal(other.omega, self.omega))


@dataclass(frozen=True)
class MaterialProfile:
    """Canonical dielectric parameters on the grid.

    ``alpha == 0`` marks vacuum; chi is forced to zero there.
    """

    grid: Grid1D
    rho: np.ndarray
    omega0: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        n = self.grid.n_points
        for name in ("rho", "omega0", "alpha"):
            arr = np.broadcast_to(np.asarray(getattr(self, name), dtype=float), (n,)).copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if np.any(self.rho <= 0):
            bad = int(np.argmax(self.rho <= 0))
            raise ValueError(f"rho must be positive (x={self.grid.x[bad]:g})")
        if np.any(self.omega0 < 0):
            raise ValueError("omega0 must be >= 0")
        if np.any(self.alpha < 0):
            raise ValueError("alpha must be >= 0")

    @classmethod
    def uniform(cls, grid, rho=1.0, omega0=1.0, alpha=1.0):
        return cls(grid, rho, omega0, alpha)

    @property
    def vacuum(self):
        return self.alpha == 0

    @property
    def plasma_frequency(self):
        """sqrt(alpha**2 / (eps0 rho)), the oscillator strength of the Lorentz form."""
        return self.alpha / np.sqrt(EPS0 * self.rho)


@dataclass(frozen=True)
class BathModel:
    """Bath coupling spectrum ``v(x, w)``.

    Two variants:

    ``tabulated``
        ``coupling`` holds v >= 0 on grid x ``mesh``.  The bath has no weight
        outside the mesh span.
    ``drude_lorentz``
        Ohmic bath fixed by a target chi = wp**2 / (w0**2 - w**2 - i gamma w).
        The coupling is frequency independent and the real part of the
        self-energy is absorbed in the renormalised w0.
    """

    kind: str
    mesh: FrequencyMesh = None
    coupling: np.ndarray = None
    omega_p: np.ndarray = None
    gamma: np.ndarray = None

    def __post_init__(self):
        if self.kind == "tabulated":
            v = np.asarray(self.coupling, dtype=float)
            if self.mesh is None or v.ndim != 2 or v.shape[1] != self.mesh.size:
                raise ValueError("tabulated bath needs coupling of shape (n_points, mesh.size)")
            if np.any(v < 0) or not np.all(np.isfinite(v)):
                raise ValueError("bath coupling must be finite and >= 0")
            object.__setattr__(self, "coupling", v)
        elif self.kind == "drude_lorentz":
            wp = np.asarray(self.omega_p, dtype=float)
            gam = np.asarray(self.gamma, dtype=float)
            if np.any(wp < 0):
                raise ValueError("omega_p must be >= 0")
            if np.any(gam[np.broadcast_to(wp, gam.shape) > 0] <= 0):
                raise ValueError("drude-lorentz preset needs gamma > 0 wherever omega_p > 0")
            object.__setattr__(self, "omega_p", wp)
            object.__setattr__(self, "gamma", gam)
        else:
            raise ValueError(f"unknown bath kind {self.kind!r}")

    @classmethod
    def tabulated(cls, mesh, coupling):
        return cls("tabulated", mesh=mesh, coupling=coupling)

    @classmethod
    def none(cls, grid, mesh):
        return cls.tabulated(mesh, np.zeros((grid.n_points, mesh.size)))

    @classmethod
    def drude_lorentz(cls, omega_p, gamma):
        return cls("drude_lorentz", omega_p=omega_p, gamma=gamma)

    def _check_preset(self, profile):
        wp = np.broadcast_to(self.omega_p, profile.rho.shape)
        if not np.allclose(wp, profile.plasma_frequency, rtol=1e-12, atol=1e-300):
            raise ValueError("drude-lorentz omega_p must equal alpha/sqrt(eps0 rho) of the profile")

    def preset_coupling(self, profile):
        """Frequency-independent v(x) of the preset, from the coupling identity."""
        self._check_preset(profile)
        wp = np.broadcast_to(self.omega_p, profile.rho.shape)
        gam = np.broadcast_to(self.gamma, profile.rho.shape)
        v = np.zeros_like(profile.rho)
        m = wp > 0
        v[m] = profile.alpha[m] * np.sqrt(2 * profile.rho[m] * gam[m] / (np.pi * EPS0)) / wp[m]
        return v

    def coupling_on(self, mesh, profile):
        """v(x, w) sampled on ``mesh``, shape (n_points, mesh.size)."""
        if self.kind == "drude_lorentz":
            return np.repeat(self.preset_coupling(profile)[:, None], mesh.size, axis=1)
        if self.coupling.shape[0] != profile.grid.n_points:
            raise ValueError("bath and profile do not share the grid")
        if self.mesh.same_as(mesh):
            return self.coupling
        out = np.empty((self.coupling.shape[0], mesh.size))
        for i, row in enumerate(self.coupling):
            out[i] = np.interp(mesh.omega, self.mesh.omega, row, left=0.0, right=0.0)
        return out

    def coupling_at(self, omega, profile):
        """v(x, omega) at a single real frequency, shape (n_points,)."""
        if self.kind == "drude_lorentz":
            return self.preset_coupling(profile)
        return np.sqrt(np.maximum(
            quadrature.interpolate_rows(self.mesh.omega, self.coupling ** 2, omega), 0.0))


@dataclass(frozen=True)
class SusceptibilityTable:
    """chi(x_i, w_j) on the grid and a set of evaluation frequencies."""

    grid: Grid1D
    omega: np.ndarray
    chi: np.ndarray
    provenance: str
    self_energy: np.ndarray = field(default=None, repr=False)

    def index(self, omega):
        j = int(np.argmin(np.abs(self.omega - omega)))
        if abs(self.omega[j] - omega) > 1e-9 * abs(omega):
            raise ValueError(f"omega={omega} not in table")
        return j

    def at(self, omega):
        return self.chi[:, self.index(omega)]

    @property
    def eps(self):
        return 1.0 + self.chi


def bath_self_energy(profile, bath, mesh, omegas):
    """I(x, w) for real (w > 0) or upper-half-plane complex ``omegas``.

    Returns an array of shape (n_points, len(omegas)).
    """
    omegas = np.atleast_1d(np.asarray(omegas))
    n = profile.grid.n_points
    out = np.zeros((n, omegas.size), dtype=complex)
    if bath.kind == "drude_lorentz":
        v2 = bath.preset_coupling(profile) ** 2
        for j, z in enumerate(omegas):
            out[:, j] = -0.5j * np.pi * z * v2
        return out

    v = bath.coupling_on(mesh, profile)
    g = mesh.omega ** 2 * v ** 2
    uniq, inverse = quadrature.unique_rows(g)
    for j, z in enumerate(omegas):
        if np.iscomplexobj(z) and z.imag != 0:
            if z.imag < 0:
                raise ValueError("self-energy is defined on the upper half plane only")
            val = quadrature.pole_integral(mesh.omega, mesh.weights, uniq, z)
        else:
            w = float(np.real(z))
            if w <= 0:
                raise ValueError("real evaluation frequencies must be positive")
            pv = quadrature.pv_integral(mesh.omega, mesh.weights, uniq, w)
            # the spline can undershoot next to a band edge; the density is >= 0
            g0 = np.maximum(quadrature.interpolate_rows(mesh.omega, uniq, w), 0.0)
            val = pv - 0.5j * np.pi * g0 / w
        out[:, j] = val[inverse]
    return out


def compute_chi(profile, bath, mesh, omegas=None):
    """Susceptibility table on ``omegas`` (default: the mesh nodes).

    Raises
    ------
    SingularityError
        If |D| < 1e-14 somewhere off vacuum (undamped resonance on the mesh).
    """
    if omegas is None:
        omegas = mesh.omega
    omegas = np.atleast_1d(np.asarray(omegas))
    if bath.kind == "tabulated" and bath.coupling.shape[0] != profile.grid.n_points:
        raise ValueError("bath and profile do not share the grid")

    rho = profile.rho[:, None]
    w0 = profile.omega0[:, None]
    alpha = profile.alpha[:, None]
    z = omegas[None, :]

    self_energy = bath_self_energy(profile, bath, mesh, omegas)
    if bath.kind == "drude_lorentz":
        wp = np.broadcast_to(bath.omega_p, profile.rho.shape)[:, None]
        gam = np.broadcast_to(bath.gamma, profile.rho.shape)[:, None]
        denom = w0 ** 2 - z ** 2 - 1j * gam * z
        numer = wp ** 2 * np.ones_like(denom)
        provenance = "preset-closed-form"
    else:
        denom = z ** 2 - w0 ** 2 - self_energy / rho ** 2
        numer = -alpha ** 2 / (EPS0 * rho) * np.ones_like(denom)
        provenance = "computed-from-bath"

    material = np.broadcast_to(alpha > 0, denom.shape)
    bad = material & (np.abs(denom) < SINGULAR_DENOMINATOR)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        x = profile.grid.x[i]
        raise SingularityError(
            f"undamped resonance: |D| < {SINGULAR_DENOMINATOR:g} at x={x:g}, omega={omegas[j]}",
            location=(float(x), complex(omegas[j])))
    chi = np.zeros(denom.shape, dtype=complex)
    chi[material] = numer[material] / denom[material]
    return SusceptibilityTable(profile.grid, omegas, chi, provenance, self_energy)


def self_energy_from_chi(chi, profile, omega):
    """Invert chi for the bath self-energy I at one frequency.

    Vacuum points (alpha = 0) return 0.
    """
    chi = np.asarray(chi)
    out = np.zeros(chi.shape, dtype=complex)
    m = profile.alpha > 0
    out[m] = profile.rho[m] ** 2 * (
        omega ** 2 - profile.omega0[m] ** 2
        + profile.alpha[m] ** 2 / (EPS0 * profile.rho[m] * chi[m]))
    return out


def recover_coupling(chi, profile, omega, ix=None):
    """Bath coupling v from chi via v = alpha sqrt(2 rho Im chi / (pi eps0 w)) / |chi|.

    Parameters
    ----------
    chi : SusceptibilityTable or (n_points,) array
        If a table, ``omega`` selects the column.
    profile : MaterialProfile
    omega : float
    ix : index or index array, optional
        Grid points to evaluate; all points by default.

    Raises
    ------
    LosslessPointError
        If Im chi <= 0 at any requested point (vacuum included).
    """
    values = chi.at(omega) if isinstance(chi, SusceptibilityTable) else np.asarray(chi)
    if ix is None:
        ix = np.arange(values.shape[0])
    ix = np.atleast_1d(ix)
    c = values[ix]
    lossless = ~(c.imag > 0)
    if lossless.any():
        i = int(ix[np.argmax(lossless)])
        raise LosslessPointError(
            f"Im chi <= 0 at x={profile.grid.x[i]:g}, omega={omega:g}: coupling identity undefined")
    return (profile.alpha[ix] * np.sqrt(2 * profile.rho[ix] * c.imag / (np.pi * EPS0 * omega))
            / np.abs(c))


@dataclass
class KKReport:
    """Kramers-Kronig consistency of one susceptibility column."""

    applicable: bool
    residual: float = float("nan")
    per_omega: np.ndarray = None
    tail_bound: float = 0.0
    omega: np.ndarray = None


def kramers_kronig_residual(chi, ix, span_tol=1e-3):
    """max |Re chi(w) - (2/pi) PV int w' Im chi(w') / (w'**2 - w**2) dw'|.

    The Hilbert transform runs over the table's own frequencies, which must
    be a mesh starting near zero.  The two edge nodes are skipped.  A
    lossless column (Im chi == 0) is reported as not applicable.

    Warns with ``TruncationWarning`` when |chi(w_max)| >= span_tol * max|chi|.
    """
    mesh = FrequencyMesh(chi.omega.real)
    c = chi.chi[ix]
    if not np.any(c.imag > 0):
        return KKReport(applicable=False, omega=mesh.omega)
    om = mesh.omega
    g = om * c.imag
    # leading-order tail: Im chi ~ w**-3 beyond the mesh, plus the log from the cut
    w_top = om[-1]
    tail = (abs(c.imag[-1]) / np.pi) * (2.0 / 3.0 + np.log(2 * w_top / (om[-1] - om[-2])))
    if abs(c[-1]) >= span_tol * np.max(np.abs(c)):
        warnings.warn(
            f"mesh span too short for Kramers-Kronig: |chi(w_max)|/max|chi| = "
            f"{abs(c[-1]) / np.max(np.abs(c)):.2e}; estimated tail bound {tail:.2e}",
            TruncationWarning, stacklevel=2)
    res = np.full(om.size, np.nan)
    for j in range(1, om.size - 1):
        hilbert = -(2 / np.pi) * quadrature.pv_integral(om, mesh.weights, g, om[j])
        res[j] = abs(c[j].real - hilbert)
    return KKReport(True, float(np.nanmax(res)), res, float(tail), om)


def lorentz_chi(profile, omegas):
    """Closed-form lossless Lorentz oscillator -(alpha**2/eps0 rho)/(w**2 - w0**2).

    Evaluated in complex arithmetic so that it reproduces a bath-free
    ``compute_chi`` bit for bit.
    """
    z = np.atleast_1d(omegas)[None, :]
    numer = -(profile.alpha[:, None] ** 2 / (EPS0 * profile.rho[:, None])) + 0j
    denom = z ** 2 - profile.omega0[:, None] ** 2 - 0j
    with np.errstate(divide="ignore", invalid="ignore"):
        out = numer / denom
    return np.where(profile.alpha[:, None] > 0, out, 0.0)


def drude_lorentz_setup(grid, omega_p, omega0, gamma, rho=1.0):
    """Profile and preset bath whose chi is wp**2 / (w0**2 - w**2 - i gamma w)."""
    rho = np.broadcast_to(np.asarray(rho, dtype=float), (grid.n_points,))
    wp = np.broadcast_to(np.asarray(omega_p, dtype=float), (grid.n_points,))
    profile = MaterialProfile(grid, rho, omega0, wp * np.sqrt(EPS0 * rho))
    bath = BathModel.drude_lorentz(wp, np.broadcast_to(gamma, (grid.n_points,)))
    return profile, bath


def sine_band_coupling(mesh, v_peak, omega_cut):
    """Smooth band-limited spectrum v(w) = v_peak sin(pi w / w_cut) on (0, w_cut)."""
    om = mesh.omega
    v = v_peak * np.sin(np.pi * np.clip(om / omega_cut, 0.0, 1.0))
    return np.where(om < omega_cut, np.abs(v), 0.0)
