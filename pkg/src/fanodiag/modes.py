"""Coefficient kernels of the diagonalizing mode operators C(x, w).

Every kernel f(x, x') is stored as a local part times delta(x - x') plus a
dense part.  On the grid the delta becomes 1/h on the diagonal, so the
matrix form is ``dense + diag(local) / h`` and integrals over an
intermediate point become ``h * sum``.

The bath kernels f_Y(x, x', w', w) and f_Q carry a further delta(w' - w)
part.  Their regular part always factorises as a profile p(x, w') over a
pole (w + i0)**2 - w'**2 times one spatial kernel B(x, x'), and is stored
that way instead of as a dense (x, x', w') array.

Mode labels are restricted to absorbing points (Im chi > 0); every kernel
column at another point is zero.
"""

from dataclasses import dataclass, field

import numpy as np

from . import quadrature
from .errors import LosslessPointError
from .greenfn import laplacian_matrix, wavenumber
from .material import bath_self_energy
from .units import C_LIGHT, EPS0, HBAR, MU0


def _safe_div(num, den):
    num, den = np.broadcast_arrays(np.asarray(num, dtype=complex), np.asarray(den))
    out = np.zeros(num.shape, dtype=complex)
    m = den != 0
    out[m] = num[m] / den[m]
    return out


@dataclass
class Kernel:
    """f(x, x') = local(x) delta(x - x') + dense(x, x')."""

    local: np.ndarray
    dense: np.ndarray

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros(n, complex), np.zeros((n, n), complex))

    @classmethod
    def local_only(cls, values):
        values = np.asarray(values, dtype=complex)
        return cls(values, np.zeros((values.size, values.size), complex))

    def scaled(self, factor):
        """Multiply by a scalar or by a function of x (row scaling)."""
        f = np.asarray(factor)
        if f.ndim == 0:
            return Kernel(self.local * f, self.dense * f)
        return Kernel(self.local * f, self.dense * f[:, None])

    def __add__(self, other):
        return Kernel(self.local + other.local, self.dense + other.dense)

    def __sub__(self, other):
        return Kernel(self.local - other.local, self.dense - other.dense)

    def matrix(self, h):
        return self.dense + np.diag(self.local) / h

    def max_abs(self):
        return max(float(np.max(np.abs(self.local), initial=0.0)),
                   float(np.max(np.abs(self.dense), initial=0.0)))


@dataclass
class STensorDiagonal:
    """s(x, x', w) = s_diag(x) delta(x - x') with s_diag = sqrt(hbar w rho / 2) e^{i psi}."""

    values: np.ndarray
    phase: np.ndarray
    omega: float
    convention: str = "i conj(chi)/|chi|"

    def unitarity_residual(self, profile):
        """max | |s|^2 / rho - hbar w / 2 | / (hbar w / 2) over points with a defined phase."""
        m = self.phase != 0
        if not m.any():
            return 0.0
        target = HBAR * self.omega / 2
        return float(np.max(np.abs(np.abs(self.values[m]) ** 2 / profile.rho[m] - target)) / target)

    def phase_residual(self):
        m = self.phase != 0
        return float(np.max(np.abs(np.abs(self.phase[m]) - 1.0), initial=0.0))


@dataclass
class NoiseAmplitude:
    """n(x, w) = sqrt(hbar eps0 Im chi / pi) w, zero where Im chi <= 0."""

    values: np.ndarray
    omega: float

    @classmethod
    def from_chi(cls, chi, omega):
        chi = np.asarray(chi)
        return cls(np.sqrt(HBAR * EPS0 * np.maximum(chi.imag, 0.0) / np.pi) * omega, omega)


def build_s(profile, chi, omega, points=None):
    """Diagonal s-tensor with the phase e^{i psi} = i chi* / |chi|.

    Parameters
    ----------
    profile : MaterialProfile
    chi : (n_points,) complex array
        Susceptibility column at ``omega``.
    omega : float
    points : index array, optional
        Points at which a coefficient will be requested.  The phase is
        undefined where chi = 0; asking for such a point raises.  Points with
        chi = 0 that are not requested get s = 0.
    """
    chi = np.asarray(chi, dtype=complex)
    if points is not None:
        pts = np.atleast_1d(points)
        zero = chi[pts] == 0
        if zero.any():
            i = int(pts[np.argmax(zero)])
            raise LosslessPointError(
                f"chi = 0 at x={profile.grid.x[i]:g}: phase of the s-tensor undefined")
    mag = np.abs(chi)
    phase = _safe_div(1j * chi.conj(), mag)
    values = np.sqrt(HBAR * omega * profile.rho / 2) * phase
    return STensorDiagonal(values, phase, omega)


def _labels(chi):
    return np.asarray(chi).imag > 0


def build_fE(G, chi, bath, s, profile, omega, labels=None):
    """Electric-field kernel from the Green function and the s-tensor.

    f_E(x, x') = -(w/c)**2 G(x, x') v(x') chi(x') s(x') / (rho(x') alpha(x')).

    ``labels`` optionally lists the mode labels that will be used; a vacuum
    label raises.  Non-absorbing columns are zero.
    """
    chi = np.asarray(chi, dtype=complex)
    if labels is not None:
        lab = np.atleast_1d(labels)
        vac = profile.alpha[lab] == 0
        if vac.any():
            i = int(lab[np.argmax(vac)])
            raise LosslessPointError(f"vacuum point x={profile.grid.x[i]:g} requested as a mode label")
    v = bath.coupling_at(omega, profile)
    source = _safe_div(v * chi * s.values, profile.rho * profile.alpha)
    source = np.where(_labels(chi), source, 0.0)
    dense = -(omega / C_LIGHT) ** 2 * G.G * source[None, :]
    return Kernel(np.zeros(chi.size, complex), dense)


@dataclass
class BathKernel:
    """f(x, x', w', w) = delta(w' - w) [delta_s + delta_pole](x, x')
    + PV p(x, w') / (w**2 - w'**2) * B(x, x').

    ``delta_s`` is the s-tensor part and ``delta_pole`` the Plemelj term of
    the (w + i0) pole; ``p`` lives on the bath mesh.
    """

    omega: float
    mesh: object
    delta_s: Kernel
    delta_pole: Kernel
    profile_p: np.ndarray
    B: Kernel

    @property
    def delta(self):
        return self.delta_s + self.delta_pole

    def regular_at(self, k):
        """Regular kernel at mesh node ``k`` (must not be the pole node)."""
        wk = self.mesh.omega[k]
        if abs(wk - self.omega) <= 1e-12 * self.omega:
            raise ValueError("regular part is singular at w' = w")
        return self.B.scaled(self.profile_p[:, k] / (self.omega ** 2 - wk ** 2))

    def integrate(self, weight, renormalized=False):
        """int dw' weight(x, w') f(x, x', w', w) as a spatial kernel.

        ``weight`` is (n_points, mesh.size).  With ``renormalized`` the
        principal-value part is dropped (absorbed into the renormalised
        oscillator frequency of an Ohmic bath).
        """
        j = self.mesh.index_of(self.omega)
        out = self.delta.scaled(weight[:, j])
        if renormalized:
            return out
        pv = quadrature.pv_integral(self.mesh.omega, self.mesh.weights,
                                    weight * self.profile_p, self.omega)
        return out + self.B.scaled(pv)


@dataclass
class ModeCoefficientSet:
    """All coefficient kernels at one mode frequency."""

    omega: float
    grid: object
    fE: Kernel
    fA: Kernel
    fPi: Kernel
    fX: Kernel
    fP: Kernel
    fY: BathKernel
    fQ: BathKernel
    s: STensorDiagonal
    chi: np.ndarray
    coupling: np.ndarray
    self_energy: np.ndarray
    eps: np.ndarray
    rho: np.ndarray
    renormalized: bool
    labels: np.ndarray = field(default=None)


def build_all_coefficients(fE, chi, bath, s, profile, omega, mesh, G=None):
    """Derive f_A, f_Pi, f_X, f_P, f_Y, f_Q from f_E.

    Parameters
    ----------
    fE : Kernel
    chi : (n_points,) complex array at ``omega``
    bath : BathModel
    s : STensorDiagonal
    profile : MaterialProfile
    omega : float
    mesh : FrequencyMesh
        Bath-frequency mesh; must contain ``omega`` as a node.
    G : GreenSolution, optional
        Only used to record eps for the differential check.

    Raises
    ------
    ValueError
        If ``omega`` is not a mesh node.
    """
    try:
        mesh.index_of(omega)
    except ValueError as exc:
        raise ValueError(f"bath mesh does not contain the mode frequency {omega}") from exc
    chi = np.asarray(chi, dtype=complex)
    rho, alpha = profile.rho, profile.alpha
    v = bath.coupling_at(omega, profile)
    labels = _labels(chi)
    src = np.where(labels, _safe_div(v * chi * s.values, rho * alpha), 0.0)
    chi_over_alpha = _safe_div(chi, alpha)

    fA = fE.scaled(-1j / omega)
    fPi = fE.scaled(-EPS0)
    fX = Kernel(-EPS0 * _safe_div(src, alpha), fE.scaled(-EPS0 * chi_over_alpha).dense)
    fP = Kernel(1j * EPS0 * omega * rho * _safe_div(src, alpha),
                fE.scaled(1j * alpha / omega + 1j * EPS0 * rho * omega * chi_over_alpha).dense)

    B = fX.scaled(1j * omega / rho)
    s_local = np.where(labels, s.values, 0.0)
    aY = Kernel.local_only(1j * s_local / (rho * omega))
    plemelj = B.scaled(-1j * np.pi / (2 * omega) * v)
    v_mesh = bath.coupling_on(mesh, profile)
    fY = BathKernel(omega, mesh, aY, plemelj, v_mesh.astype(complex), B)
    q_scale = -1j * rho[:, None] * mesh.omega[None, :] ** 2 / omega
    fQ = BathKernel(omega, mesh, aY.scaled(-1j * rho * omega), plemelj.scaled(-1j * rho * omega),
                    q_scale * v_mesh, B)

    self_energy = bath_self_energy(profile, bath, mesh, [omega])[:, 0]
    eps = G.eps if G is not None else 1.0 + chi
    return ModeCoefficientSet(omega, profile.grid, fE, fA, fPi, fX, fP, fY, fQ, s, chi, v,
                              self_energy, np.asarray(eps), rho, bath.kind == "drude_lorentz",
                              np.flatnonzero(labels))


def build_mode_set(G, chi, bath, profile, mesh):
    """Convenience: s, f_E and all kernels at the Green function's frequency."""
    omega = float(np.real(G.omega))
    s = build_s(profile, chi, omega)
    fE = build_fE(G, chi, bath, s, profile, omega)
    return build_all_coefficients(fE, chi, bath, s, profile, omega, mesh, G)


@dataclass
class RelationResidual:
    name: str
    residual: float
    scale: float
    kind: str

    @property
    def relative(self):
        return self.residual / self.scale if self.scale > 0 else self.residual


def _rel(name, terms, kind):
    """Residual of sum(terms) = 0 relative to the largest term."""
    total = sum(terms)
    scale = max(float(np.max(np.abs(t))) for t in terms)
    return RelationResidual(name, float(np.max(np.abs(total))), scale, kind)


def _kernel_terms(kernels, h):
    return [k.matrix(h) for k in kernels]


def eigen_residuals(cs, profile, n_bath_samples=12, interior_only=False, rows=None):
    """Residuals of the six linear relations satisfied by the kernels.

    Returns a dict name -> RelationResidual.  Residuals are max-norms relative
    to the largest single term of the relation.

    The differential relation uses the same second-difference stencil and
    outgoing closures as the finite-difference Green solver.  The bath-integral
    relation integrates the stored f_Q over the bath mesh with the
    principal-value rule (or, for the renormalised Ohmic preset, keeps only
    the on-shell part).  ``interior_only`` drops the two end rows of the
    differential check; ``rows`` restricts it to the given nodes (e.g. away
    from material interfaces, where a continuum G is only O(h) accurate
    under the stencil).
    """
    h = cs.grid.h
    w = cs.omega
    rho, alpha, w0 = profile.rho, profile.alpha, profile.omega0
    out = {}

    A, Pi, X, P = _kernel_terms([cs.fA, cs.fPi, cs.fX, cs.fP], h)
    out["field_momentum"] = _rel("field_momentum", [1j * w * A, Pi / EPS0], "exact")

    k = wavenumber(cs.eps[[0, -1]], w)
    L = laplacian_matrix(cs.grid, k[0], k[1])
    terms = [1j * w * Pi, (L @ A) / MU0, -(alpha ** 2 / rho)[:, None] * A,
             -(alpha / rho)[:, None] * P]
    if interior_only:
        terms = [t[1:-1] for t in terms]
    elif rows is not None:
        terms = [t[np.asarray(rows)] for t in terms]
    out["wave"] = _rel("wave", terms, "stencil")

    out["polarization"] = _rel(
        "polarization", [1j * w * X, (alpha / rho)[:, None] * A, P / rho[:, None]], "exact")

    bath_int = cs.fQ.integrate(cs.fY.profile_p.real, cs.renormalized)
    out["polarization_momentum"] = _rel(
        "polarization_momentum",
        [1j * w * P, -(rho * w0 ** 2)[:, None] * X, -bath_int.matrix(h) / rho[:, None]],
        "quadrature")

    # bath relations at sampled off-pole nodes and on the delta parts
    mesh = cs.fY.mesh
    j0 = mesh.index_of(w)
    cand = np.unique(np.linspace(0, mesh.size - 1, n_bath_samples).astype(int))
    cand = [c for c in cand if c != j0]
    worst_y = worst_q = 0.0
    scale_y = scale_q = 0.0
    for kk in cand:
        Y = cs.fY.regular_at(kk).matrix(h)
        Q = cs.fQ.regular_at(kk).matrix(h)
        vk = cs.fY.profile_p[:, kk].real
        ty = [1j * w * Y, (vk / rho)[:, None] * X, Q / rho[:, None]]
        tq = [1j * w * Q, -(rho * mesh.omega[kk] ** 2)[:, None] * Y]
        worst_y = max(worst_y, float(np.max(np.abs(sum(ty)))))
        worst_q = max(worst_q, float(np.max(np.abs(sum(tq)))))
        scale_y = max(scale_y, max(float(np.max(np.abs(t))) for t in ty))
        scale_q = max(scale_q, max(float(np.max(np.abs(t))) for t in tq))
    dY, dQ = cs.fY.delta.matrix(h), cs.fQ.delta.matrix(h)
    ty = [1j * w * dY, dQ / rho[:, None]]
    tq = [1j * w * dQ, -(rho * w ** 2)[:, None] * dY]
    worst_y = max(worst_y, float(np.max(np.abs(sum(ty)))))
    worst_q = max(worst_q, float(np.max(np.abs(sum(tq)))))
    scale_y = max(scale_y, max(float(np.max(np.abs(t))) for t in ty))
    scale_q = max(scale_q, max(float(np.max(np.abs(t))) for t in tq))
    out["bath_coordinate"] = RelationResidual("bath_coordinate", worst_y, scale_y, "exact")
    out["bath_momentum"] = RelationResidual("bath_momentum", worst_q, scale_q, "exact")
    return out


def structural_residuals(cs):
    """Relative residuals of f_A = -(i/w) f_E, f_Pi = -eps0 f_E and f_Q = -i rho w'^2/w f_Y."""
    w, h = cs.omega, cs.grid.h
    E = cs.fE.matrix(h)
    out = {
        "vector_potential": _rel("vector_potential", [cs.fA.matrix(h), 1j / w * E], "exact"),
        "field_momentum_from_E": _rel("field_momentum_from_E", [cs.fPi.matrix(h), EPS0 * E], "exact"),
    }
    mesh = cs.fY.mesh
    expected = -1j * cs.rho[:, None] * mesh.omega[None, :] ** 2 / w * cs.fY.profile_p
    out["bath_momentum_from_Y"] = _rel("bath_momentum_from_Y", [cs.fQ.profile_p, -expected], "exact")
    out["bath_momentum_from_Y_delta"] = _rel(
        "bath_momentum_from_Y_delta",
        [cs.fQ.delta.matrix(h), 1j * w * cs.rho[:, None] * cs.fY.delta.matrix(h)], "exact")
    return out


@dataclass
class CommutationReport:
    """Checks of [C(w), C^+(w')] = delta(w - w') delta(x - x').

    ``s_condition`` is the relative error of |s|^2/rho = hbar w / 2 (worst of
    both sets).  ``double_curl`` is the partial-integration integral whose
    vanishing removes the s-independent terms; ``offdiagonal`` is the whole
    left side for w != w'.  Both are reported with the largest single term
    as scale.
    """

    s_condition: float
    double_curl: float
    double_curl_scale: float
    offdiagonal: float
    offdiagonal_scale: float
    blocks: dict

    @property
    def double_curl_relative(self):
        return self.double_curl / self.double_curl_scale

    @property
    def offdiagonal_relative(self):
        return self.offdiagonal / self.offdiagonal_scale


def _bath_block(c1, c2, h, conjugate, points=None):
    """int dw'' [Y1^+ Q2 - Q1^+ Y2] (or Q1^T Y2 - Y1^T Q2) for w1 != w2.

    Products of the two pole terms are reduced with the partial fraction
    1/((a1 - u)(a2 - u)) = [1/(a2 - u) - 1/(a1 - u)] / (a1 - a2), so the w''
    integral becomes a difference of self-energies; conjugation flips the
    i0 of the first factor.
    """
    rho = c1.rho
    w1, w2 = c1.omega, c2.omega
    v1, v2 = c1.coupling, c2.coupling
    I1 = c1.self_energy.conj() if conjugate else c1.self_energy
    pp = (c2.self_energy - I1) / (w1 ** 2 - w2 ** 2)
    AY1, AY2 = (_columns(c.fY.delta_s.matrix(h), points) for c in (c1, c2))
    AQ1, AQ2 = (_columns(c.fQ.delta_s.matrix(h), points) for c in (c1, c2))
    B1, B2 = (_columns(c.fY.B.matrix(h), points) for c in (c1, c2))
    op = (lambda M: M.conj().T) if conjugate else (lambda M: M.T)
    # Q prefactor -i rho w''^2 / w of the first set, conjugated if needed
    q1 = 1j if conjugate else -1j
    d21 = w2 ** 2 - w1 ** 2

    def dot(M1, wts, M2):
        return h * op(M1) @ (wts[:, None] * M2)

    # (first set's coordinate-like kernel) x (second set's momentum-like kernel)
    yq = (dot(AY1, -1j * rho * w1 ** 2 * v1 / (w2 * d21), B2)
          + dot(B1, -v2 / d21, AQ2)
          + dot(B1, (-1j * rho / w2) * pp, B2))
    # (first set's momentum-like kernel) x (second set's coordinate-like kernel)
    qy = (dot(AQ1, v1 / d21, B2)
          + dot(B1, (q1 * rho * w2 ** 2 / w1) * (-v2 / d21), AY2)
          + dot(B1, (q1 * rho / w1) * pp, B2))
    return yq, qy


def _field_blocks(c1, c2, h, conjugate, points=None):
    op = (lambda M: M.conj().T) if conjugate else (lambda M: M.T)
    A1, Pi1, X1, P1 = (_columns(k.matrix(h), points) for k in (c1.fA, c1.fPi, c1.fX, c1.fP))
    A2, Pi2, X2, P2 = (_columns(k.matrix(h), points) for k in (c2.fA, c2.fPi, c2.fX, c2.fP))
    if conjugate:
        field_ = h * (op(A1) @ Pi2 - op(Pi1) @ A2)
        matter = h * (op(X1) @ P2 - op(P1) @ X2)
    else:
        field_ = h * (op(Pi1) @ A2 - op(A1) @ Pi2)
        matter = h * (op(P1) @ X2 - op(X1) @ P2)
    return field_, matter


def _columns(M, points):
    return M if points is None else M[:, points]


def double_curl_integral(c1, c2, points=None):
    """int dx'' [(d''^2 f_E1)^+ f_E2 - f_E1^+ d''^2 f_E2] with the closure stencil.

    Only the boundary rows of the stencil survive the difference, so this is
    the surface flux carried to the grid ends by the labels in ``points``.
    Returns (max|integral|, max|first term|).
    """
    h = c1.grid.h
    E1, E2 = _columns(c1.fE.matrix(h), points), _columns(c2.fE.matrix(h), points)
    k1 = wavenumber(c1.eps[[0, -1]], c1.omega)
    k2 = wavenumber(c2.eps[[0, -1]], c2.omega)
    L1 = laplacian_matrix(c1.grid, k1[0], k1[1])
    L2 = laplacian_matrix(c2.grid, k2[0], k2[1])
    first = h * (L1 @ E1).conj().T @ E2
    second = h * E1.conj().T @ (L2 @ E2)
    return float(np.max(np.abs(first - second))), float(np.max(np.abs(first)))


def commutation_residual(c1, c2, profile, points=None):
    """Off-diagonal ([C(w1), C^+(w2)], w1 != w2) commutator check.

    Parameters
    ----------
    c1, c2 : ModeCoefficientSet
        Sets at two distinct mesh frequencies on the same grid.
    profile : MaterialProfile
    points : index array, optional
        Mode labels (x, x') to check.  Labels next to a grid end carry
        outgoing flux through it, so the check is meaningful for labels
        shielded by absorbing cladding.

    Returns
    -------
    CommutationReport
    """
    if c1.omega == c2.omega:
        raise ValueError("off-diagonal check needs two distinct frequencies")
    h = c1.grid.h
    s_cond = max(c1.s.unitarity_residual(profile), c2.s.unitarity_residual(profile))
    dc, dc_scale = double_curl_integral(c1, c2, points)
    field_, matter = _field_blocks(c1, c2, h, True, points)
    yq, qy = _bath_block(c1, c2, h, True, points)
    total = field_ + matter + yq - qy
    blocks = {"field": field_, "matter": matter, "bath_yq": yq, "bath_qy": qy}
    scale = max(float(np.max(np.abs(b))) for b in blocks.values())
    return CommutationReport(s_cond, dc, dc_scale, float(np.max(np.abs(total))), scale,
                             {k: float(np.max(np.abs(b))) for k, b in blocks.items()})


def cc_commutator_residual(c1, c2, points=None):
    """Spot check of [C(w1), C(w2)] = 0 for w1 != w2; returns (residual, scale)."""
    if c1.omega == c2.omega:
        raise ValueError("spot check needs two distinct frequencies")
    h = c1.grid.h
    field_, matter = _field_blocks(c1, c2, h, False, points)
    yq, qy = _bath_block(c1, c2, h, False, points)
    total = field_ + matter + qy - yq
    scale = max(float(np.max(np.abs(b))) for b in (field_, matter, yq, qy))
    return float(np.max(np.abs(total))), scale
