"""Brute-force oracle: the discretised quadratic Hamiltonian and its normal modes.

The field, oscillator and bath variables are put on the grid and on a finite
set of bath frequencies w_m with weights dw_m.  Rescaled canonical variables

    A~ = sqrt(h) A,  X~ = sqrt(h) X,  Y~_m = sqrt(h dw_m) Y_m  (same for momenta)

obey [q~_i, p~_j] = i hbar delta_ij, and in them the energy is a plain
quadratic form H = z^T M_H z / 2 with z = (A, X, Y; Pi, P, Q).  The bath
couples with vbar_m = v(w_m) sqrt(dw_m).  In the transverse 1D sector there
is no electrostatic term.

Nothing here uses the Green-function or mode-kernel machinery; the only
inputs are the grid, the material profile and the bath samples.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SingularityError, StabilityError
from .units import EPS0, HBAR, MU0

DEFAULT_DIMENSION_CAP = 25_000


@dataclass
class DiscreteQuadraticModel:
    """H = z^T M_H z / 2 in the layout (A_1..A_N, X_1..X_N, Y_11..Y_NM; Pi, P, Q).

    Y_im sits at offset 2N + i*M + m inside the coordinate block.
    """

    grid: object
    rho: np.ndarray
    omega0: np.ndarray
    alpha: np.ndarray
    bath_omega: np.ndarray
    bath_weights: np.ndarray
    coupling: np.ndarray
    boundary: str
    M_H: sp.csr_matrix
    zero_modes: int = 0

    @property
    def n_points(self):
        return self.grid.n_points

    @property
    def n_bath(self):
        return self.bath_omega.size

    @property
    def n_dof(self):
        return self.n_points * (2 + self.n_bath)

    @property
    def vbar(self):
        return self.coupling * np.sqrt(self.bath_weights)[None, :]

    def index(self, block, i, m=None):
        """Position of a variable in z; ``block`` in {A, X, Y, Pi, P, Q}."""
        N, M, n = self.n_points, self.n_bath, self.n_dof
        base = {"A": 0, "X": N, "Y": 2 * N, "Pi": n, "P": n + N, "Q": n + 2 * N}[block]
        if block in ("Y", "Q"):
            return base + np.asarray(i) * M + (0 if m is None else np.asarray(m))
        return base + np.asarray(i)

    def symplectic_form(self):
        n = self.n_dof
        I = sp.identity(n, format="csr")
        return sp.bmat([[None, I], [-I, None]], format="csr")

    def energy(self, z):
        z = np.asarray(z)
        return 0.5 * float(np.real(z.conj() @ (self.M_H @ z)))


def stiffness_matrix(n, h, boundary):
    """Second-difference stiffness K = -d^2/dx^2 on n nodes (Dirichlet walls or periodic)."""
    main = np.full(n, 2.0)
    off = -np.ones(n - 1)
    K = sp.diags([off, main, off], [-1, 0, 1], format="lil")
    if boundary == "periodic":
        K[0, n - 1] = -1.0
        K[n - 1, 0] = -1.0
    elif boundary != "dirichlet":
        raise ValueError(f"unknown boundary {boundary!r}")
    return (K / h ** 2).tocsr()


def assemble_hamiltonian(profile, bath_omega, bath_weights, coupling, boundary="dirichlet",
                         dimension_cap=DEFAULT_DIMENSION_CAP, validate=True):
    """Assemble M_H for a finite bath.

    Parameters
    ----------
    profile : MaterialProfile
    bath_omega, bath_weights : (M,) arrays
        Bath frequencies (> 0) and quadrature weights.
    coupling : (N, M) array
        v(x_i, w_m) >= 0.
    boundary : {"dirichlet", "periodic"}
    dimension_cap : int
        Upper bound on the phase-space dimension 2 N (2 + M).

    Raises
    ------
    StabilityError
        If the quadratic form is not positive definite (semidefinite with
        exactly the translation mode is accepted for periodic ends).
    """
    grid = profile.grid
    N, h = grid.n_points, grid.h
    bath_omega = np.asarray(bath_omega, dtype=float)
    bath_weights = np.asarray(bath_weights, dtype=float)
    coupling = np.asarray(coupling, dtype=float).reshape(N, bath_omega.size)
    M = bath_omega.size
    if 2 * N * (2 + M) > dimension_cap:
        raise ValueError(f"phase-space dimension {2 * N * (2 + M)} exceeds cap {dimension_cap}")
    if np.any(bath_omega <= 0) or np.any(bath_weights <= 0):
        raise ValueError("bath frequencies and weights must be positive")
    if np.any(coupling < 0):
        raise ValueError("bath coupling must be >= 0")
    rho, w0, alpha = profile.rho, profile.omega0, profile.alpha
    vbar = coupling * np.sqrt(bath_weights)[None, :]
    n = N * (2 + M)
    iA = np.arange(N)
    iX = N + np.arange(N)
    iY = 2 * N + np.arange(N * M)
    pPi, pP, pQ = n + iA, n + iX, n + iY
    rows, cols, vals = [], [], []

    def put(r, c, v, sym=True):
        r, c, v = np.broadcast_arrays(np.asarray(r), np.asarray(c), np.asarray(v, dtype=float))
        rows.append(r.ravel())
        cols.append(c.ravel())
        vals.append(v.ravel())
        if sym:
            rows.append(c.ravel())
            cols.append(r.ravel())
            vals.append(v.ravel())

    K = stiffness_matrix(N, h, boundary).tocoo()
    put(K.row, K.col, K.data / MU0, sym=False)
    put(iA, iA, alpha ** 2 / rho, sym=False)
    put(iX, iX, rho * w0 ** 2, sym=False)
    put(iY, iY, (rho[:, None] * bath_omega[None, :] ** 2).ravel(), sym=False)
    put(pPi, pPi, np.full(N, 1.0 / EPS0), sym=False)
    put(pP, pP, 1.0 / rho, sym=False)
    put(pQ, pQ, np.repeat(1.0 / rho, M), sym=False)
    put(iA, pP, alpha / rho)
    put(np.repeat(iX, M), pQ, (vbar / rho[:, None]).ravel())
    MH = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                       shape=(2 * n, 2 * n)).tocsr()
    model = DiscreteQuadraticModel(grid, rho.copy(), w0.copy(), alpha.copy(), bath_omega,
                                   bath_weights, coupling, boundary, MH)
    if validate:
        model.zero_modes = validate_model(model)
    return model


def _rotation(model):
    """Index/sign map to (q', p') = ((A, P, Y), (Pi, -X, Q)), which has no q'-p' cross terms."""
    N, n = model.n_points, model.n_dof
    sign = np.ones(2 * n)
    q = np.concatenate([np.arange(N), n + N + np.arange(N), 2 * N + np.arange(n - 2 * N)])
    p = np.concatenate([n + np.arange(N), N + np.arange(N), n + 2 * N + np.arange(n - 2 * N)])
    sign[N + np.arange(N)] = -1.0   # X enters p' with a minus sign
    return q, p, sign


def split_blocks(model):
    """Return (V, T) with H = q'^T V q' / 2 + p'^T T p' / 2, both sparse."""
    q, p, sign = _rotation(model)
    S = sp.diags(sign)
    Ms = (S @ model.M_H @ S).tocsr()
    V = Ms[q][:, q]
    T = Ms[p][:, p]
    cross = Ms[q][:, p]
    if cross.nnz and np.max(np.abs(cross.data)) > 0:
        raise AssertionError("rotated form has coordinate-momentum cross terms")
    return V.tocsr(), T.tocsr()


def validate_model(model):
    """Check positive definiteness by block factorisation.

    The momentum form splits into a field part and one (M+1)-block per grid
    point; each block is Cholesky-factorised.  The coordinate form reduces,
    after eliminating the bath and oscillator coordinates (positive
    diagonal pivots), to the field stiffness.

    Returns the number of zero modes (0, or 1 for periodic ends).
    """
    N, M = model.n_points, model.n_bath
    rho, w0, vbar = model.rho, model.omega0, model.vbar
    for i in range(N):
        blk = np.empty((M + 1, M + 1))
        blk[0, 0] = rho[i] * w0[i] ** 2
        blk[0, 1:] = blk[1:, 0] = -vbar[i] / rho[i]
        blk[1:, 1:] = np.eye(M) / rho[i]
        try:
            np.linalg.cholesky(blk)
        except np.linalg.LinAlgError:
            evals, evecs = np.linalg.eigh(blk)
            raise StabilityError(
                f"Hamiltonian not positive definite at x={model.grid.x[i]:g}: bath coupling "
                f"sum vbar^2/rho^2 = {np.sum(vbar[i] ** 2) / rho[i] ** 2:.6g} >= omega0^2 = "
                f"{w0[i] ** 2:.6g}; most negative direction (X, Q_1..Q_M) = "
                f"{np.array2string(evecs[:, 0], precision=3, threshold=8)} "
                f"with eigenvalue {evals[0]:.3e}") from None
    if np.any(model.bath_omega <= 0):
        raise StabilityError("non-positive bath frequency")
    K = stiffness_matrix(N, model.grid.h, model.boundary).toarray() / MU0
    if model.boundary == "periodic":
        evals = np.linalg.eigvalsh(K)
        if evals[0] < -1e-10 * evals[-1] or evals[1] <= 1e-10 * evals[-1]:
            raise StabilityError("periodic stiffness has unexpected null space")
        return 1
    try:
        scipy.linalg.cholesky_banded(
            np.vstack([np.r_[0.0, np.diag(K, 1)], np.diag(K)]), lower=False)
    except np.linalg.LinAlgError:
        raise StabilityError("field stiffness not positive definite") from None
    return 0


def continuum_energy(model, A, Pi, X, P, Y, Q):
    """Energy by direct quadrature of the energy density of the physical fields.

    Arguments are the unscaled fields on the grid; ``Y`` and ``Q`` are
    (N, M) arrays of bath amplitudes per unit frequency.
    """
    h = model.grid.h
    rho, w0, alpha = model.rho, model.omega0, model.alpha
    wm, dw, v = model.bath_omega, model.bath_weights, model.coupling
    density = (Pi ** 2 / (2 * EPS0) + P ** 2 / (2 * rho) + 0.5 * rho * w0 ** 2 * X ** 2
               + alpha / rho * A * P + alpha ** 2 / (2 * rho) * A ** 2)
    bath = (Q ** 2 / (2 * rho[:, None]) + 0.5 * rho[:, None] * wm[None, :] ** 2 * Y ** 2
            + v / rho[:, None] * X[:, None] * Q)
    density = density + bath @ dw
    if model.boundary == "dirichlet":
        Ab = np.concatenate([[0.0], A, [0.0]])
    else:
        Ab = np.concatenate([A, A[:1]])
    grad = np.diff(Ab) / h
    return float(h * np.sum(density) + h * np.sum(grad ** 2) / (2 * MU0))


def to_scaled(model, A, Pi, X, P, Y, Q):
    """Physical fields -> z vector of rescaled canonical variables."""
    sh = np.sqrt(model.grid.h)
    sy = np.sqrt(model.grid.h * model.bath_weights)[None, :]
    return np.concatenate([sh * A, sh * X, (sy * Y).ravel(), sh * Pi, sh * P, (sy * Q).ravel()])


@dataclass
class NormalModeDecomposition:
    """Normal modes of the discrete Hamiltonian.

    ``omega`` holds the mode frequencies (ascending).  ``amplitudes`` is the
    (2n, K) complex matrix w with z = sum_k sqrt(hbar Omega_k) (w_k a_k + c.c.);
    ``symplectic_residual`` certifies that the a_k are canonical.
    """

    omega: np.ndarray
    amplitudes: np.ndarray
    symplectic_residual: float
    method: str
    model: object = field(repr=False, default=None)

    def covariance(self, rows):
        """Symmetrised ground-state covariance <{z_i, z_j}>/2 for the given z indices."""
        W = self.amplitudes[rows]
        return HBAR * np.real((W * self.omega[None, :]) @ W.conj().T)


def _normal_modes_rotated(model):
    """Cholesky of the momentum form, then a symmetric eigenproblem."""
    V, T = split_blocks(model)
    Vd, Td = V.toarray(), T.toarray()
    R = np.linalg.cholesky(Td)                     # T = R R^T
    H = R.T @ Vd @ R
    lam, U = scipy.linalg.eigh(H, overwrite_a=True, check_finite=False)
    lam = np.clip(lam, 0.0, None)
    omega = np.sqrt(lam)
    Xq = R @ U
    Xp = scipy.linalg.solve_triangular(R.T, U, lower=False)
    sym = float(np.max(np.abs(Xq.T @ Xp - np.eye(U.shape[0]))))
    keep = omega > 1e-9 * omega.max()
    omega, Xq, Xp = omega[keep], Xq[:, keep], Xp[:, keep]
    # q' = Xq q'', p' = Xp p'', a = (Omega q'' + i p'') / sqrt(2 hbar Omega)
    n = model.n_dof
    q_idx, p_idx, sign = _rotation(model)
    W = np.zeros((2 * n, omega.size), dtype=complex)
    W[q_idx] = Xq / (np.sqrt(2.0) * omega[None, :])
    W[p_idx] = -1j * Xp / np.sqrt(2.0)
    W *= sign[:, None]
    return NormalModeDecomposition(omega, W, sym, "rotated-cholesky", model)


def _normal_modes_generic(model):
    """Hermitian eigenproblem of i L^T J L with M_H = L L^T."""
    Md = model.M_H.toarray()
    J = model.symplectic_form().toarray()
    L = np.linalg.cholesky(Md)
    Hh = 1j * (L.T @ J @ L)
    lam, phi = scipy.linalg.eigh(Hh)
    pos = lam > 0
    omega, phi = lam[pos], phi[:, pos]
    # mode vector w solves J M w = -i Omega w; L^T w = phi
    W = scipy.linalg.solve_triangular(L.T, phi, lower=False)
    comm = HBAR * (W * omega) @ W.conj().T
    comm = comm - comm.conj()
    sym = float(np.max(np.abs(comm - 1j * HBAR * J)) / HBAR)
    return NormalModeDecomposition(omega, W, sym, "generic-symplectic", model)


def normal_modes(model, method="auto"):
    """Normal modes of a positive-(semi)definite model.

    ``method``: "rotated" (default for any size), "generic" (dense J M_H route,
    small models only) or "auto".  Degenerate frequencies are handled by the
    Hermitian eigensolvers, which return orthonormal bases inside each
    eigenspace.
    """
    if method == "auto":
        method = "rotated"
    if method == "rotated":
        return _normal_modes_rotated(model)
    if method == "generic":
        if model.zero_modes:
            raise StabilityError("generic route needs a strictly positive definite Hamiltonian")
        return _normal_modes_generic(model)
    raise ValueError(f"unknown method {method!r}")


def _field_rows(model, points):
    return model.index("Pi", np.atleast_1d(points))


def vacuum_correlation_discrete(decomposition, points):
    """Equal-time <0|E(x_p) E(x_q)|0> (symmetrised) from the mode map.

    E = -Pi / eps0 in this sector, and Pi = Pi~ / sqrt(h).
    """
    model = decomposition.model
    cov = decomposition.covariance(_field_rows(model, points))
    return cov / (EPS0 ** 2 * model.grid.h)


def spectral_weights(decomposition, points):
    """Per-mode contributions c_k(p, q) with <E_p E_q> = sum_k c_k(p, q).

    Returns (Omega, c) with c of shape (K, P, P).
    """
    model = decomposition.model
    W = decomposition.amplitudes[_field_rows(model, points)]
    c = HBAR * decomposition.omega[:, None, None] * np.real(
        W.T[:, :, None] * W.conj().T[:, None, :])
    return decomposition.omega, c / (EPS0 ** 2 * model.grid.h)


def lorentzian_window_weights(omega_modes, grid_omega, grid_weights, window, eta):
    """int W(w) [L_eta(w - Omega) - L_eta(w + Omega)] dw on a quadrature grid, per mode."""
    d1 = grid_omega[None, :] - omega_modes[:, None]
    d2 = grid_omega[None, :] + omega_modes[:, None]
    L = (eta / np.pi) * (1.0 / (d1 ** 2 + eta ** 2) - 1.0 / (d2 ** 2 + eta ** 2))
    return L @ (window(grid_omega) * grid_weights)


def smoothed_vacuum_correlation(decomposition, points, window, eta, grid_omega, grid_weights):
    """Equal-time <E E> with each mode line broadened to a Lorentzian and windowed."""
    omega, c = spectral_weights(decomposition, points)
    k = lorentzian_window_weights(omega, grid_omega, grid_weights, window, eta)
    return np.einsum("kpq,k->pq", c, k)


def drive_vector(model, j):
    """Source term of the momentum equation dPi/dt = ... + j (coupling -int j A)."""
    f = np.zeros(2 * model.n_dof, dtype=complex)
    f[model.index("Pi", np.arange(model.n_points))] = np.sqrt(model.grid.h) * np.asarray(j)
    return f


def classical_response(model, omega, j):
    """Steady-state E(x) for a drive j(x) e^{-i z t}, z = ``omega`` (may be complex).

    Solves (J M_H + i z) Z = -f for the phase-space amplitude Z and returns
    E = -Pi / eps0 on the grid.

    Raises
    ------
    SingularityError
        If the linear system is singular (drive on an undamped resonance).
    """
    J = model.symplectic_form()
    A = (J @ model.M_H + 1j * omega * sp.identity(2 * model.n_dof)).tocsc()
    f = drive_vector(model, j)
    with warnings.catch_warnings():
        warnings.simplefilter("error", spla.MatrixRankWarning)
        try:
            Z = spla.spsolve(A, -f)
        except (spla.MatrixRankWarning, RuntimeError) as exc:
            raise SingularityError(f"driven system singular at omega={omega}",
                                   location=(None, complex(omega))) from exc
    if not np.all(np.isfinite(Z)):
        raise SingularityError(f"driven system singular at omega={omega}",
                               location=(None, complex(omega)))
    resid = np.linalg.norm(A @ Z + f) / max(np.linalg.norm(f), 1e-300)
    if resid > 1e-6:
        raise SingularityError(f"driven system ill-conditioned at omega={omega} "
                               f"(relative residual {resid:.2e})", location=(None, complex(omega)))
    Pi = Z[model.index("Pi", np.arange(model.n_points))] / np.sqrt(model.grid.h)
    return -Pi / EPS0


def propagate(model, z0, times):
    """Exact classical evolution z(t) = exp(t J M_H) z0 at the requested times."""
    gen = (model.symplectic_form() @ model.M_H).tocsc()
    times = np.asarray(times, dtype=float)
    return spla.expm_multiply(gen, np.asarray(z0, dtype=float), start=times[0], stop=times[-1],
                              num=times.size, endpoint=True)


def effective_susceptibility(model, z):
    """chi(x, z) of the finite bath, per grid point."""
    wm, vbar = model.bath_omega, model.vbar
    rho = model.rho
    sigma = (vbar ** 2 * wm[None, :] ** 2) @ (1.0 / (z ** 2 - wm ** 2))
    out = np.zeros(model.n_points, dtype=complex)
    m = model.alpha > 0
    out[m] = -(model.alpha[m] ** 2 / (EPS0 * rho[m])) / (
        z ** 2 - model.omega0[m] ** 2 - sigma[m] / rho[m] ** 2)
    return out
