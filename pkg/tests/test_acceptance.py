"""Acceptance suite: one test (or a few) per criterion, at the stated tolerances.

``conftest.py`` prints one PASS/FAIL line per criterion at the end of the run.
"""

import warnings

import numpy as np
import pytest
from scipy.special import erfc

from fanodiag import crosscheck
from fanodiag.fields import (equal_time_commutator_residual, green_sweep,
                             hermiticity_residual, kernel_route_residual,
                             positivity_residual, vacuum_correlation_E)
from fanodiag.greenfn import (DielectricResponse, LayerStack, green_fd,
                              green_homogeneous, green_identity_residual,
                              green_multilayer, layer_green)
from fanodiag.material import (BathModel, FrequencyMesh, Grid1D,
                               MaterialProfile, compute_chi,
                               drude_lorentz_setup, kramers_kronig_residual,
                               lorentz_chi, recover_coupling,
                               sine_band_coupling)
from fanodiag.modes import (build_mode_set, commutation_residual,
                            eigen_residuals, structural_residuals)
from fanodiag.oracle import (assemble_hamiltonian, classical_response,
                             normal_modes, smoothed_vacuum_correlation)

criterion = pytest.mark.criterion


def cladded_stack(n_points=401):
    """Weak core |x| < 2 between strongly absorbing claddings on [-10, 10]."""
    g = Grid1D(-10.0, 10.0, n_points)
    core = np.abs(g.x) <= 2
    prof, bath = drude_lorentz_setup(g, np.where(core, 1.0, 3.0), np.where(core, 1.3, 1.0),
                                     np.where(core, 0.2, 2.0))
    return g, prof, bath


@pytest.fixture(scope="module")
def cladded_modes():
    g, prof, bath = cladded_stack()
    mesh = FrequencyMesh.uniform(0.01, 4.0, 400)
    out = []
    for j in (99, 149):                       # w = 1.0 and 1.5
        w = mesh.omega[j]
        chi = compute_chi(prof, bath, mesh, [w]).chi[:, 0]
        G = green_fd(DielectricResponse(g, w, 1 + chi))
        out.append((G, chi, build_mode_set(G, chi, bath, prof, mesh)))
    return g, prof, mesh, out


# 1 -----------------------------------------------------------------------

@criterion(1, "lossless-limit susceptibility matches the Lorentz closed form (1e-12)")
def test_lossless_susceptibility(record_property):
    g = Grid1D(0.0, 4.0, 41)
    prof = MaterialProfile(g, 1.0 + 0.5 * np.sin(g.x), 1.0 + 0.1 * g.x, np.where(g.x < 3, 0.8, 0.0))
    mesh = FrequencyMesh.uniform(0.013, 3.0, 300)
    chi = compute_chi(prof, BathModel.none(g, mesh), mesh).chi
    ref = lorentz_chi(prof, mesh.omega)
    off = np.abs(mesh.omega[None, :] ** 2 - prof.omega0[:, None] ** 2) > 1e-3
    err = np.max(np.abs(chi - ref)[off] / np.maximum(np.abs(ref[off]), 1e-300))
    record_property("measured", f"rel {err:.1e}")
    assert err < 1e-12
    assert np.all(chi.imag == 0)


# 2 -----------------------------------------------------------------------

@criterion(2, "Kramers-Kronig residual of the Drude-Lorentz preset (< 1e-3)")
def test_kramers_kronig(record_property):
    g = Grid1D(0.0, 1.0, 3)
    prof, bath = drude_lorentz_setup(g, 1.0, 1.3, 0.2)
    mesh = FrequencyMesh.uniform(50.0 / 4000, 50.0, 4000)
    tab = compute_chi(prof, bath, mesh)
    with warnings.catch_warnings():
        warnings.simplefilter("error")         # the span must not trigger a truncation warning
        rep = kramers_kronig_residual(tab, 1)
    scale = np.max(np.abs(tab.chi[1]))
    record_property("measured", f"rel {rep.residual / scale:.1e}, tail bound {rep.tail_bound / scale:.1e}")
    assert rep.residual / scale < 1e-3
    assert rep.tail_bound / scale < 1e-4


# 3 -----------------------------------------------------------------------

@criterion(3, "coupling round trip v -> chi -> v (1e-6)")
def test_coupling_round_trip(record_property):
    g = Grid1D(0.0, 2.0, 5)
    prof = MaterialProfile(g, [1.0, 2.0, 0.7, 1.3, 1.0], [1.2, 0.8, 1.5, 1.0, 1.1], [1.0, 0.6, 1.4, 0.9, 0.5])
    mesh = FrequencyMesh.uniform(0.01, 3.0, 600)
    v = np.stack([sine_band_coupling(mesh, a, 3.0) for a in (0.3, 0.5, 0.2, 0.8, 0.4)])
    bath = BathModel.tabulated(mesh, v)
    tab = compute_chi(prof, bath, mesh)
    worst = 0.0
    for j in range(5, mesh.size - 5):
        back = recover_coupling(tab, prof, mesh.omega[j])
        worst = max(worst, float(np.max(np.abs(back - v[:, j]) / v[:, j])))
    record_property("measured", f"rel {worst:.1e}")
    assert worst < 1e-6


# 4 -----------------------------------------------------------------------

@criterion(4, "Green solvers: analytic vs transfer matrix, FD order, reciprocity")
def test_homogeneous_vs_transfer_matrix(record_property):
    x = np.linspace(-3, 3, 61)
    err = 0.0
    for eps, w in [(1.0, 1.0), (2.5 + 0.3j, 0.7), (1.2 + 1e-3j, 2.2)]:
        stack = LayerStack([1.0, 2.0, 1.5], [eps] * 3, x0=-1.0)
        G_tm = layer_green(stack, w, x, x)
        G_an = green_homogeneous(eps, w, x, x)
        err = max(err, float(np.max(np.abs(G_tm - G_an)) / np.max(np.abs(G_an))))
    record_property("measured", f"analytic vs TM {err:.1e}")
    assert err < 1e-12


@criterion(4, "Green solvers: analytic vs transfer matrix, FD order, reciprocity")
def test_fd_convergence_order(record_property):
    w = 1.0
    errs = []
    for n in (101, 201, 401):
        g = Grid1D(-5.0, 5.0, n)
        G = green_fd(DielectricResponse(g, w, np.ones(n))).G
        ref = green_homogeneous(1.0, w, g.x, g.x)
        errs.append(np.max(np.abs(G - ref)))
    order = np.log2(errs[1] / errs[2])
    record_property("measured", f"FD order {order:.3f}")
    assert abs(order - 2.0) <= 0.1


@criterion(4, "Green solvers: analytic vs transfer matrix, FD order, reciprocity")
def test_transfer_matrix_reciprocity(record_property):
    stack = LayerStack([1.0, 0.7, 1.3, 2.0, 1.0], [1.0, 4.0 + 0.5j, 2.2, 9.0 + 0.1j, 1.5], x0=-2.0)
    x = np.linspace(-4, 5, 181)
    G = layer_green(stack, 1.3, x, x)
    res = float(np.max(np.abs(G - G.T)) / np.max(np.abs(G)))
    record_property("measured", f"reciprocity {res:.1e}")
    assert res < 1e-10


# 5 -----------------------------------------------------------------------

@criterion(5, "Green identity on absorbing cladding (volume < 1e-6, flux < 1e-8)")
def test_green_identity_absorbing_cladding(cladded_modes, record_property):
    g, prof, mesh, sets = cladded_modes
    core = np.flatnonzero(np.abs(g.x) <= 2)
    worst_vol = worst_flux = 0.0
    for G, chi, _ in sets:
        rep = green_identity_residual(G, DielectricResponse(g, G.omega, 1 + chi), core)
        worst_vol = max(worst_vol, rep.volume_residual)
        worst_flux = max(worst_flux, rep.flux_relative)
    record_property("measured", f"volume {worst_vol:.1e}, flux {worst_flux:.1e}")
    assert worst_vol < 1e-6
    assert worst_flux < 1e-8


# 6 -----------------------------------------------------------------------

@criterion(6, "eigenoperator relations: exact 1e-14, quadrature 1e-6, differential O(h^2)")
def test_eigen_relations_exact_and_quadrature(cladded_modes, record_property):
    g, prof, mesh, sets = cladded_modes
    exact = quad = 0.0
    for _, _, cs in sets:
        r = eigen_residuals(cs, prof)
        r.update(structural_residuals(cs))
        for name in ("field_momentum", "vector_potential", "field_momentum_from_E", "bath_momentum_from_Y"):
            exact = max(exact, r[name].relative)
        quad = max(quad, r["polarization_momentum"].relative, r["polarization"].relative,
                   r["bath_coordinate"].relative, r["bath_momentum"].relative)
    record_property("measured", f"exact {exact:.1e}, quadrature {quad:.1e}")
    assert exact < 1e-14
    assert quad < 1e-6


@criterion(6, "eigenoperator relations: exact 1e-14, quadrature 1e-6, differential O(h^2)")
def test_differential_relation_order(record_property):
    mesh = FrequencyMesh.uniform(0.01, 4.0, 400)
    w = mesh.omega[99]
    res, hs = [], []
    for n in (101, 201, 401):
        g, prof, bath = cladded_stack(n)
        chi = compute_chi(prof, bath, mesh, [w]).chi[:, 0]
        stack = LayerStack([8.0, 4.0, 8.0], [1 + chi[0], 1 + chi[n // 2], 1 + chi[-1]], x0=-10.0)
        G = green_multilayer(stack, w, g)
        cs = build_mode_set(G, chi, bath, prof, mesh)
        rows = np.flatnonzero(np.abs(np.abs(g.x) - 2.0) > 1e-9)[1:-1]
        res.append(eigen_residuals(cs, prof, rows=rows)["wave"].relative)
        hs.append(g.h)
    order = np.log(res[1] / res[2]) / np.log(hs[1] / hs[2])
    record_property("measured", f"differential residual {res[-1]:.1e}, order {order:.2f}")
    assert 1.85 <= order <= 2.15
    assert res[-1] < 1e-2


# 7 -----------------------------------------------------------------------

@criterion(7, "commutation: diagonal exact 1e-15, off-diagonal < 1e-6")
def test_commutation(cladded_modes, record_property):
    g, prof, mesh, sets = cladded_modes
    core = np.flatnonzero(np.abs(g.x) <= 2)
    c1, c2 = sets[0][2], sets[1][2]
    rep = commutation_residual(c1, c2, prof, core)
    record_property("measured", f"diagonal {rep.s_condition:.1e}, off-diagonal {rep.offdiagonal_relative:.1e}")
    assert rep.s_condition <= 1e-15
    assert rep.offdiagonal_relative < 1e-6


# 8 -----------------------------------------------------------------------

@criterion(8, "route equivalence of f_E (1e-10)")
def test_route_equivalence(cladded_modes, record_property):
    g, prof, mesh, sets = cladded_modes
    worst = max(kernel_route_residual(cs.fE, G, chi, cs.omega, cs.labels) for G, chi, cs in sets)
    record_property("measured", f"rel {worst:.1e}")
    assert worst < 1e-10


# 9 -----------------------------------------------------------------------

def flat_bath_model(N, M, half_width, top=3.0, v2=0.2):
    g = Grid1D(-half_width, half_width, N)
    prof = MaterialProfile.uniform(g, 1.0, 1.0, 1.0)
    d = top / M
    mesh = FrequencyMesh(d * np.arange(1, M + 1), np.full(M, d))
    v = np.full((N, M), np.sqrt(v2))
    return g, prof, mesh, BathModel.tabulated(mesh, v), assemble_hamiltonian(prof, mesh.omega, mesh.weights, v)


@criterion(9, "oracle: driven response (1%) and smoothed vacuum <EE> (5%)")
def test_oracle_driven_response(record_property):
    g, prof, mesh, bath, model = flat_bath_model(200, 60, 10.0)
    eta = 3 * mesh.weights[0]
    src = g.n_points // 2
    j = np.zeros(g.n_points)
    j[src] = 1.0 / g.h
    near = np.abs(g.x - g.x[src]) <= 3.0
    worst = 0.0
    for w in (0.3, 0.9, 1.3):
        z = w + 1j * eta
        E = classical_response(model, z, j)
        chi = compute_chi(prof, bath, mesh, [z]).chi[0, 0]
        Ec = crosscheck.driven_field(LayerStack([1.0], [1 + chi]), z, g.x, g.x[src])
        worst = max(worst, float(np.max(np.abs(E - Ec)[near]) / np.max(np.abs(Ec[near]))))
    record_property("measured", f"response {worst:.2%}")
    assert worst < 0.01


@criterion(9, "oracle: driven response (1%) and smoothed vacuum <EE> (5%)")
def test_oracle_vacuum_correlation(record_property):
    g, prof, mesh, bath, model = flat_bath_model(80, 40, 4.0)
    dec = normal_modes(model)
    eta = 3 * mesh.weights[0]
    wc = 2.0
    W = lambda w: 0.5 * erfc((w - wc) / 0.3)  # noqa: E731
    wg = np.linspace(1e-4, wc + 2.0, 4001)
    ww = np.full(wg.size, wg[1] - wg[0])
    ww[[0, -1]] *= 0.5
    pts = [39, 40, 43]
    disc = smoothed_vacuum_correlation(dec, pts, W, eta, wg, ww)
    z = wg + 1j * eta
    chi = compute_chi(prof, bath, mesh, z).chi[0]
    cont = crosscheck.smoothed_vacuum_correlation(lambda k: LayerStack([1.0], [1 + chi[k]]),
                                                  z, ww, W, g.x[pts])
    err = float(np.max(np.abs(disc - cont)) / np.max(np.abs(cont)))
    record_property("measured", f"vacuum {err:.2%}")
    assert err < 0.05


# 10 ----------------------------------------------------------------------

@pytest.fixture(scope="module")
def cladded_sweep():
    g, prof, bath = cladded_stack(400)
    mesh = FrequencyMesh.uniform(0.01, 3.0, 600)
    tab = compute_chi(prof, bath, mesh)
    pts = np.flatnonzero(np.abs(g.x) <= 2)[::10]
    window = lambda w: 0.25 * erfc((1.0 - w) / 0.1) * erfc((w - 2.0) / 0.1)  # noqa: E731
    return green_sweep(tab, mesh, pts), window


@criterion(10, "field diagnostics: [E,E] < 1e-6, hermiticity and positivity 1e-12")
def test_equal_time_commutator(cladded_sweep, record_property):
    sweep, window = cladded_sweep
    res = equal_time_commutator_residual(sweep, window=window)
    control = equal_time_commutator_residual(sweep, source_mask=sweep.grid.x < 0, window=window)
    record_property("measured", f"[E,E] {res:.1e} (broken-field control {control:.1e})")
    assert res < 1e-6
    assert control > 1e-2


@criterion(10, "field diagnostics: [E,E] < 1e-6, hermiticity and positivity 1e-12")
def test_correlator_hermiticity_positivity(cladded_sweep, record_property):
    sweep, window = cladded_sweep
    result = vacuum_correlation_E(sweep, tau=np.linspace(-3, 3, 7), window=window)
    herm = hermiticity_residual(result)
    pos = positivity_residual(result)
    record_property("measured", f"hermiticity {herm:.1e}, positivity {pos:.1e}")
    assert herm < 1e-12
    assert pos < 1e-12
