import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fanodiag.errors import LosslessPointError
from fanodiag.greenfn import DielectricResponse, green_fd
from fanodiag.material import (BathModel, FrequencyMesh, Grid1D,
                               MaterialProfile, compute_chi,
                               drude_lorentz_setup, sine_band_coupling)
from fanodiag.modes import (Kernel, build_all_coefficients, build_fE,
                            build_mode_set, build_s, cc_commutator_residual,
                            commutation_residual, double_curl_integral,
                            eigen_residuals, structural_residuals)
from fanodiag.units import HBAR


def sine_band_setup(n=321, half=16.0):
    """Lossy core between lossy claddings, with a smooth tabulated bath (PV path)."""
    g = Grid1D(-half, half, n)
    core = np.abs(g.x) <= 2
    prof = MaterialProfile(g, 1.0, np.where(core, 1.2, 0.9), np.where(core, 1.0, 2.5))
    mesh = FrequencyMesh.uniform(0.01, 4.0, 400)
    v = np.where(core[:, None], sine_band_coupling(mesh, 0.4, 4.0)[None, :],
                 sine_band_coupling(mesh, 1.6, 4.0)[None, :])
    return g, prof, mesh, BathModel.tabulated(mesh, v)


def mode_set_at(g, prof, mesh, bath, j):
    w = mesh.omega[j]
    chi = compute_chi(prof, bath, mesh, [w]).chi[:, 0]
    G = green_fd(DielectricResponse(g, w, 1 + chi))
    return build_mode_set(G, chi, bath, prof, mesh)


@pytest.fixture(scope="module")
def sine_sets():
    g, prof, mesh, bath = sine_band_setup()
    return g, prof, mesh, bath, [mode_set_at(g, prof, mesh, bath, j) for j in (119, 179)]


def test_kernel_matrix_form():
    k = Kernel(np.array([1.0, 2.0]), np.ones((2, 2)))
    assert np.allclose(k.matrix(0.5), [[3.0, 1.0], [1.0, 5.0]])
    assert np.allclose((k - k).matrix(0.5), 0)
    assert np.allclose(k.scaled(2.0).local, [2.0, 4.0])


def test_s_tensor_modulus_and_phase():
    g = Grid1D(0, 1, 3)
    prof = MaterialProfile(g, [1.0, 2.0, 3.0], 1.0, 1.0)
    chi = np.array([1 + 1j, -0.5 + 0.1j, 2j])
    s = build_s(prof, chi, 1.3)
    assert np.allclose(np.abs(s.values) ** 2 / prof.rho, HBAR * 1.3 / 2, rtol=1e-15)
    assert np.allclose(s.phase, 1j * chi.conj() / np.abs(chi))
    assert s.unitarity_residual(prof) < 1e-15


def test_s_tensor_rejects_requested_vacuum_point():
    g = Grid1D(0, 1, 3)
    prof = MaterialProfile(g, 1.0, 1.0, [1.0, 0.0, 1.0])
    chi = np.array([0.2 + 0.1j, 0.0, 0.3 + 0.2j])
    build_s(prof, chi, 1.0)                       # unrequested zero is fine
    with pytest.raises(LosslessPointError):
        build_s(prof, chi, 1.0, points=[1])


def test_fE_rejects_vacuum_label():
    g = Grid1D(-3, 3, 61)
    prof, bath = drude_lorentz_setup(g, np.where(np.abs(g.x) < 1, 1.0, 0.0), 1.0,
                                     np.where(np.abs(g.x) < 1, 0.3, 0.0))
    mesh = FrequencyMesh.uniform(0.1, 2.0, 20)
    w = mesh.omega[5]
    chi = compute_chi(prof, bath, mesh, [w]).chi[:, 0]
    G = green_fd(DielectricResponse(g, w, 1 + chi))
    s = build_s(prof, chi, w)
    with pytest.raises(LosslessPointError):
        build_fE(G, chi, bath, s, prof, w, labels=[0])
    fE = build_fE(G, chi, bath, s, prof, w)
    assert np.all(fE.dense[:, np.abs(g.x) >= 1] == 0)


def test_mode_frequency_must_be_a_mesh_node():
    g, prof, mesh, bath = sine_band_setup(41, 4.0)
    w = 0.5 * (mesh.omega[10] + mesh.omega[11])
    chi = compute_chi(prof, bath, mesh, [w]).chi[:, 0]
    G = green_fd(DielectricResponse(g, w, 1 + chi))
    s = build_s(prof, chi, w)
    fE = build_fE(G, chi, bath, s, prof, w)
    with pytest.raises(ValueError, match="mesh"):
        build_all_coefficients(fE, chi, bath, s, prof, w, mesh, G)


def test_relations_with_principal_value_bath(sine_sets):
    _, prof, _, _, sets = sine_sets
    for cs in sets:
        r = eigen_residuals(cs, prof)
        assert r["field_momentum"].relative < 1e-14
        assert r["polarization"].relative < 1e-13
        assert r["wave"].relative < 1e-12
        # the quadrature relation recombines the PV self-energy term by term
        assert r["polarization_momentum"].relative < 1e-6
        assert r["bath_coordinate"].relative < 1e-13
        assert r["bath_momentum"].relative < 1e-13
        assert all(v.relative < 1e-14 for v in structural_residuals(cs).values())


def test_commutators_with_principal_value_bath(sine_sets):
    g, prof, _, _, (c1, c2) = sine_sets
    core = np.flatnonzero(np.abs(g.x) <= 2)
    rep = commutation_residual(c1, c2, prof, core)
    assert rep.s_condition < 1e-15
    assert rep.offdiagonal_relative < 1e-5
    r, s = cc_commutator_residual(c1, c2, core)
    assert r / s < 1e-5


def test_commutator_residual_tracks_cladding_leakage():
    # a thin cladding lets the fields reach the open ends; the leak shows up
    # as a double-curl surface term and spoils the commutator
    g, prof, mesh, bath = sine_band_setup(161, 8.0)
    c1, c2 = (mode_set_at(g, prof, mesh, bath, j) for j in (119, 179))
    rep = commutation_residual(c1, c2, prof, np.flatnonzero(np.abs(g.x) <= 2))
    assert rep.double_curl / rep.double_curl_scale > 1e-3
    assert rep.offdiagonal_relative > 1e-4


def test_commutator_needs_distinct_frequencies(sine_sets):
    _, prof, _, _, (c1, _) = sine_sets
    with pytest.raises(ValueError):
        commutation_residual(c1, c1, prof)


def test_double_curl_is_a_boundary_term():
    # without absorbing cladding the partial-integration term does not vanish
    g = Grid1D(-4, 4, 161)
    core = np.abs(g.x) <= 1
    prof, bath = drude_lorentz_setup(g, np.where(core, 1.0, 0.0), 1.3, np.where(core, 0.2, 0.0))
    mesh = FrequencyMesh.uniform(0.01, 4.0, 400)
    c1 = mode_set_at(g, prof, mesh, bath, 99)
    c2 = mode_set_at(g, prof, mesh, bath, 149)
    dc, scale = double_curl_integral(c1, c2, np.flatnonzero(core))
    assert dc / scale > 1e-3


@pytest.mark.filterwarnings("ignore::fanodiag.errors.ResolutionWarning")
@settings(max_examples=10, deadline=None)
@given(j=st.integers(20, 380), w0=st.floats(0.5, 2.0), gamma=st.floats(0.05, 1.0))
def test_structural_relations_property(j, w0, gamma):
    g = Grid1D(-3, 3, 41)
    prof, bath = drude_lorentz_setup(g, 1.0, w0, gamma)
    mesh = FrequencyMesh.uniform(0.01, 4.0, 400)
    cs = mode_set_at(g, prof, mesh, bath, j)
    assert all(v.relative < 1e-14 for v in structural_residuals(cs).values())
    assert cs.s.unitarity_residual(prof) < 1e-15
