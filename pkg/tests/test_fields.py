import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import erfc

from fanodiag.errors import TruncationWarning
from fanodiag.fields import (dfield_kernel, efield_kernel,
                             equal_time_commutator_residual, green_sweep,
                             hermiticity_residual, kernel_route_residual,
                             positivity_residual, spectral_density_direct,
                             vacuum_correlation_E)
from fanodiag.greenfn import DielectricResponse, green_fd
from fanodiag.material import (FrequencyMesh, Grid1D, compute_chi,
                               drude_lorentz_setup)
from fanodiag.modes import NoiseAmplitude, build_mode_set


def band(lo, hi, width):
    def W(w):
        return 0.25 * erfc((lo - w) / width) * erfc((w - hi) / width)
    return W


def cladded(n=161, half=8.0):
    g = Grid1D(-half, half, n)
    core = np.abs(g.x) <= 1.5
    prof, bath = drude_lorentz_setup(g, np.where(core, 1.0, 3.0), np.where(core, 1.2, 1.0),
                                     np.where(core, 0.3, 2.0))
    return g, prof, bath


@pytest.fixture(scope="module")
def sweep():
    g, prof, bath = cladded()
    mesh = FrequencyMesh.uniform(0.01, 3.0, 300)
    table = compute_chi(prof, bath, mesh)
    pts = np.searchsorted(g.x, [-1.0, 0.0, 0.5])
    return green_sweep(table, mesh, pts)


def test_kernel_route_matches_mode_amplitude():
    g, prof, bath = cladded()
    mesh = FrequencyMesh.uniform(0.01, 3.0, 300)
    w = mesh.omega[99]
    chi = compute_chi(prof, bath, mesh, [w]).chi[:, 0]
    G = green_fd(DielectricResponse(g, w, 1 + chi))
    cs = build_mode_set(G, chi, bath, prof, mesh)
    assert kernel_route_residual(cs.fE, G, chi, w) < 1e-12


def test_displacement_kernel_local_part():
    # K_D - (1 + chi) K_E is the grid delta term i n / (w h)
    g, prof, bath = cladded(41, 4.0)
    mesh = FrequencyMesh.uniform(0.01, 3.0, 300)
    w = mesh.omega[80]
    chi = compute_chi(prof, bath, mesh, [w]).chi[:, 0]
    G = green_fd(DielectricResponse(g, w, 1 + chi))
    noise = NoiseAmplitude.from_chi(chi, w)
    KE = efield_kernel(G, noise, w).K
    KD = dfield_kernel(G, chi, noise, w).K
    diff = KD - (1 + chi)[:, None] * KE
    assert np.allclose(diff, np.diag(1j * noise.values / (w * g.h)), rtol=1e-13, atol=1e-15)


def test_correlation_routes_agree(sweep):
    res = vacuum_correlation_E(sweep, tau=[-1.0, 0.0, 1.0], window=band(1.0, 2.0, 0.1))
    assert res.route_agreement < 1e-6
    assert hermiticity_residual(res) < 1e-12
    assert positivity_residual(res) < 1e-12
    # equal-time autocorrelation is real and positive
    c0 = np.diagonal(res.identity[:, :, 1])
    assert np.all(c0.real > 0)
    assert np.max(np.abs(c0.imag)) < 1e-12 * np.max(c0.real)


def test_unwindowed_sweep_warns_about_cutoff(sweep):
    with pytest.warns(TruncationWarning):
        res = vacuum_correlation_E(sweep, tau=[0.0])
    assert res.tail_ratio > 1e-4


def test_commutator_and_broken_control(sweep):
    W = band(1.0, 2.0, 0.1)
    assert equal_time_commutator_residual(sweep, window=W) < 1e-6
    broken = equal_time_commutator_residual(sweep, source_mask=sweep.grid.x > 0, window=W)
    assert broken > 1e-2


def test_hermiticity_needs_symmetric_tau(sweep):
    res = vacuum_correlation_E(sweep, tau=[0.0, 1.0], window=band(1.0, 2.0, 0.1))
    with pytest.raises(ValueError):
        hermiticity_residual(res)
    res = vacuum_correlation_E(sweep, tau=[1.0], window=band(1.0, 2.0, 0.1))
    with pytest.raises(ValueError):
        positivity_residual(res)


def test_sweep_is_independent_of_thread_count():
    g, prof, bath = cladded(81, 6.0)
    mesh = FrequencyMesh.uniform(0.05, 2.0, 40)
    table = compute_chi(prof, bath, mesh)
    a = green_sweep(table, mesh, [10, 40], threads=1)
    b = green_sweep(table, mesh, [10, 40], threads=4)
    assert np.array_equal(a.rows, b.rows)


@pytest.mark.filterwarnings("ignore::fanodiag.errors.ResolutionWarning")
@settings(max_examples=20, deadline=None)
@given(loss=st.lists(st.floats(0.01, 1.0), min_size=21, max_size=21), k=st.integers(0, 29))
def test_direct_density_is_positive_semidefinite(loss, k):
    g = Grid1D(-2, 2, 21)
    prof, bath = drude_lorentz_setup(g, 1.0, 1.0, np.array(loss))
    mesh = FrequencyMesh.uniform(0.1, 1.5, 30)
    sw = green_sweep(compute_chi(prof, bath, mesh), mesh, [3, 10, 17])
    d = spectral_density_direct(sw)[k]
    assert np.allclose(d, d.conj().T, rtol=0, atol=1e-14 * np.max(np.abs(d)) + 1e-300)
    lam = np.linalg.eigvalsh(d)
    assert lam[0] >= -1e-12 * max(lam[-1], 1e-300)
