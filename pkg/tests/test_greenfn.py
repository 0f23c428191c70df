import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from fanodiag.errors import ResolutionWarning, SingularityError
from fanodiag.greenfn import (DielectricResponse, LayerStack, green_fd,
                              green_fd_columns, green_homogeneous,
                              green_identity_residual, green_multilayer,
                              layer_green, wavenumber)
from fanodiag.material import Grid1D


def test_wavenumber_branch():
    k = wavenumber(np.array([2.0 + 0.5j, -1.0 + 0.01j, 1.0]), 1.5)
    assert np.all(k.imag >= 0)
    assert np.allclose(k ** 2, 1.5 ** 2 * np.array([2.0 + 0.5j, -1.0 + 0.01j, 1.0]))


def test_homogeneous_coincident_value():
    # G(x, x) = 1/(2ik) in vacuum: -i/(2w)
    assert green_homogeneous(1.0, 2.0, 0.0, 0.0) == pytest.approx(-0.25j)


def test_two_half_spaces_closed_form():
    # reflected-wave closed form for source and field on the left side
    e1, e2, w = 1.0, 4.0 + 0.2j, 1.1
    k1, k2 = wavenumber(np.array([e1, e2]), w)
    r = (k1 - k2) / (k1 + k2)
    x = np.linspace(-3, -0.1, 30)
    xp = -0.7
    expected = (np.exp(1j * k1 * np.abs(x - xp)) + r * np.exp(-1j * k1 * (x + xp))) / (2j * k1)
    G = layer_green(LayerStack([5.0, 5.0], [e1, e2], x0=-5.0), w, x, [xp])[:, 0]
    assert np.allclose(G, expected, rtol=1e-12, atol=0)


def test_transmitted_wave_decays():
    # in a homogeneous lossy medium |G(x, 0)| / |G(0, 0)| = exp(-Im k |x|)
    eps, w = 2.0 + 0.6j, 1.3
    k = wavenumber(eps, w)
    x = np.linspace(0, 6, 13)
    G = layer_green(LayerStack([1.0], [eps]), w, x, [0.0])[:, 0]
    assert np.allclose(np.abs(G / G[0]), np.exp(-k.imag * x), rtol=1e-12)


def test_interface_continuity():
    stack = LayerStack([2.0, 1.0, 2.0], [1.0, 6.0 + 0.3j, 2.0], x0=-3.0)
    w, xp = 0.9, -2.2
    for b in stack.interfaces:
        d = 1e-7
        gl, gr = layer_green(stack, w, [b - d, b + d], [xp])[:, 0]
        assert abs(gl - gr) < 1e-5 * abs(gl)
        gl2, gr2 = layer_green(stack, w, [b - 2 * d, b + 2 * d], [xp])[:, 0]
        dl, dr = (gl - gl2) / d, (gr2 - gr) / d
        assert abs(dl - dr) < 1e-4 * max(abs(dl), 1.0)


def test_fd_matches_transfer_matrix_on_layers():
    stack = LayerStack([4.0, 2.0, 4.0], [1.0, 3.0 + 0.4j, 1.5], x0=-5.0)
    errs = []
    for n in (201, 401):
        g = Grid1D(-5.0, 5.0, n)
        G_fd = green_fd(stack.response(g, 1.0)).G
        G_tm = green_multilayer(stack, 1.0, g).G
        errs.append(np.max(np.abs(G_fd - G_tm)))
    assert errs[1] < 0.3 * errs[0]
    assert errs[1] < 5e-3


def test_fd_columns_match_full_solve():
    g = Grid1D(-2, 2, 81)
    resp = DielectricResponse(g, 1.2, 1.0 + 0.5j * (np.abs(g.x) < 1))
    G = green_fd(resp).G
    cols = green_fd_columns(resp, [3, 40])
    assert np.allclose(cols, G[:, [3, 40]], rtol=1e-12, atol=1e-14)


def test_fd_green_identity_is_exact():
    g = Grid1D(-4, 4, 161)
    resp = DielectricResponse(g, 1.0, 1.0 + 0.3j * (np.abs(g.x) < 2) + 0.5 * (g.x > 1))
    rep = green_identity_residual(green_fd(resp), resp)
    assert rep.residual < 1e-12
    assert rep.regime == "mixed"


def test_green_identity_lossless_is_surface_dominated():
    g = Grid1D(-4, 4, 161)
    resp = DielectricResponse(g, 1.0, np.ones(g.n_points))
    rep = green_identity_residual(green_fd(resp), resp)
    assert rep.regime == "surface-dominated"
    assert rep.volume_residual > 0.5
    assert rep.residual < 1e-12


def test_transfer_matrix_identity_converges():
    stack = LayerStack([4.0, 4.0, 4.0], [1.0 + 2j, 2.0 + 0.1j, 1.0 + 2j], x0=-6.0)
    res = []
    for n in (121, 241):
        g = Grid1D(-6, 6, n)
        resp = stack.response(g, 1.0)
        res.append(green_identity_residual(green_multilayer(stack, 1.0, g), resp).residual)
    assert res[1] < 0.5 * res[0]


def test_under_resolved_grid_warns():
    g = Grid1D(0, 10, 21)
    with pytest.warns(ResolutionWarning):
        green_fd(DielectricResponse(g, 3.0, np.ones(21)))


def test_zero_permittivity_is_rejected():
    with pytest.raises(ValueError, match="degenerate"):
        layer_green(LayerStack([1.0, 1.0], [1.0, 0.0], x0=-1.0), 1.0, [0.0], [0.5])


def test_guided_mode_of_lossless_slab_is_singular():
    # eps = -1 | 4 | -1 slab of width 2: even bound mode where 2w tan(2w) = w
    w = brentq(lambda w: 2 * w * np.tan(2 * w) - w, 0.1, 0.7)
    stack = LayerStack([1.0, 2.0, 1.0], [-1.0, 4.0, -1.0], x0=-2.0)
    with pytest.raises(SingularityError) as info:
        layer_green(stack, w, [0.0], [0.3])
    assert info.value.location[1] == pytest.approx(w)
    # a little absorption removes the singularity
    lossy = LayerStack([1.0, 2.0, 1.0], [-1.0, 4.0 + 1e-3j, -1.0], x0=-2.0)
    assert np.isfinite(layer_green(lossy, w, [0.0], [0.3])).all()


def test_lossless_boundary_label():
    g = Grid1D(0, 1, 11)
    assert DielectricResponse(g, 1.0, np.ones(11)).boundary == "vacuum"
    assert DielectricResponse(g, 1.0, np.full(11, 1 + 1j)).boundary == "absorbing"


stacks = st.lists(st.tuples(st.floats(0.3, 3.0), st.floats(1.0, 8.0), st.floats(0.0, 1.0)),
                  min_size=1, max_size=5)


@settings(max_examples=40, deadline=None)
@given(layers=stacks, w=st.floats(0.2, 2.0))
def test_reciprocity_property(layers, w):
    d, er, ei = map(np.array, zip(*layers))
    stack = LayerStack(d, er + 1j * ei, x0=-1.0)
    x = np.linspace(-3, d.sum() + 1, 25)
    G = layer_green(stack, w, x, x)
    assert np.max(np.abs(G - G.T)) <= 1e-10 * np.max(np.abs(G))


@settings(max_examples=40, deadline=None)
@given(layers=stacks, w=st.floats(0.2, 2.0))
def test_passive_local_density_property(layers, w):
    # -Im G(x, x) >= 0 for a passive medium (power radiated by a point source)
    d, er, ei = map(np.array, zip(*layers))
    stack = LayerStack(d, er + 1j * ei, x0=-1.0)
    x = np.linspace(-3, d.sum() + 1, 25)
    diag = np.diag(layer_green(stack, w, x, x))
    assert np.all(-diag.imag >= -1e-12 * np.abs(diag))
