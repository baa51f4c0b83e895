import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specenc import norms, quadrature
from specenc.core import Grid, PotentialSpec
from specenc.enclosure import random_corpus
from specenc.norms import NormRequest

UNIT_CUBE = PotentialSpec.square_well(3, 1.0, 0.5, center=(0.5, 0.5, 0.5))
CENTRED_CUBE = PotentialSpec.square_well(3, 1.0, 0.5)


def test_ks_of_dyadic_unit_cube_is_its_pair_integral():
    # the cube itself is the extremal dyadic cube: KS_2 = int int |x-y|^{-1}
    exact = quadrature.power_pair_integral(2.0, (1.0, 1.0, 1.0))
    errs = [abs(norms.ks_norm(UNIT_CUBE, 2.0, level=lv).value / exact - 1) for lv in (3, 4)]
    assert errs[1] < errs[0] < 2e-3


def test_ks_1d_interval_closed_form():
    V = PotentialSpec.square_well(1, 1.0, 0.5, center=(0.5,))
    exact = 2.0 / (0.5 * 1.5)
    assert norms.ks_norm(V, 0.5).value == pytest.approx(exact, rel=0.02)


def test_ks_witness_is_unit_cube():
    res = norms.ks_norm(UNIT_CUBE, 2.0, level=3)
    assert res.witness["k"] == 0 and tuple(res.witness["m"]) == (0, 0, 0)


@pytest.mark.parametrize("alpha", [1.5, 2.0])
@pytest.mark.parametrize("t", [2.0, 4.0])
def test_ks_scaling(alpha, t):
    V = PotentialSpec.gaussian(3, 1.0, 0.5)
    base = norms.ks_norm(V, alpha, level=4).value
    val = norms.ks_norm(V.dilate(t), alpha, level=4).value
    assert val == pytest.approx(base * t**-alpha, rel=0.01)


@given(st.floats(0.1, 10.0), st.floats(0.5, 3.0), st.floats(-3.0, 3.0))
@settings(max_examples=15, deadline=None)
def test_ks_homogeneity(c, beta, angle):
    V = PotentialSpec.gaussian(2, 1.0, 0.6)
    base = norms.ks_norm(V, 1.5, beta=beta, level=3).value
    val = norms.ks_norm(V.scale(c * np.exp(1j * angle)), 1.5, beta=beta, level=3).value
    assert val == pytest.approx(c**beta * base, rel=1e-10)


def test_ks_depth_monotone():
    V = PotentialSpec.gaussian(3, 1.0, 0.5)
    narrow = norms.ks_norm(V, 2.0, depth=(-1, 2), level=4).value
    wide = norms.ks_norm(V, 2.0, depth=(-4, 4), level=4).value
    assert wide >= narrow


def test_ks_trace_is_running_sup():
    tr = norms.ks_norm(CENTRED_CUBE, 2.0, level=4).trace
    assert all(b >= a for a, b in zip(tr, tr[1:]))


def test_kato_of_cube_at_centre():
    exact = quadrature.power_center_integral(2.0, (0.5, 0.5, 0.5))
    val = norms.aux_norm(CENTRED_CUBE, NormRequest("Kato")).value
    assert val == pytest.approx(exact, rel=0.01)


def test_rollnik_of_cube():
    exact = quadrature.power_pair_integral(1.0, (1.0, 1.0, 1.0))
    coarse = norms.aux_norm(CENTRED_CUBE, NormRequest("Rollnik", level=4)).value
    fine = norms.aux_norm(CENTRED_CUBE, NormRequest("Rollnik", level=5)).value
    assert abs(fine - exact) < abs(coarse - exact)
    assert fine == pytest.approx(exact, rel=0.02)


def test_rollnik_needs_3d():
    with pytest.raises(ValueError):
        norms.aux_norm(PotentialSpec.gaussian(2, 1.0, 1.0), NormRequest("Rollnik"))


def test_lp_exact_for_cube():
    V = PotentialSpec.square_well(3, -2.0 + 1j, 0.5)
    val = norms.aux_norm(V, NormRequest("Lp", p=2.0)).value
    assert val == pytest.approx(abs(-2 + 1j), rel=1e-12)


def test_mc_critical_exponent_matches_lp():
    # at p = d / alpha the Morrey-Campanato norm dominates and approaches ||V||_p
    mc = norms.aux_norm(CENTRED_CUBE, NormRequest("MC", alpha=1.5, p=2.0)).value
    lp = norms.aux_norm(CENTRED_CUBE, NormRequest("Lp", p=2.0)).value
    assert mc == pytest.approx(lp, rel=1e-6)


def test_mc_range_check():
    with pytest.raises(ValueError):
        norms.aux_norm(CENTRED_CUBE, NormRequest("MC", alpha=1.5, p=2.5))


def test_request_validation():
    with pytest.raises(ValueError):
        NormRequest("KS")
    with pytest.raises(ValueError):
        NormRequest("Lp")
    with pytest.raises(ValueError):
        NormRequest("Sobolev", alpha=1.0)
    with pytest.raises(ValueError):
        NormRequest("KS", alpha=2.0, beta=0.0)


def test_ks_below_kato_on_corpus():
    worst = 0.0
    for W in random_corpus(10, 3, seed=4):
        ks = norms.ks_norm(W, 2.0).value
        kato = norms.aux_norm(W, NormRequest("Kato")).value
        worst = max(worst, ks / kato)
    assert worst <= 1.02


def test_dyadic_grid_dilates_exactly():
    V = PotentialSpec.gaussian(3, 1.0, 0.5)
    g1 = norms.dyadic_grid(V, 4)
    g2 = norms.dyadic_grid(V.dilate(0.5), 4)
    assert g2.shape == g1.shape
    assert np.allclose(np.array(g2.lo), 2 * np.array(g1.lo))


def test_riesz_lemma_ratio_bounded():
    grid = Grid.cubic((-1.0, -1.0), 1 / 8, (16, 16))
    x = grid.nodes
    w = np.exp(-4 * np.sum(x**2, axis=1)).reshape(grid.shape)
    ratio = norms.ks_lemma_ratio(w, grid, 1.5)
    assert 0 < ratio < 10


def test_zero_weight_rejected():
    grid = Grid.cubic((0.0,), 0.1, (8,))
    with pytest.raises(norms.ZeroPotentialError):
        norms.ks_lemma_ratio(np.zeros(8), grid, 0.5)
