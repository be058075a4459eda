import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from capcav.errors import AmbiguousBracket, GeometryError, NoGuidedMode, TrialIndexError
from capcav.materials import SILICA, VACUUM, WATER, OpticalMaterial
from capcav.modes import (DEFAULT_TOL, LayeredFiberGeometry, dispersion_determinant, find_roots,
                          mode_field, neff_curve, neff_dispersion, solve_fundamental_mode)
from oracles import step_index_roots

LAM = 620.0
PAPER = LayeredFiberGeometry(125.0, 515.0, WATER, SILICA, VACUUM)


@pytest.fixture(scope="module")
def paper_mode():
    return solve_fundamental_mode(PAPER, LAM)


def test_two_layer_root_matches_oracle():
    geom = LayeredFiberGeometry(0.0, 515.0, SILICA, SILICA, VACUUM)
    oracle = step_index_roots(1.457, 1.0, 257.5, LAM)[0]
    assert solve_fundamental_mode(geom, LAM).n_eff == pytest.approx(oracle, abs=1e-6)


def test_determinant_changes_sign_at_oracle_root():
    geom = LayeredFiberGeometry(0.0, 515.0, SILICA, SILICA, VACUUM)
    root = step_index_roots(1.457, 1.0, 257.5, LAM)[0]
    below = dispersion_determinant(geom, LAM, root - 1e-6)
    above = dispersion_determinant(geom, LAM, root + 1e-6)
    assert np.sign(below) != np.sign(above)


def test_paper_geometry_single_root_in_range(paper_mode):
    roots = find_roots(PAPER, LAM)
    assert len(roots) == 1
    assert 1.0 < roots[0] < 1.457
    assert 1.15 < paper_mode.n_eff < 1.40


def test_paper_geometry_bragg_consistency(paper_mode):
    # 2 n 244 nm near 620 nm; the slat contrast supplies the remainder
    assert 2 * paper_mode.n_eff * 244.0 == pytest.approx(LAM, rel=0.02)


def test_beta_and_order(paper_mode):
    assert paper_mode.beta == 2 * math.pi * paper_mode.n_eff / (LAM * 1e-9)
    assert paper_mode.azimuthal_order == 1
    assert len(paper_mode.layer_coefficients) == 8


def test_below_cutoff():
    with pytest.raises(NoGuidedMode):
        solve_fundamental_mode(LayeredFiberGeometry(0.0, 10.0, WATER, SILICA, VACUUM), LAM)


def test_homogeneous_medium_guides_nothing():
    same = LayeredFiberGeometry(100.0, 500.0, SILICA, SILICA, SILICA)
    # the guidance interval (n_clad, n_max) is empty
    assert find_roots(same, LAM) == []
    with pytest.raises(NoGuidedMode):
        solve_fundamental_mode(same, LAM)
    with pytest.raises(TrialIndexError):
        dispersion_determinant(same, LAM, 1.457)


def test_homogeneous_trial_scan_has_no_sign_change():
    # any three equal-index layers: no sign change over a scan of trial values
    nearly = LayeredFiberGeometry(100.0, 500.0, OpticalMaterial("a", 1.3),
                                  OpticalMaterial("b", 1.3 + 1e-12), OpticalMaterial("c", 1.3))
    assert find_roots(nearly, LAM) == []


@pytest.mark.parametrize("trial", [1.0, 0.99, 1.46, 1.457])
def test_trial_outside_interval(trial):
    with pytest.raises(TrialIndexError):
        dispersion_determinant(PAPER, LAM, trial)


def test_trial_on_layer_index():
    with pytest.raises(TrialIndexError):
        dispersion_determinant(PAPER, LAM, 1.333)


@pytest.mark.parametrize("d_in,d_out", [(515.0, 515.0), (600.0, 515.0), (-1.0, 515.0), (0.0, 0.0)])
def test_invalid_geometry(d_in, d_out):
    with pytest.raises(GeometryError):
        LayeredFiberGeometry(d_in, d_out)


def test_ambiguous_bracket_with_coarse_step():
    thick = LayeredFiberGeometry(0.0, 2000.0, SILICA, SILICA, VACUUM)
    with pytest.raises(AmbiguousBracket, match="reduce step"):
        find_roots(thick, LAM, step=0.05)


def test_bisection_tolerance(paper_mode):
    d_lo = dispersion_determinant(PAPER, LAM, paper_mode.n_eff - DEFAULT_TOL)
    d_hi = dispersion_determinant(PAPER, LAM, paper_mode.n_eff + DEFAULT_TOL)
    assert np.sign(d_lo) != np.sign(d_hi)


def _tangential(vals):
    e_r, e_p, e_z, h_r, h_p, h_z = vals
    return np.array([e_p, e_z, h_p, h_z])


def _scale(mode, geom):
    # field magnitude scale for relative comparisons
    return max(np.max(np.abs(mode_field(mode, geom, r, 0.3))) for r in (0.0, 60.0, 200.0, 257.5))


@pytest.mark.parametrize("iface", ["inner", "outer"])
def test_tangential_continuity_at_interfaces(paper_mode, iface):
    r, inside, outside = (PAPER.d_in / 2, 0, 1) if iface == "inner" else (PAPER.d_out / 2, 1, 2)
    scale = _scale(paper_mode, PAPER)
    a = _tangential(mode_field(paper_mode, PAPER, r, 0.3, layer=inside))
    b = _tangential(mode_field(paper_mode, PAPER, r, 0.3, layer=outside))
    assert np.max(np.abs(a - b)) / scale < 1e-6


def test_continuity_offsets_vanish_linearly(paper_mode):
    # mismatch at r0 +/- eps is the field slope times 2 eps; extrapolating eps -> 0 leaves nothing
    r0 = PAPER.d_out / 2
    scale = _scale(paper_mode, PAPER)

    def gap(eps):
        a = _tangential(mode_field(paper_mode, PAPER, r0 - eps, 0.3))
        b = _tangential(mode_field(paper_mode, PAPER, r0 + eps, 0.3))
        return (b - a) / scale

    g1, g2 = gap(1e-3), gap(2e-3)
    assert np.max(np.abs(2 * g1 - g2)) < 1e-6
    assert np.max(np.abs(g1)) < 1e-4


def test_normal_e_jumps_by_permittivity_ratio(paper_mode):
    r0 = PAPER.d_out / 2
    e_in = mode_field(paper_mode, PAPER, r0, 0.0, layer=1)[0]
    e_out = mode_field(paper_mode, PAPER, r0, 0.0, layer=2)[0]
    assert e_out / e_in == pytest.approx(1.457**2, rel=1e-6)


def test_evanescent_decay(paper_mode):
    far = np.abs(mode_field(paper_mode, PAPER, 20000.0, 0.0))
    near = np.abs(mode_field(paper_mode, PAPER, 258.0, 0.0))
    assert np.max(far) < 1e-12 * np.max(near)
    mags = [np.max(np.abs(mode_field(paper_mode, PAPER, r, 0.0))) for r in (400, 800, 1600, 3200)]
    assert all(b < a for a, b in zip(mags, mags[1:]))


def test_power_normalisation_by_independent_quadrature(paper_mode):
    # Sz = 1/2 Re(E_r H_phi* - E_phi H_r*), integrated over 2 pi and r dr
    edges = [(0.0, 62.5, 0), (62.5, 257.5, 1), (257.5, 6000.0, 2)]
    total = 0.0
    for a, b, layer in edges:
        r = np.linspace(a, b, 4001) if layer < 2 else np.geomspace(1.0, b - a + 1.0, 8001) + a - 1.0
        f = np.array([mode_field(paper_mode, PAPER, x, 0.0, layer=layer) for x in r])
        sz = 0.5 * np.real(f[:, 0] * np.conj(f[:, 4]) - f[:, 1] * np.conj(f[:, 3]))
        total += 2 * np.pi * np.trapezoid(sz * r, r) * 1e-18
    assert total == pytest.approx(1.0, abs=1e-4)


def test_negative_radius():
    mode = solve_fundamental_mode(LayeredFiberGeometry(0.0, 515.0, SILICA, SILICA, VACUUM), LAM)
    with pytest.raises(ValueError):
        mode_field(mode, PAPER, -1.0)


@settings(max_examples=8, deadline=None)
@given(d_in=st.floats(0.0, 300.0), extra=st.floats(250.0, 500.0), lam=st.floats(560.0, 680.0))
def test_neff_strictly_inside_guidance_interval(d_in, extra, lam):
    geom = LayeredFiberGeometry(d_in, d_in + extra, WATER, SILICA, VACUUM)
    try:
        mode = solve_fundamental_mode(geom, lam)
    except NoGuidedMode:
        return
    assert 1.0 < mode.n_eff < 1.457


def test_neff_curve_d_in_decreasing_and_thread_determinism():
    sweep = [(d, 530.0) for d in range(100, 151, 10)]
    one = neff_curve(PAPER, sweep, LAM, jobs=1)
    many = neff_curve(PAPER, sweep, LAM, jobs=4)
    assert one.decreasing and not one.increasing
    assert [p.n_eff for p in one.points] == [p.n_eff for p in many.points]
    assert [(p.d_in, p.d_out) for p in one.points] == sweep


def test_neff_curve_d_out_increasing():
    sweep = [(125.0, d) for d in range(505, 541, 7)]
    assert neff_curve(PAPER, sweep, LAM).increasing


def test_neff_curve_empty_and_per_point_errors():
    assert neff_curve(PAPER, [], LAM).points == ()
    curve = neff_curve(PAPER, [(125.0, 515.0), (0.0, 10.0), (600.0, 515.0)], LAM)
    assert not math.isnan(curve.points[0].n_eff)
    assert "NoGuidedMode" in curve.points[1].error
    assert "GeometryError" in curve.points[2].error


def test_dispersion_interpolant_matches_direct_solve():
    lam = 617.3
    fn = neff_dispersion(PAPER, 590.0, 650.0)
    assert float(fn(lam)) == pytest.approx(solve_fundamental_mode(PAPER, lam).n_eff, abs=1e-6)
    # normal waveguide dispersion: n_eff falls with wavelength
    assert float(fn(600.0)) > float(fn(640.0))


@pytest.mark.parametrize("d_in", [5e-324, 1e-300, 1e-9])
def test_vanishing_core_matches_solid_rod(d_in):
    solid = solve_fundamental_mode(LayeredFiberGeometry(0.0, 250.0, WATER, SILICA, VACUUM), 560.0).n_eff
    tiny = solve_fundamental_mode(LayeredFiberGeometry(d_in, 250.0, WATER, SILICA, VACUUM), 560.0).n_eff
    assert tiny == pytest.approx(solid, abs=1e-9)
