import csv
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import helpers
from capcav import grating as gr
from capcav.errors import FitFailed, NoConvergence, NoStopband
from capcav.qed import fit_kappa_sc, mirror_scan

# constant-index stand-in close to the calibrated surrogate
PLAIN = gr.GratingCavitySpec(period=244.0, duty_cycle=0.15, slat_count=400,
                             base_n_eff=1.2652, delta_n=0.0177)


def test_segment_identity():
    M = gr.segment_matrix(1.7, 0.0, 620.0)
    assert np.allclose(M, np.eye(2), atol=0, rtol=0)


@pytest.mark.parametrize("n,L,lam", [(1.0, 100.0, 500.0), (1.45, 37.0, 619.0), (3.2, 1234.5, 700.0)])
def test_lossless_segment_unit_determinant(n, L, lam):
    assert abs(np.linalg.det(gr.segment_matrix(n, L, lam))) == pytest.approx(1.0, abs=1e-12)


def test_lossy_segment_attenuates():
    M = gr.segment_matrix(1.5, 0.0, 620.0, loss_amp=0.9)
    T, _ = gr.transmission_reflection(M, 1.5, 1.5)
    assert T[()] == pytest.approx(0.81, rel=1e-12)


def test_single_interface_fresnel():
    T, R = gr.transmission_reflection(np.eye(2, dtype=complex), 1.0, 1.5)
    assert R == pytest.approx(0.04, abs=1e-15)
    assert T == pytest.approx(0.96, abs=1e-15)


def test_quarter_wave_pair_matches_admittance_formula():
    # H then L quarter-wave layers on a substrate: Y = (nH/nL)^2 ns
    n0, nh, nl, ns, lam = 1.0, 2.3, 1.38, 1.52, 600.0
    M = gr.segments_matrix([(nh, lam / (4 * nh), 1.0), (nl, lam / (4 * nl), 1.0)], np.array([lam]))
    _, R = gr.transmission_reflection(M, n0, ns)
    Y = (nh / nl) ** 2 * ns
    assert R[0] == pytest.approx(((n0 - Y) / (n0 + Y)) ** 2, abs=1e-12)


def test_no_contrast_is_transparent():
    spec = gr.GratingCavitySpec(244.0, 0.15, 2, 1.27, delta_n=0.0)
    s = gr.cavity_spectrum(spec, (600.0, 640.0, 0.5))
    assert np.allclose(s.T, 1.0, atol=1e-12)
    assert np.allclose(s.R, 0.0, atol=1e-12)


def test_empty_grid():
    with pytest.raises(ValueError, match="empty"):
        gr.cavity_spectrum(PLAIN, np.array([]))


def test_grid_outside_window():
    with pytest.raises(ValueError):
        gr.cavity_spectrum(PLAIN, (500.0, 520.0, 1.0))


@pytest.mark.parametrize("kw", [dict(period=0), dict(duty_cycle=1.0), dict(slat_count=3),
                                dict(delta_n=-0.1), dict(slat_loss=0.0), dict(polarization_tag="z")])
def test_spec_validation(kw):
    with pytest.raises(ValueError):
        replace(PLAIN, **kw)


def test_default_defect_width():
    assert PLAIN.defect_width == 366.0
    assert PLAIN.stack_length == 400 * 244.0 + 366.0


_specs = st.builds(
    gr.GratingCavitySpec,
    period=st.floats(150.0, 350.0), duty_cycle=st.floats(0.05, 0.95),
    slat_count=st.integers(1, 300).map(lambda k: 2 * k), base_n_eff=st.floats(1.0, 2.0),
    delta_n=st.floats(0.0, 0.5), defect_width=st.floats(10.0, 800.0),
)


@settings(max_examples=60, deadline=None)
@given(spec=_specs)
def test_lossless_unitarity(spec):
    s = gr.cavity_spectrum(spec, (560.0, 680.0, 2.5))
    assert np.max(np.abs(s.T + s.R - 1.0)) < 1e-9
    assert np.all((s.T >= 0) & (s.T <= 1 + 1e-12))


@settings(max_examples=40, deadline=None)
@given(segs=st.lists(st.tuples(st.floats(1.0, 3.0), st.floats(0.0, 500.0), st.floats(0.9, 1.0)),
                     min_size=1, max_size=12),
       lam=st.floats(550.0, 700.0))
def test_reciprocity_in_reverse_order(segs, lam):
    grid = np.array([lam])
    fwd = gr.transmission_reflection(gr.segments_matrix(segs, grid), 1.3, 1.3)[0]
    rev = gr.transmission_reflection(gr.segments_matrix(segs[::-1], grid), 1.3, 1.3)[0]
    assert fwd[0] == pytest.approx(rev[0], rel=1e-9, abs=1e-14)


def test_symmetric_stack_matches_segment_list():
    lam = np.array([612.0, 619.0, 625.0])
    nb, segs = gr._segments(PLAIN, 619.0)
    direct = gr.segments_matrix(segs, lam)
    assert np.allclose(direct, gr.stack_matrix(PLAIN, lam), rtol=1e-8, atol=1e-8)


def test_bragg_centering():
    r = gr.resonance(PLAIN, 605.0, 635.0)
    centre = 0.5 * (r.stopband_lo + r.stopband_hi)
    assert centre == pytest.approx(2 * 244.0 * float(PLAIN.mean_index(np.array([centre]))[0]), rel=0.01)


@pytest.mark.parametrize("dn,counts", [(0.03, range(100, 501, 100)), (0.0177, range(200, 501, 50))])
def test_lossless_q_non_decreasing_in_n(dn, counts):
    # at the weaker contrast a 100-slat grating has no stop band at all
    qs = [gr.tracked_resonance(replace(PLAIN, slat_count=n, delta_n=dn), 600.0, 640.0).Q for n in counts]
    assert all(b >= a for a, b in zip(qs, qs[1:]))


def test_side_lobe_dip_is_not_taken_for_the_band():
    r = gr.resonance(replace(PLAIN, slat_count=500, delta_n=0.03), 600.0, 640.0)
    assert 620.0 < r.lambda_res < 621.0
    assert r.stopband_lo > 616.0
    assert r.Q > 1e4


def test_mirror_stopband_brackets_cavity_line():
    lo, hi = gr.mirror_stopband(PLAIN, 605.0, 635.0)
    r = gr.resonance(PLAIN, 605.0, 635.0)
    assert lo < r.lambda_res < hi
    with pytest.raises(NoStopband):
        gr.mirror_stopband(replace(PLAIN, delta_n=0.0), 605.0, 635.0)


def test_t0_falls_with_loss():
    t0 = [gr.resonance(replace(PLAIN, slat_loss=a), 605.0, 635.0).T0 for a in (1.0, 0.99995, 0.9999)]
    assert t0[0] == pytest.approx(1.0, abs=1e-3)
    assert t0[0] > t0[1] > t0[2]


def test_lossy_t0_decreases_with_n():
    spec = replace(PLAIN, slat_loss=0.99993)
    t0 = [gr.tracked_resonance(replace(spec, slat_count=n), 605.0, 635.0).T0 for n in range(200, 501, 50)]
    assert all(b < a for a, b in zip(t0, t0[1:]))


def _lorentz_spectrum(lam0=619.0, width=0.248, step=0.005):
    lam = np.arange(600.0, 640.0 + step / 2, step)
    T = np.ones_like(lam)
    band = (lam > 612.0) & (lam < 626.0)
    T[band] = 0.01 + 0.8 / (1 + ((lam[band] - lam0) / (width / 2)) ** 2)
    amp = np.sqrt(T).astype(complex)
    return gr.CavitySpectrum(lam, amp, np.sqrt(1 - T).astype(complex), T, 1 - T)


def test_synthetic_lorentzian_recovered():
    r = gr.find_resonance(_lorentz_spectrum())
    assert r.lambda_res == pytest.approx(619.0, rel=5e-3)
    assert r.fwhm == pytest.approx(0.248, rel=5e-3)
    assert r.Q == pytest.approx(r.lambda_res / r.fwhm, rel=1e-9)
    assert r.stopband_lo < r.lambda_res < r.stopband_hi
    assert r.stopband_lo == pytest.approx(612.0, abs=0.01)


def test_no_stopband_without_contrast():
    s = gr.cavity_spectrum(replace(PLAIN, delta_n=0.0), (605.0, 635.0, 0.1))
    with pytest.raises(NoStopband):
        gr.find_resonance(s)


def test_calibrated_spectrum_shape():
    spec, cal = helpers.calibrated_spec("y"), helpers.calibration("y")
    s = gr.refined_spectrum(spec, *cal.window(spec))
    r = gr.find_resonance(s)
    # the published edges 617-622 nm conflict with the 4 nm width target; the band
    # covers the inner edges and the line
    assert r.stopband_lo < 617.0 and r.stopband_hi > 620.0
    inside = (s.wavelengths > r.stopband_lo) & (s.wavelengths < r.stopband_hi)
    T = s.T[inside]
    peaks = gr._local_maxima(T)
    assert np.sum(T[peaks] > 0.5 * r.T0) == 1


@pytest.fixture(scope="module")
def resonant_envelope():
    spec = helpers.calibrated_spec("y")
    return gr.intracavity_envelope(spec, helpers.surrogate_resonance("y").lambda_res)


def test_envelope_peak_in_defect(resonant_envelope):
    e = resonant_envelope
    z_peak = e.z_positions[np.argmax(e.intensity)]
    assert abs(z_peak) <= 0.5 * e.defect_width
    assert e.intensity.max() == 1.0
    assert np.all(e.intensity >= 0)


def test_envelope_maxima_spaced_by_period(resonant_envelope):
    e = resonant_envelope
    pk = gr._local_maxima(e.intensity)
    z = e.z_positions[pk]
    mirror = z[(z > 2000.0) & (z < 20000.0)]
    assert np.mean(np.diff(mirror)) == pytest.approx(244.0, rel=0.02)


@pytest.mark.parametrize("lam", [600.0, 640.0])
def test_envelope_off_band_has_no_decay(lam):
    e = gr.intracavity_envelope(helpers.calibrated_spec("y"), lam)
    pk = gr._local_maxima(e.intensity)
    assert e.intensity[pk].max() / e.intensity[pk].min() < 5


def test_effective_length_synthetic_exponential():
    z = np.linspace(-60000.0, 60000.0, 120001)
    w = 366.0
    inten = np.exp(-np.maximum(np.abs(z) - w / 2, 0) / 14000.0) * (0.75 + 0.25 * np.cos(2 * np.pi * z / 244.0))
    inten /= inten.max()
    got = gr.effective_length(gr.FieldEnvelope(z, inten, w))
    assert got == pytest.approx(28366.0, rel=0.02)


def test_effective_length_flat_envelope_fails():
    z = np.linspace(-5000.0, 5000.0, 2001)
    with pytest.raises(FitFailed):
        gr.effective_length(gr.FieldEnvelope(z, np.ones_like(z), 366.0))


def test_effective_length_rising_envelope_fails():
    z = np.linspace(-20000.0, 20000.0, 40001)
    inten = np.exp(np.abs(z) / 5e4) * (1 + np.cos(2 * np.pi * z / 244.0))
    with pytest.raises(FitFailed):
        gr.effective_length(gr.FieldEnvelope(z, inten / inten.max(), 366.0))


def test_calibrated_mean_index_matches_bragg_arithmetic():
    spec = helpers.calibrated_spec("y")
    assert float(spec.mean_index(np.array([619.0]))[0]) == pytest.approx(619 / (2 * 244), abs=0.01)


def test_calibrate_contrast_meets_targets():
    spec, cal = helpers.calibrated_spec("y"), helpers.calibration("y")
    lossless = replace(spec, slat_loss=1.0)
    r = gr.resonance(lossless, 600.0, 640.0)
    assert r.lambda_res == pytest.approx(619.0, abs=0.1)
    assert r.stopband_width == pytest.approx(4.0, abs=0.1)


def test_calibrate_contrast_constant_base():
    dn, base = gr.calibrate_contrast({"lambda_res": 619.0, "stopband_width": 4.0},
                                     replace(PLAIN, delta_n=0.0))
    assert not callable(base)
    assert base + 0.15 * dn == pytest.approx(619 / 488, abs=0.01)


def test_calibrate_contrast_is_idempotent():
    targets = {"lambda_res": 619.0, "stopband_width": 4.0}
    dn, base = gr.calibrate_contrast(targets, replace(PLAIN, delta_n=0.0))
    dn2, base2 = gr.calibrate_contrast(targets, replace(PLAIN, delta_n=dn, base_n_eff=base))
    assert (dn2, base2) == (dn, base)


def test_calibrate_contrast_zero_width():
    with pytest.raises(ValueError):
        gr.calibrate_contrast({"lambda_res": 619.0, "stopband_width": 0.0}, PLAIN)


def test_calibrate_contrast_iteration_budget():
    with pytest.raises(NoConvergence):
        gr.calibrate_contrast({"lambda_res": 619.0, "stopband_width": 4.0},
                              replace(PLAIN, delta_n=0.0), max_iter=1)


def test_slat_loss_closure():
    spec, cal = helpers.calibrated_spec("y"), helpers.calibration("y")
    assert cal.slat_loss < 1.0
    k, _ = fit_kappa_sc(mirror_scan(spec, window=cal.window(spec)))
    assert k == pytest.approx(18.0, abs=0.9)


def test_slat_loss_lossless_limit():
    assert gr.calibrate_slat_loss(0.0, PLAIN) == 1.0


def test_slat_loss_monotone_in_target():
    win = (605.0, 635.0)
    a = gr.calibrate_slat_loss(18.0, PLAIN, window=win)
    b = gr.calibrate_slat_loss(36.0, PLAIN, window=win)
    assert 0.99 < b < a < 1.0


def test_slat_loss_negative_target():
    with pytest.raises(ValueError):
        gr.calibrate_slat_loss(-1.0, PLAIN)


def test_spectrum_csv(tmp_path):
    s = gr.cavity_spectrum(PLAIN, (615.0, 616.0, 0.25))
    path = tmp_path / "spectrum.csv"
    gr.write_spectrum_csv(s, path, ["config_sha256=abc"])
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "# config_sha256=abc"
    assert lines[1] == "wavelength_nm,T,R"
    rows = list(csv.reader(lines[2:]))
    assert len(rows) == 5
    assert float(rows[2][0]) == 615.5
    assert all(len(v.replace("-", "").replace(".", "").split("e")[0].lstrip("0")) <= 9 for r in rows for v in r)
    assert float(rows[1][1]) == pytest.approx(s.T[1], rel=1e-8)
