import csv
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from capcav.emitter import (PAPER_CENTRED, PAPER_OFF_CENTRE, CouplingSurrogate, EmitterPlacement,
                            eta_of_orientation, eta_of_position, position_sweep, write_sweep_csv)


def at(dz, pol="y", theta=0.0, model=PAPER_CENTRED):
    return eta_of_position(EmitterPlacement(dz, theta=theta, pol_axis=pol), model)


def test_anti_node_and_node_values():
    assert at(0.0) == pytest.approx(0.87, abs=1e-15)
    assert at(0.0, "x") == pytest.approx(0.71, abs=1e-15)
    assert abs(at(122.0) - 0.01) <= 0.02
    assert abs(at(122.0, "x") - 0.03) <= 0.02


def test_quarter_period_midpoint():
    assert at(61.0) == pytest.approx((0.87 + 0.01) / 2, abs=1e-15)


def test_z_dipole_floor():
    assert at(0.0, "z") == 0.02
    assert at(97.0, "z") == 0.02
    assert eta_of_position(EmitterPlacement(0.0, radial_offset=50.0, pol_axis="z"), PAPER_OFF_CENTRE) == 0.04


def test_orientation_examples():
    assert eta_of_orientation(0.0, 0.87, 0.71) == 0.87
    assert eta_of_orientation(math.pi / 2, 0.87, 0.71) == pytest.approx(0.71, abs=1e-15)
    assert eta_of_orientation(math.pi / 4, 0.87, 0.71) == pytest.approx(0.79, abs=1e-15)
    with pytest.raises(ValueError):
        eta_of_orientation(2.0, 0.87, 0.71)


def test_in_plane_mixes_polarizations():
    theta = 0.4
    expected = math.cos(theta) ** 2 * at(30.0, "y") + math.sin(theta) ** 2 * at(30.0, "x")
    assert at(30.0, "in-plane", theta) == pytest.approx(expected, abs=1e-15)


@given(theta=st.floats(0.0, math.pi / 2), ey=st.floats(0.0, 1.0), ex=st.floats(0.0, 1.0))
def test_orientation_complementarity(theta, ey, ex):
    total = eta_of_orientation(theta, ey, ex) + eta_of_orientation(math.pi / 2 - theta, ey, ex)
    assert abs(total - (ey + ex)) <= 1e-12


@given(theta=st.floats(0.0, math.pi / 2), ex=st.floats(0.0, 0.999), gap=st.floats(1e-3, 1.0))
def test_orientation_argmax_is_y(theta, ex, gap):
    ey = min(1.0, ex + gap)
    assert eta_of_orientation(theta, ey, ex) <= eta_of_orientation(0.0, ey, ex)


@given(dz=st.floats(-5000.0, 5000.0), pol=st.sampled_from(["x", "y", "z", "in-plane"]),
       theta=st.floats(0.0, math.pi / 2), r=st.floats(0.0, 200.0))
def test_eta_bounded(dz, pol, theta, r):
    for model in (PAPER_CENTRED, PAPER_OFF_CENTRE):
        e = eta_of_position(EmitterPlacement(dz, r, theta, pol), model)
        assert 0.0 <= e <= 1.0


@given(k=st.integers(-20, 20), dz=st.floats(-5000.0, 5000.0), pol=st.sampled_from(["x", "y"]))
def test_argmax_on_anti_nodes(k, dz, pol):
    assert at(dz, pol) <= at(244.0 * k, pol) + 1e-15


def test_sweep_two_maxima():
    sw = position_sweep(PAPER_CENTRED, (0.0, 488.0), 1.0, "y")
    assert len(sw.delta_z) == 488
    assert len(sw.maxima) == 2
    assert sw.maxima[0] == pytest.approx(0.0, abs=1.0)
    assert sw.maxima[1] == pytest.approx(244.0, abs=1.0)
    assert np.diff(sw.maxima)[0] == pytest.approx(PAPER_CENTRED.standing_period, abs=1.0)
    assert sw.minima == (122.0, 366.0)


def test_sweep_custom_period_spacing():
    model = CouplingSurrogate(standing_period=300.0)
    sw = position_sweep(model, (-10.0, 1000.0), 0.5, "x")
    assert np.allclose(np.diff(sw.maxima), 300.0, atol=0.5)


def test_z_sweep_is_constant():
    sw = position_sweep(PAPER_CENTRED, (0.0, 488.0), 4.0, "z")
    assert np.all(sw.eta == 0.02)
    assert sw.maxima == () and sw.minima == ()


def test_sweep_validation_and_empty():
    with pytest.raises(ValueError):
        position_sweep(PAPER_CENTRED, (0.0, 10.0), 0.0)
    assert len(position_sweep(PAPER_CENTRED, (5.0, 5.0), 1.0).delta_z) == 0


@pytest.mark.parametrize("kw", [dict(eta_anti_y=1.2), dict(eta_node_x=0.9), dict(standing_period=0.0)])
def test_surrogate_validation(kw):
    with pytest.raises(ValueError):
        CouplingSurrogate(**kw)


@pytest.mark.parametrize("kw", [dict(radial_offset=-1.0), dict(theta=-0.1), dict(pol_axis="q")])
def test_placement_validation(kw):
    with pytest.raises(ValueError):
        EmitterPlacement(**kw)


def test_sweep_csv(tmp_path):
    sw = position_sweep(PAPER_CENTRED, (0.0, 10.0), 2.5)
    p = tmp_path / "position_sweep_y.csv"
    write_sweep_csv(sw, p, ["capcav_version=0"])
    lines = p.read_text(encoding="utf-8").splitlines()
    assert lines[:2] == ["# capcav_version=0", "delta_z_nm,eta"]
    rows = list(csv.reader(lines[2:]))
    assert [float(r[0]) for r in rows] == [0.0, 2.5, 5.0, 7.5]
    assert float(rows[0][1]) == 0.87
