import numpy as np
import pytest
from hypothesis import given, strategies as st

from vortexseg.geometry import (
    ScanGeometry,
    beam_unit_vector,
    cartesian_to_polar,
    polar_to_cartesian,
)


def test_polar_to_cartesian_zero_angle():
    assert polar_to_cartesian(0.0, 100.0) == (100.0, 0.0)


def test_polar_to_cartesian_vertical_beam():
    y, z = polar_to_cartesian(90.0, 50.0)
    assert abs(y) < 1e-12
    assert z == 50.0


def test_polar_to_cartesian_thirty_degrees():
    y, z = polar_to_cartesian(30.0, 100.0)
    assert y == pytest.approx(86.6025, abs=1e-4)
    assert z == pytest.approx(50.0, abs=1e-9)


def test_cartesian_to_polar_examples():
    assert cartesian_to_polar(100.0, 0.0) == (0.0, 100.0)
    phi, rng = cartesian_to_polar(0.0, 50.0)
    assert (phi, rng) == (90.0, 50.0)
    phi, rng = cartesian_to_polar(86.6025, 50.0)
    assert phi == pytest.approx(30.0, abs=1e-4)
    assert rng == pytest.approx(100.0, abs=1e-4)


def test_beam_unit_vector_examples():
    assert beam_unit_vector(0.0) == (1.0, 0.0)
    uy, uz = beam_unit_vector(90.0)
    assert abs(uy) < 1e-12 and uz == 1.0
    uy, uz = beam_unit_vector(45.0)
    assert uy == pytest.approx(0.70711, abs=1e-5)
    assert uz == pytest.approx(0.70711, abs=1e-5)


@given(st.floats(0.0, 90.0), st.floats(1e-3, 1e5))
def test_round_trip(phi, rng):
    y, z = polar_to_cartesian(phi, rng)
    phi2, rng2 = cartesian_to_polar(y, z)
    assert rng2 == pytest.approx(rng, rel=1e-9)
    # angle comparison in absolute degrees; tiny ranges keep this exact enough
    assert phi2 == pytest.approx(phi, abs=1e-9 * max(1.0, phi))


@given(st.floats(0.0, 90.0))
def test_unit_norm(phi):
    uy, uz = beam_unit_vector(phi)
    assert np.hypot(uy, uz) == pytest.approx(1.0, abs=1e-12)


def test_rejects_bad_inputs():
    with pytest.raises(ValueError):
        polar_to_cartesian(-1.0, 10.0)
    with pytest.raises(ValueError):
        polar_to_cartesian(91.0, 10.0)
    with pytest.raises(ValueError):
        polar_to_cartesian(10.0, 0.0)
    with pytest.raises(ValueError):
        polar_to_cartesian(np.nan, 10.0)
    with pytest.raises(ValueError):
        cartesian_to_polar(0.0, 0.0)
    with pytest.raises(ValueError):
        cartesian_to_polar(10.0, -1.0)
    with pytest.raises(ValueError):
        beam_unit_vector(180.0)


def test_geometry_validation():
    with pytest.raises(ValueError):
        ScanGeometry(1, 10, 0.0, 30.0, 100.0, 700.0)
    with pytest.raises(ValueError):
        ScanGeometry(10, 10, 30.0, 30.0, 100.0, 700.0)
    with pytest.raises(ValueError):
        ScanGeometry(10, 10, 0.0, 95.0, 100.0, 700.0)
    with pytest.raises(ValueError):
        ScanGeometry(10, 10, 0.0, 30.0, 0.0, 700.0)
    with pytest.raises(ValueError):
        ScanGeometry(10, 10, 0.0, 30.0, 700.0, 100.0)


def test_grid_layout(small_geom):
    angles = small_geom.beam_angles()
    gates = small_geom.gate_centers()
    assert len(angles) == small_geom.n_beams
    assert angles[0] == small_geom.elevation_min
    assert angles[-1] == small_geom.elevation_max
    assert gates[0] == small_geom.range_min
    assert gates[-1] == small_geom.range_max
    yy, zz = small_geom.cell_positions()
    assert yy.shape == (small_geom.n_beams, small_geom.n_gates)
    # beam 0 is horizontal: z = 0 along it
    assert np.allclose(zz[0], 0.0)


def test_contains_margin(small_geom):
    assert small_geom.contains(400.0, 100.0)
    assert not small_geom.contains(50.0, 0.0)
    # just off the outer arc
    assert not small_geom.contains(699.9, 30.0, margin=30.0)
