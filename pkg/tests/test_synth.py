import numpy as np
import pytest

from vortexseg.geometry import ScanGeometry, beam_unit_vector
from vortexseg.synth import (
    DEFAULT_GEOMETRY,
    PORT,
    STARBOARD,
    SceneConfig,
    SceneSpec,
    VortexSpec,
    induced_velocity,
    random_scene,
    synth_scan,
    tangential_speed,
)


def test_tangential_speed_zero_at_core_center():
    assert tangential_speed(300.0, 3.0, 0.0) == 0.0


def test_tangential_speed_at_core_radius():
    # closed form: V(r_c) = Gamma / (4 pi r_c)
    assert tangential_speed(300.0, 3.0, 3.0) == pytest.approx(300.0 / (4 * np.pi * 3.0))
    assert tangential_speed(300.0, 3.0, 3.0) == pytest.approx(7.9577, abs=1e-4)


def test_tangential_speed_direct_evaluation():
    # independent evaluation of Gamma/(2 pi r) * r^2/(r^2 + rc^2)
    expected = 300.0 / (2 * np.pi * 10.0) * 100.0 / 109.0
    assert tangential_speed(300.0, 3.0, 10.0) == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(4.3804, abs=1e-4)


def test_tangential_speed_peaks_near_core_radius():
    r = np.linspace(0.0, 30.0, 3001)
    v = tangential_speed(300.0, 3.0, r)
    assert abs(r[np.argmax(v)] - 3.0) < 0.02
    assert v[-1] < v.max()


def test_induced_velocity_empty_scene_is_crosswind():
    scene = SceneSpec(vortices=(), crosswind=(5.0, 0.0))
    assert induced_velocity(scene, 300.0, 80.0) == (5.0, 0.0)


def test_induced_velocity_at_center_is_crosswind():
    vortex = VortexSpec(PORT, 400.0, 100.0, 300.0, 3.0)
    scene = SceneSpec(vortices=(vortex,), crosswind=(2.0, -1.0))
    vy, vz = induced_velocity(scene, 400.0, 100.0)
    assert (vy, vz) == (2.0, -1.0)


def test_port_sign_convention():
    # port turns counter-clockwise: receding (positive v_y, away from the
    # instrument on a low beam) below center, approaching above
    vortex = VortexSpec(PORT, 400.0, 100.0, 300.0, 3.0)
    scene = SceneSpec(vortices=(vortex,))
    vy_below, _ = induced_velocity(scene, 400.0, 90.0)
    vy_above, _ = induced_velocity(scene, 400.0, 110.0)
    assert vy_below > 0.0
    assert vy_above < 0.0
    # starboard mirrors
    scene = SceneSpec(vortices=(VortexSpec(STARBOARD, 400.0, 100.0, 300.0, 3.0),))
    vy_below, _ = induced_velocity(scene, 400.0, 90.0)
    assert vy_below < 0.0


def test_pair_midpoint_superposition():
    # hand superposition: both tangential contributions point straight down
    # at the midpoint of a starboard(left)/port(right) pair
    gamma, rc, b0 = 300.0, 3.0, 50.0
    left = VortexSpec(STARBOARD, 400.0 - b0 / 2, 100.0, gamma, rc)
    right = VortexSpec(PORT, 400.0 + b0 / 2, 100.0, gamma, rc)
    scene = SceneSpec(vortices=(left, right))
    vy, vz = induced_velocity(scene, 400.0, 100.0)
    r = b0 / 2
    single = gamma * r / (2 * np.pi * (r * r + rc * rc))
    assert vy == pytest.approx(0.0, abs=1e-12)
    assert vz == pytest.approx(-2.0 * single, rel=1e-12)


def test_synth_scan_empty_scene_zero_grid(small_geom):
    scan = synth_scan(small_geom, SceneSpec(vortices=(), seed=1))
    assert np.all(scan.vr == 0.0)


def test_synth_scan_crosswind_projection(small_geom):
    c = 4.0
    scan = synth_scan(small_geom, SceneSpec(vortices=(), crosswind=(c, 0.0), seed=1))
    uy, _ = beam_unit_vector(small_geom.beam_angles())
    expected = np.float32(c) * uy.astype(np.float32)[:, None]
    assert np.allclose(scan.vr, np.broadcast_to(expected, scan.vr.shape), atol=1e-5)


def test_synth_scan_deterministic(small_geom, pair_scene):
    import dataclasses

    noisy = dataclasses.replace(pair_scene, noise_sigma=0.4)
    a = synth_scan(small_geom, noisy)
    b = synth_scan(small_geom, noisy)
    assert np.array_equal(a.vr, b.vr)
    assert a.truth == b.truth and a.seed == b.seed


def test_synth_scan_rejects_outside_vortex(small_geom):
    outside = VortexSpec(PORT, 50.0, 1.0, 300.0, 3.0)  # range below range_min
    with pytest.raises(ValueError, match="outside"):
        synth_scan(small_geom, SceneSpec(vortices=(outside,)))


def test_mirror_pair_antisymmetry(small_geom, pair_scene):
    """Reflect the symmetric pair about its axis and swap classes: the

    positions come back mirrored with original class labels, which flips
    every rotation in place, so the noise-free zero-crosswind scan negates
    exactly."""
    import dataclasses

    scene = dataclasses.replace(pair_scene, crosswind=(0.0, 0.0))
    left, right = scene.vortices
    mirrored = dataclasses.replace(
        scene,
        vortices=(
            dataclasses.replace(left, y=right.y),
            dataclasses.replace(right, y=left.y),
        ),
    )
    a = synth_scan(small_geom, scene)
    b = synth_scan(small_geom, mirrored)
    assert np.array_equal(b.vr, -a.vr)


def test_random_scene_forced_pair():
    config = SceneConfig(vortex_counts=(2,))
    for seed in range(20):
        scene = random_scene(seed, config)
        classes = sorted(v.vortex_class for v in scene.vortices)
        assert classes == [PORT, STARBOARD]
        starboard, port = scene.vortices
        assert starboard.vortex_class == STARBOARD
        assert port.y > starboard.y  # port right of starboard
        assert port.z == starboard.z
        b0 = port.y - starboard.y
        assert config.separation_range[0] <= b0 <= config.separation_range[1]


def test_random_scene_deterministic():
    assert random_scene(404) == random_scene(404)


def test_random_scene_sweep_respects_config():
    config = SceneConfig()
    counts = set()
    for seed in range(1000):
        scene = random_scene(seed, config)
        counts.add(len(scene.vortices))
        assert np.hypot(*scene.crosswind) <= config.crosswind_max + 1e-12
        for v in scene.vortices:
            assert DEFAULT_GEOMETRY.contains(v.y, v.z)
            lo, hi = config.circulation_range
            assert lo <= v.circulation <= hi
            lo, hi = config.core_radius_range
            assert lo <= v.core_radius <= hi
        pair_ys = {v.y for v in scene.vortices}
        assert len(pair_ys) == len(scene.vortices)  # distinct centers
    assert counts == {1, 2, 3}


def test_scene_validation():
    v = VortexSpec(PORT, 400.0, 100.0, 300.0, 3.0)
    with pytest.raises(ValueError):
        SceneSpec(vortices=(v, v, v, v))
    with pytest.raises(ValueError):
        SceneSpec(vortices=(), noise_sigma=-0.1)
    with pytest.raises(ValueError):
        VortexSpec(3, 400.0, 100.0, 300.0, 3.0)
    with pytest.raises(ValueError):
        VortexSpec(PORT, 400.0, 100.0, -1.0, 3.0)
    with pytest.raises(ValueError):
        VortexSpec(PORT, 400.0, 100.0, 300.0, 0.0)
