from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # oracles / gradcheck helpers

from vortexseg.geometry import ScanGeometry
from vortexseg.synth import PORT, STARBOARD, SceneSpec, VortexSpec, synth_scan

SMALL_GEOM = ScanGeometry(n_beams=40, n_gates=40, elevation_min=0.0,
                          elevation_max=30.0, range_min=100.0, range_max=700.0)


@pytest.fixture
def small_geom() -> ScanGeometry:
    return SMALL_GEOM


@pytest.fixture
def pair_scene() -> SceneSpec:
    return SceneSpec(
        vortices=(
            VortexSpec(STARBOARD, 375.0, 100.0, 300.0, 3.0),
            VortexSpec(PORT, 425.0, 100.0, 300.0, 3.0),
        ),
        crosswind=(1.5, 0.0),
        noise_sigma=0.0,
        seed=77,
    )


@pytest.fixture
def pair_scan(small_geom, pair_scene):
    return synth_scan(small_geom, pair_scene)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
