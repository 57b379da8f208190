"""Synthetic Doppler-LiDAR scans of wake-vortex scenes.

A scene holds up to three counter-rotating wake vortices over a uniform
crosswind. Each vortex follows the Burnham-Hallock tangential profile

    V(r) = Gamma * r / (2 * pi * (r**2 + r_c**2))

which is zero at the core center, peaks near the core radius r_c and
decays like Gamma/(2*pi*r) far out. Rotation sense is tied to the class:
the port vortex (right of the pair, as seen by the instrument) turns
counter-clockwise in the (y, z) plane, the starboard vortex clockwise,
so a port vortex recedes below its center and approaches above it
(red bottom, blue top in the conventional rendering).

Scan synthesis projects the induced wind field onto each beam and
averages three sample points per range gate; optional Gaussian noise
comes from the scene seed's own deterministic stream.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import ScanGeometry, beam_unit_vector, cartesian_to_polar
from .rng import TAG_NOISE, Rng, derive_seed

PORT = 1
STARBOARD = 2
CLASS_NAMES = {PORT: "port", STARBOARD: "starboard"}

DEFAULT_GEOMETRY = ScanGeometry(
    n_beams=120,
    n_gates=120,
    elevation_min=0.0,
    elevation_max=30.0,
    range_min=100.0,
    range_max=700.0,
)

GATE_SAMPLES = 3  # per-gate averaging points, at center and +-width/3


@dataclass(frozen=True)
class VortexSpec:
    vortex_class: int  # PORT or STARBOARD
    y: float
    z: float
    circulation: float  # Gamma, m^2/s, magnitude
    core_radius: float  # r_c, meters

    def __post_init__(self):
        if self.vortex_class not in (PORT, STARBOARD):
            raise ValueError(f"unknown vortex class {self.vortex_class}")
        if not self.circulation > 0.0:
            raise ValueError("circulation must be positive")
        if not self.core_radius > 0.0:
            raise ValueError("core radius must be positive")

    @property
    def center(self) -> tuple[float, float]:
        return (self.y, self.z)


@dataclass(frozen=True)
class SceneSpec:
    vortices: tuple[VortexSpec, ...]
    crosswind: tuple[float, float] = (0.0, 0.0)
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if len(self.vortices) > 3:
            raise ValueError("a scene holds at most three vortices")
        if self.noise_sigma < 0.0:
            raise ValueError("noise_sigma must be non-negative")


@dataclass(frozen=True)
class LidarScan:
    """Polar grid of radial velocities plus the scene ground truth."""

    geom: ScanGeometry
    vr: np.ndarray  # float32, (n_beams, n_gates), beam-major
    truth: tuple[VortexSpec, ...]
    seed: int

    def __post_init__(self):
        if self.vr.shape != (self.geom.n_beams, self.geom.n_gates):
            raise ValueError(
                f"vr shape {self.vr.shape} does not match geometry "
                f"({self.geom.n_beams}, {self.geom.n_gates})"
            )
        if self.vr.dtype != np.float32:
            raise ValueError("vr must be float32")
        if not np.all(np.isfinite(self.vr)):
            raise ValueError("vr must be finite")


def tangential_speed(circulation: float, core_radius: float, r):
    """Burnham-Hallock swirl speed at distance r from the core center."""
    r = np.asarray(r, dtype=np.float64)
    v = circulation * r / (2.0 * np.pi * (r * r + core_radius * core_radius))
    return float(v) if v.ndim == 0 else v


def induced_velocity(scene: SceneSpec, y, z):
    """Superposed wind (v_y, v_z) of all vortices plus the crosswind."""
    y = np.asarray(y, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    v_y = np.full(y.shape, scene.crosswind[0], dtype=np.float64)
    v_z = np.full(z.shape, scene.crosswind[1], dtype=np.float64)
    for vortex in scene.vortices:
        dy = y - vortex.y
        dz = z - vortex.z
        # tangential_speed(r) / r, finite at r = 0
        factor = vortex.circulation / (
            2.0 * np.pi * (dy * dy + dz * dz + vortex.core_radius**2)
        )
        if vortex.vortex_class == PORT:  # counter-clockwise
            v_y += factor * -dz
            v_z += factor * dy
        else:  # starboard, clockwise
            v_y += factor * dz
            v_z += factor * -dy
    if v_y.ndim == 0:
        return float(v_y), float(v_z)
    return v_y, v_z


def synth_scan(geom: ScanGeometry, scene: SceneSpec) -> LidarScan:
    """Render a scene into a radial-velocity grid.

    Each gate's value is the mean of GATE_SAMPLES points spaced along the
    beam across the gate interval (LiDAR averages over the gate, it does
    not measure a point), plus optional Gaussian noise.
    """
    for vortex in scene.vortices:
        phi, rng = cartesian_to_polar(vortex.y, vortex.z)
        if not (
            geom.elevation_min <= phi <= geom.elevation_max
            and geom.range_min <= rng <= geom.range_max
        ):
            raise ValueError(
                f"vortex center ({vortex.y:.1f}, {vortex.z:.1f}) lies outside "
                f"the scan sector"
            )

    phi_deg = geom.beam_angles()
    u_y, u_z = beam_unit_vector(phi_deg)
    gates = geom.gate_centers()
    offsets = np.array([-geom.gate_width / 3.0, 0.0, geom.gate_width / 3.0])

    vr = np.zeros((geom.n_beams, geom.n_gates), dtype=np.float64)
    cos_phi = np.cos(np.radians(phi_deg))[:, None]
    sin_phi = np.sin(np.radians(phi_deg))[:, None]
    for off in offsets:
        r = (gates + off)[None, :]
        v_y, v_z = induced_velocity(scene, r * cos_phi, r * sin_phi)
        vr += v_y * u_y[:, None] + v_z * u_z[:, None]
    vr /= len(offsets)

    if scene.noise_sigma > 0.0:
        noise_rng = Rng(derive_seed(scene.seed, TAG_NOISE))
        noise = noise_rng.gaussians(geom.n_cells).reshape(geom.n_beams, geom.n_gates)
        vr += scene.noise_sigma * noise

    return LidarScan(
        geom=geom,
        vr=vr.astype(np.float32),
        truth=scene.vortices,
        seed=scene.seed,
    )


@dataclass(frozen=True)
class SceneConfig:
    """Parameter ranges for random scene generation.

    Plausible transport-aircraft magnitudes; nothing here is a physics
    claim, the pipeline's tests only rely on self-consistency.
    """

    geom: ScanGeometry = DEFAULT_GEOMETRY
    vortex_counts: tuple[int, ...] = (1, 2, 3)
    circulation_range: tuple[float, float] = (150.0, 450.0)
    core_radius_range: tuple[float, float] = (2.0, 5.0)
    separation_range: tuple[float, float] = (40.0, 60.0)  # pair spacing b0
    height_range: tuple[float, float] = (60.0, 150.0)
    y_range: tuple[float, float] = (250.0, 600.0)
    crosswind_max: float = 3.0
    noise_sigma: float = 0.3
    min_vortex_spacing: float = 70.0  # between non-pair vortices
    sector_margin: float = 30.0

    def __post_init__(self):
        for name in ("circulation_range", "core_radius_range", "separation_range",
                     "height_range", "y_range"):
            lo, hi = getattr(self, name)
            if not lo <= hi:
                raise ValueError(f"{name} is empty: ({lo}, {hi})")
        if not self.vortex_counts or any(c < 0 or c > 3 for c in self.vortex_counts):
            raise ValueError("vortex_counts must be within 0..3")
        if self.crosswind_max < 0 or self.noise_sigma < 0:
            raise ValueError("crosswind_max and noise_sigma must be non-negative")


_MAX_DRAWS = 10_000


def _uniform_in(rng: Rng, lo: float, hi: float) -> float:
    return lo + (hi - lo) * rng.uniform()


def _draw_center(rng: Rng, config: SceneConfig) -> tuple[float, float]:
    for _ in range(_MAX_DRAWS):
        y = _uniform_in(rng, *config.y_range)
        z = _uniform_in(rng, *config.height_range)
        if config.geom.contains(y, z, margin=config.sector_margin):
            return y, z
    raise ValueError("could not place a vortex inside the sector; check config ranges")


def random_scene(seed: int, config: SceneConfig = SceneConfig()) -> SceneSpec:
    """Draw a scene deterministically from `seed`.

    A two-vortex scene is a port/starboard pair at common height: the
    starboard vortex sits left of the port one (downwash between them)
    and both share circulation and core radius. A third vortex, like a
    single one, keeps `min_vortex_spacing` meters from all others so
    vortices never blur together.
    """
    rng = Rng(seed)
    count = config.vortex_counts[rng.randbelow(len(config.vortex_counts))]
    vortices: list[VortexSpec] = []

    def draw_single() -> VortexSpec:
        cls = PORT if rng.randbelow(2) == 0 else STARBOARD
        gamma = _uniform_in(rng, *config.circulation_range)
        core = _uniform_in(rng, *config.core_radius_range)
        for _ in range(_MAX_DRAWS):
            y, z = _draw_center(rng, config)
            if all(
                np.hypot(y - v.y, z - v.z) >= config.min_vortex_spacing
                for v in vortices
            ):
                return VortexSpec(cls, y, z, gamma, core)
        raise ValueError("could not separate vortices; check config ranges")

    def draw_pair() -> list[VortexSpec]:
        gamma = _uniform_in(rng, *config.circulation_range)
        core = _uniform_in(rng, *config.core_radius_range)
        b0 = _uniform_in(rng, *config.separation_range)
        for _ in range(_MAX_DRAWS):
            y, z = _draw_center(rng, config)
            left, right = (y - b0 / 2.0, z), (y + b0 / 2.0, z)
            if config.geom.contains(*left, margin=config.sector_margin) and (
                config.geom.contains(*right, margin=config.sector_margin)
            ):
                return [
                    VortexSpec(STARBOARD, *left, gamma, core),
                    VortexSpec(PORT, *right, gamma, core),
                ]
        raise ValueError("could not place a vortex pair; check config ranges")

    if count >= 2:
        vortices.extend(draw_pair())
    if count in (1, 3):
        vortices.append(draw_single())

    for _ in range(_MAX_DRAWS):
        v_y = _uniform_in(rng, -config.crosswind_max, config.crosswind_max)
        v_z = _uniform_in(rng, -config.crosswind_max, config.crosswind_max)
        if np.hypot(v_y, v_z) <= config.crosswind_max:
            break
    else:
        raise ValueError("crosswind rejection sampling failed")

    return SceneSpec(
        vortices=tuple(vortices),
        crosswind=(v_y, v_z),
        noise_sigma=config.noise_sigma,
        seed=seed,
    )
