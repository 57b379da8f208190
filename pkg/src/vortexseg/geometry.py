"""Scan-grid geometry: the LiDAR polar frame and its Cartesian view.

The instrument sits at the origin of a vertical (y, z) plane; a beam at
elevation angle phi (degrees above ground) measures at range gates R
(meters along the beam). Beam angles and gate centers are both linearly
spaced, endpoints included. Angles are degrees at every public boundary
and radians only inside the trig.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ScanGeometry:
    """Polar grid layout: n_beams elevation angles x n_gates range gates."""

    n_beams: int
    n_gates: int
    elevation_min: float
    elevation_max: float
    range_min: float
    range_max: float

    def __post_init__(self):
        if self.n_beams < 2 or self.n_gates < 2:
            raise ValueError("geometry needs at least 2 beams and 2 gates")
        if not (0.0 <= self.elevation_min < self.elevation_max <= 90.0):
            raise ValueError(
                f"elevation bounds must satisfy 0 <= min < max <= 90, got "
                f"[{self.elevation_min}, {self.elevation_max}]"
            )
        if not (0.0 < self.range_min < self.range_max):
            raise ValueError(
                f"range bounds must satisfy 0 < min < max, got "
                f"[{self.range_min}, {self.range_max}]"
            )

    @property
    def n_cells(self) -> int:
        return self.n_beams * self.n_gates

    @property
    def gate_width(self) -> float:
        return (self.range_max - self.range_min) / (self.n_gates - 1)

    def beam_angles(self) -> np.ndarray:
        return np.linspace(self.elevation_min, self.elevation_max, self.n_beams)

    def gate_centers(self) -> np.ndarray:
        return np.linspace(self.range_min, self.range_max, self.n_gates)

    def cell_positions(self) -> tuple[np.ndarray, np.ndarray]:
        """Cartesian (y, z) of every cell center, each shaped (n_beams, n_gates)."""
        phi = np.radians(self.beam_angles())[:, None]
        r = self.gate_centers()[None, :]
        return r * np.cos(phi), r * np.sin(phi)

    def contains(self, y, z, margin: float = 0.0) -> bool | np.ndarray:
        """Whether (y, z) lies inside the scanned sector.

        `margin` (meters) shrinks the sector: radially by `margin`, and
        angularly by the arc length equivalent at the point's own range.
        """
        phi, rng = cartesian_to_polar(y, z)
        arc = np.degrees(margin / rng)
        return (
            (rng >= self.range_min + margin)
            & (rng <= self.range_max - margin)
            & (phi >= self.elevation_min + arc)
            & (phi <= self.elevation_max - arc)
        )


def _check_finite(name: str, value) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


def polar_to_cartesian(phi, rng):
    """(elevation deg, range m) -> (y, z) meters, instrument at the origin."""
    phi = _check_finite("phi", phi)
    rng = _check_finite("range", rng)
    if np.any(phi < 0.0) or np.any(phi > 90.0):
        raise ValueError("elevation angle must lie in [0, 90] degrees")
    if np.any(rng <= 0.0):
        raise ValueError("range must be positive")
    rad = np.radians(phi)
    y = rng * np.cos(rad)
    z = rng * np.sin(rad)
    if y.ndim == 0:
        return float(y), float(z)
    return y, z


def cartesian_to_polar(y, z):
    """(y, z) meters -> (elevation deg, range m); rejects the origin."""
    y = _check_finite("y", y)
    z = _check_finite("z", z)
    if np.any(z < 0.0):
        raise ValueError("z must be non-negative")
    rng = np.hypot(y, z)
    if np.any(rng == 0.0):
        raise ValueError("the origin has no polar representation")
    phi = np.degrees(np.arctan2(z, y))
    if phi.ndim == 0:
        return float(phi), float(rng)
    return phi, rng


def beam_unit_vector(phi):
    """Unit direction of a beam at elevation `phi` degrees."""
    phi = _check_finite("phi", phi)
    if np.any(phi < 0.0) or np.any(phi > 90.0):
        raise ValueError("elevation angle must lie in [0, 90] degrees")
    rad = np.radians(phi)
    u_y = np.cos(rad)
    u_z = np.sin(rad)
    if u_y.ndim == 0:
        return float(u_y), float(u_z)
    return u_y, u_z
