"""Binary PPM (P6) rendering of scans, segmentations and detections.

Velocity panel: width = n_gates, height = n_beams, row i is beam i.
The normalized value t = (V_r - min)/(max - min) maps blue (approaching,
negative velocities) through white to red (receding): t <= 0.5 blends
blue -> white, t > 0.5 blends white -> red, channels rounded half-up.
A constant scan renders all white (t = 0.5 by convention).

Segmentation panel: grey background, port points blue, starboard red;
detection centers get a 5x5 black cross.
"""

from __future__ import annotations

import numpy as np

from .cluster import Detection
from .dataio import PointCloud
from .explain import nearest_cell
from .synth import PORT, STARBOARD, LidarScan

GREY = (128, 128, 128)
BLUE = (0, 0, 255)
RED = (255, 0, 0)


def write_ppm(path, image: np.ndarray) -> None:
    """Write an (h, w, 3) uint8 array as binary PPM."""
    h, w, c = image.shape
    if c != 3 or image.dtype != np.uint8:
        raise ValueError("image must be (h, w, 3) uint8")
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(image.tobytes())


def _round_half_up(x: np.ndarray) -> np.ndarray:
    return np.floor(x + 0.5).astype(np.uint8)


def velocity_image(scan: LidarScan) -> np.ndarray:
    vr = scan.vr.astype(np.float64)
    lo, hi = vr.min(), vr.max()
    if hi == lo:
        t = np.full(vr.shape, 0.5)
    else:
        t = (vr - lo) / (hi - lo)
    img = np.empty((*vr.shape, 3), dtype=np.uint8)
    low = t <= 0.5
    u = 2.0 * t  # blue -> white along [0, 0.5]
    img[..., 0] = np.where(low, _round_half_up(255.0 * u), 255)
    img[..., 1] = np.where(low, _round_half_up(255.0 * u),
                           _round_half_up(255.0 * (2.0 - u)))
    img[..., 2] = np.where(low, 255, _round_half_up(255.0 * (2.0 - u)))
    return img


def segmentation_image(cloud: PointCloud, labels: np.ndarray,
                       detections: list[Detection] | None = None) -> np.ndarray:
    geom = cloud.geom
    img = np.full((geom.n_beams, geom.n_gates, 3), GREY, dtype=np.uint8)
    for cls, color in ((PORT, BLUE), (STARBOARD, RED)):
        mask = labels == cls
        img[cloud.beam_idx[mask], cloud.gate_idx[mask]] = color
    for det in detections or []:
        b, g = nearest_cell(geom, det.center[0], det.center[1])
        for off in range(-2, 3):
            bb = b + off
            gg = g + off
            if 0 <= bb < geom.n_beams:
                img[bb, g] = (0, 0, 0)
            if 0 <= gg < geom.n_gates:
                img[b, gg] = (0, 0, 0)
    return img


def render_scan(scan: LidarScan, out_prefix: str,
                cloud: PointCloud | None = None,
                labels: np.ndarray | None = None,
                detections: list[Detection] | None = None) -> list[str]:
    """Write <prefix>_velocity.ppm and, given labels, <prefix>_segmentation.ppm."""
    paths = []
    vel_path = f"{out_prefix}_velocity.ppm"
    write_ppm(vel_path, velocity_image(scan))
    paths.append(vel_path)
    if cloud is not None and labels is not None:
        seg_path = f"{out_prefix}_segmentation.ppm"
        write_ppm(seg_path, segmentation_image(cloud, labels, detections))
        paths.append(seg_path)
    return paths
