"""Binary scan/checkpoint formats, dataset manifests and preprocessing.

File formats (little-endian, bit-exact round trips):

WVLS v1 (one LiDAR scan)
    magic "WVLS" | u32 version=1 | u32 n_beams | u32 n_gates
    f64 elevation_min, elevation_max, range_min, range_max
    f32 vr[n_beams * n_gates]  (beam-major)
    u8 n_truth, then per truth vortex:
        u8 class (1=port, 2=starboard) | f64 y, z, circulation, core_radius
    u64 seed

WVCK v1 (one model checkpoint)
    magic "WVCK" | u32 version=1 | u8 arch (1=dgcnn, 2=pointnet)
    u16 k | u16 n_classes | u32 n_tensors, then per tensor:
        u16 name_len | ASCII name | u8 ndim | u32 dims[ndim] | f32 data (row-major)

A dataset is a directory of .wvls files plus a plain-text manifest
(UTF-8, LF) listing one file name per line; nothing else is assumed.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import ScanGeometry
from .rng import Rng
from .synth import PORT, STARBOARD, LidarScan, VortexSpec

DEFAULT_N_POINTS = 12_000
DEFAULT_LABEL_RADIUS = 25.0

BACKGROUND = 0

_SCAN_MAGIC = b"WVLS"
_CKPT_MAGIC = b"WVCK"
_FORMAT_VERSION = 1
_ARCH_IDS = {"dgcnn": 1, "pointnet": 2}
_ARCH_NAMES = {v: k for k, v in _ARCH_IDS.items()}


class FormatError(Exception):
    """Base class for malformed vortexseg files."""


class BadMagicError(FormatError):
    pass


class VersionError(FormatError):
    pass


class TruncatedError(FormatError):
    pass


class CorruptError(FormatError):
    """Structurally valid framing around invalid content."""


@dataclass
class PointCloud:
    """Per-point records sampled from a scan's grid cells.

    `labels` is None until label_points runs, `vr_norm` is None until
    normalize_velocity runs. Arrays share one ordering (the sampling
    order) and `geom` keeps the source grid for feature scaling.
    """

    geom: ScanGeometry
    beam_idx: np.ndarray  # int32
    gate_idx: np.ndarray  # int32
    phi: np.ndarray  # degrees, float64
    rng: np.ndarray  # range, meters, float64
    y: np.ndarray  # float64
    z: np.ndarray  # float64
    vr: np.ndarray  # float32, raw radial velocity
    vr_norm: np.ndarray | None = None  # float64 in [0, 1]
    labels: np.ndarray | None = None  # int64 in {0, 1, 2}

    @property
    def n(self) -> int:
        return len(self.vr)


@dataclass
class Checkpoint:
    """Named parameter tensors plus the architecture descriptor."""

    arch: str  # "dgcnn" or "pointnet"
    k: int
    n_classes: int
    tensors: dict[str, np.ndarray]  # float32, insertion order = file order

    def __post_init__(self):
        if self.arch not in _ARCH_IDS:
            raise ValueError(f"unknown architecture {self.arch!r}")


def sample_points(scan: LidarScan, n: int = DEFAULT_N_POINTS, seed: int = 0) -> PointCloud:
    """Draw n distinct grid cells uniformly without replacement.

    Uses a partial Fisher-Yates shuffle over cell indices from the given
    seed's stream, so the same seed always selects the same cells in the
    same order.
    """
    geom = scan.geom
    if n > geom.n_cells:
        raise ValueError(f"cannot sample {n} points from {geom.n_cells} cells")
    cells = Rng(seed).sample_indices(geom.n_cells, n)
    beam = (cells // geom.n_gates).astype(np.int32)
    gate = (cells % geom.n_gates).astype(np.int32)
    phi = scan.geom.beam_angles()[beam]
    rng = scan.geom.gate_centers()[gate]
    rad = np.radians(phi)
    return PointCloud(
        geom=geom,
        beam_idx=beam,
        gate_idx=gate,
        phi=phi,
        rng=rng,
        y=rng * np.cos(rad),
        z=rng * np.sin(rad),
        vr=scan.vr[beam, gate],
    )


def label_points(
    cloud: PointCloud,
    truth: tuple[VortexSpec, ...],
    r_label: float = DEFAULT_LABEL_RADIUS,
) -> PointCloud:
    """Assign each point the class of the nearest truth center within r_label.

    The radius is inclusive; distance ties go to port before starboard.
    Points beyond every center stay background.
    """
    best_d2 = np.full(cloud.n, np.inf)
    best_cls = np.zeros(cloud.n, dtype=np.int64)
    # class-ascending order makes "first wins" resolve ties port-first
    for vortex in sorted(truth, key=lambda v: v.vortex_class):
        d2 = (cloud.y - vortex.y) ** 2 + (cloud.z - vortex.z) ** 2
        closer = d2 < best_d2
        best_d2 = np.where(closer, d2, best_d2)
        best_cls = np.where(closer, vortex.vortex_class, best_cls)
    labels = np.where(best_d2 <= r_label * r_label, best_cls, BACKGROUND)
    cloud.labels = labels.astype(np.int64)
    return cloud


def normalize_velocity(cloud: PointCloud) -> PointCloud:
    """Min-max map of the cloud's own velocities onto [0, 1].

    A constant cloud maps to 0.5 everywhere.
    """
    if cloud.n == 0:
        raise ValueError("cannot normalize an empty cloud")
    vr = cloud.vr.astype(np.float64)
    lo, hi = vr.min(), vr.max()
    if hi == lo:
        cloud.vr_norm = np.full(cloud.n, 0.5)
    else:
        cloud.vr_norm = (vr - lo) / (hi - lo)
    return cloud


# ---------------------------------------------------------------------------
# binary I/O


def _read_exact(f, n: int) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise TruncatedError(f"expected {n} more bytes, file ends after {len(data)}")
    return data


def _read_struct(f, fmt: str):
    return struct.unpack(fmt, _read_exact(f, struct.calcsize(fmt)))


def write_scan(scan: LidarScan, path) -> None:
    g = scan.geom
    with open(path, "wb") as f:
        f.write(_SCAN_MAGIC)
        f.write(struct.pack("<III", _FORMAT_VERSION, g.n_beams, g.n_gates))
        f.write(
            struct.pack(
                "<dddd", g.elevation_min, g.elevation_max, g.range_min, g.range_max
            )
        )
        f.write(np.ascontiguousarray(scan.vr, dtype="<f4").tobytes())
        f.write(struct.pack("<B", len(scan.truth)))
        for v in scan.truth:
            f.write(
                struct.pack(
                    "<Bdddd", v.vortex_class, v.y, v.z, v.circulation, v.core_radius
                )
            )
        f.write(struct.pack("<Q", scan.seed))


def read_scan(path) -> LidarScan:
    with open(path, "rb") as f:
        magic = _read_exact(f, 4)
        if magic != _SCAN_MAGIC:
            raise BadMagicError(f"not a WVLS file (magic {magic!r})")
        version, n_beams, n_gates = _read_struct(f, "<III")
        if version != _FORMAT_VERSION:
            raise VersionError(f"unsupported WVLS version {version}")
        emin, emax, rmin, rmax = _read_struct(f, "<dddd")
        try:
            geom = ScanGeometry(n_beams, n_gates, emin, emax, rmin, rmax)
        except ValueError as exc:
            raise CorruptError(str(exc)) from exc
        vr = np.frombuffer(_read_exact(f, 4 * n_beams * n_gates), dtype="<f4")
        vr = vr.reshape(n_beams, n_gates).astype(np.float32)
        (n_truth,) = _read_struct(f, "<B")
        truth = []
        for _ in range(n_truth):
            cls, y, z, gamma, core = _read_struct(f, "<Bdddd")
            if cls not in (PORT, STARBOARD):
                raise CorruptError(f"unknown vortex class id {cls}")
            try:
                truth.append(VortexSpec(cls, y, z, gamma, core))
            except ValueError as exc:
                raise CorruptError(str(exc)) from exc
        (seed,) = _read_struct(f, "<Q")
        try:
            return LidarScan(geom=geom, vr=vr, truth=tuple(truth), seed=seed)
        except ValueError as exc:
            raise CorruptError(str(exc)) from exc


def write_checkpoint(ckpt: Checkpoint, path) -> None:
    with open(path, "wb") as f:
        f.write(_CKPT_MAGIC)
        f.write(struct.pack("<IBHHI", _FORMAT_VERSION, _ARCH_IDS[ckpt.arch],
                            ckpt.k, ckpt.n_classes, len(ckpt.tensors)))
        for name, tensor in ckpt.tensors.items():
            encoded = name.encode("ascii")
            f.write(struct.pack("<H", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<B", tensor.ndim))
            f.write(struct.pack(f"<{tensor.ndim}I", *tensor.shape))
            f.write(np.ascontiguousarray(tensor, dtype="<f4").tobytes())


def read_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as f:
        magic = _read_exact(f, 4)
        if magic != _CKPT_MAGIC:
            raise BadMagicError(f"not a WVCK file (magic {magic!r})")
        version, arch_id, k, n_classes, n_tensors = _read_struct(f, "<IBHHI")
        if version != _FORMAT_VERSION:
            raise VersionError(f"unsupported WVCK version {version}")
        if arch_id not in _ARCH_NAMES:
            raise CorruptError(f"unknown architecture id {arch_id}")
        tensors: dict[str, np.ndarray] = {}
        for _ in range(n_tensors):
            (name_len,) = _read_struct(f, "<H")
            try:
                name = _read_exact(f, name_len).decode("ascii")
            except UnicodeDecodeError as exc:
                raise CorruptError("tensor name is not ASCII") from exc
            if name in tensors:
                raise CorruptError(f"duplicate tensor name {name!r}")
            (ndim,) = _read_struct(f, "<B")
            shape = _read_struct(f, f"<{ndim}I")
            count = int(np.prod(shape, dtype=np.int64)) if ndim else 1
            data = np.frombuffer(_read_exact(f, 4 * count), dtype="<f4")
            tensors[name] = data.reshape(shape).astype(np.float32)
        return Checkpoint(arch=_ARCH_NAMES[arch_id], k=k, n_classes=n_classes,
                          tensors=tensors)


# ---------------------------------------------------------------------------
# dataset manifests


def write_manifest(directory, names: list[str]) -> Path:
    path = Path(directory) / "manifest.txt"
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for name in names:
            f.write(name + "\n")
    return path


def read_manifest(directory) -> list[Path]:
    directory = Path(directory)
    path = directory / "manifest.txt"
    if not path.is_file():
        raise FileNotFoundError(f"no manifest.txt in {directory}")
    with open(path, encoding="utf-8") as f:
        return [directory / line.strip() for line in f if line.strip()]
