"""k-nearest-neighbor graphs over point features.

The structural primitive of the dynamic-graph segmentation model: every
point links to its k nearest neighbors by squared Euclidean distance,
self excluded, ties broken toward the lower point index, and each row
ordered ascending by (distance, index). That total order makes graphs
reproducible across runs and across the two backends.

Backends: the compiled extension (vortexseg._core) when built, else the
pure-numpy fallback (vortexseg._core_py). Both produce bit-identical
neighbor tables; VORTEXSEG_BACKEND=compiled|python|auto overrides the
choice at import time.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import _core_py

_choice = os.environ.get("VORTEXSEG_BACKEND", "auto")
if _choice not in ("auto", "compiled", "python"):
    raise RuntimeError(f"VORTEXSEG_BACKEND must be auto|compiled|python, got {_choice!r}")

_core = None
if _choice in ("auto", "compiled"):
    try:
        from . import _core  # type: ignore[no-redef]
    except ImportError:
        if _choice == "compiled":
            raise RuntimeError(
                "VORTEXSEG_BACKEND=compiled but the vortexseg._core extension "
                "is not built; install with `pip install -e .`"
            )

_impl = _core if _core is not None else _core_py

BACKEND = "compiled" if _core is not None else "python"


@dataclass(frozen=True)
class KnnGraph:
    n: int
    k: int
    neighbors: np.ndarray  # int32, (n, k)


def _prepare(features: np.ndarray, k: int) -> np.ndarray:
    x = np.ascontiguousarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"features must be 2-D, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("features must be finite")
    if not 1 <= k < x.shape[0]:
        raise ValueError(f"need 1 <= k < n, got k={k}, n={x.shape[0]}")
    return x


def knn_bruteforce(features: np.ndarray, k: int) -> KnnGraph:
    """Exact kNN over features of any dimension."""
    x = _prepare(features, k)
    return KnnGraph(n=x.shape[0], k=k, neighbors=_impl.knn_bruteforce(x, k))


def knn_grid(features: np.ndarray, k: int) -> KnnGraph:
    """Exact kNN for 2-D spatial coordinates via uniform-grid bucketing.

    Output is identical to knn_bruteforce; the bucketing only changes
    the running time.
    """
    x = _prepare(features, k)
    if x.shape[1] != 2:
        raise ValueError(f"knn_grid needs 2-D coordinates, got d={x.shape[1]}")
    return KnnGraph(n=x.shape[0], k=k, neighbors=_impl.knn_grid(x, k))
