"""Segmentation architectures: reduced DGCNN and a PointNet baseline.

Both consume one cloud at a time as an (n, 3) feature matrix of scaled
scan coordinates plus normalized radial velocity, and emit per-point
logits over {background, port, starboard}. Shared ops come from
vortexseg.ops; graphs from vortexseg.graph.

The DGCNN is deliberately reduced for CPU scale: three EdgeConv layers
(3->64->64->128), a 512-wide global max feature, and a 768->256->128->3
per-point head. EdgeConv builds the edge feature [x_i || x_j - x_i]
over the kNN graph, applies a shared linear + leaky ReLU, and
max-reduces over the k edges; with dynamic graphs on, the graph is
rebuilt from the current features before every EdgeConv, otherwise a
single graph over the two spatial coordinates is reused. Graph indices
are constants to the gradient.

The PointNet baseline has no neighborhoods at all: a shared point MLP
3->64->128->256, a global max feature, and a 512->256->128->3 head.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .dataio import Checkpoint, PointCloud
from .graph import knn_bruteforce, knn_grid
from .ops import (
    LEAKY_SLOPE,
    global_maxpool,
    global_maxpool_backward,
    leaky_relu,
    leaky_relu_backward,
    pointwise_linear,
    pointwise_linear_backward,
)
from .rng import Rng

N_INPUT_FEATURES = 3
ARCHS = ("dgcnn", "pointnet")


@dataclass(frozen=True)
class ModelConfig:
    arch: str = "dgcnn"
    k: int = 20
    n_classes: int = 3
    dynamic_graph: bool = True
    polar_inputs: bool = False
    edge_widths: tuple[int, ...] = (64, 64, 128)  # dgcnn EdgeConv outputs
    global_width: int = 512  # dgcnn fused global feature
    local_widths: tuple[int, ...] = (64, 128, 256)  # pointnet shared MLP
    head_widths: tuple[int, ...] = (256, 128)
    dtype: type = np.float32

    def __post_init__(self):
        if self.arch not in ARCHS:
            raise ValueError(f"unknown architecture {self.arch!r}")
        if self.k < 1:
            raise ValueError("k must be at least 1")
        widths = (*self.edge_widths, self.global_width, *self.local_widths,
                  *self.head_widths)
        if any(w < 1 for w in widths):
            raise ValueError("channel widths must be positive")


def cloud_features(cloud: PointCloud, polar_inputs: bool = False,
                   dtype=np.float32) -> np.ndarray:
    """Model inputs per point.

    Cartesian mode (default): (y, z) scaled by 1/range_max plus the
    normalized velocity. Polar mode: (phi/90, range/range_max, vr_norm).
    """
    if cloud.vr_norm is None:
        raise ValueError("cloud must be normalized before feature extraction")
    rmax = cloud.geom.range_max
    if polar_inputs:
        cols = (cloud.phi / 90.0, cloud.rng / rmax, cloud.vr_norm)
    else:
        cols = (cloud.y / rmax, cloud.z / rmax, cloud.vr_norm)
    return np.ascontiguousarray(np.stack(cols, axis=1), dtype=dtype)


# ---------------------------------------------------------------------------
# parameter initialization


def _layer_sizes(config: ModelConfig) -> list[tuple[str, int, int]]:
    """(name, fan_in, fan_out) per linear layer, in initialization order."""
    f = N_INPUT_FEATURES
    layers = []
    if config.arch == "dgcnn":
        d = f
        for i, width in enumerate(config.edge_widths, start=1):
            layers.append((f"ec{i}", 2 * d, width))
            d = width
        concat = sum(config.edge_widths)
        layers.append(("fuse", concat, config.global_width))
        d = concat + config.global_width
    else:
        d = f
        for i, width in enumerate(config.local_widths, start=1):
            layers.append((f"mlp{i}", d, width))
            d = width
        d = 2 * config.local_widths[-1]
    for i, width in enumerate(config.head_widths, start=1):
        layers.append((f"head{i}", d, width))
        d = width
    layers.append((f"head{len(config.head_widths) + 1}", d, config.n_classes))
    return layers


def init_params(config: ModelConfig, seed: int) -> dict[str, np.ndarray]:
    """Glorot-uniform weights drawn from the seed's stream, zero biases."""
    rng = Rng(seed)
    params: dict[str, np.ndarray] = {}
    for name, fan_in, fan_out in _layer_sizes(config):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        u = rng.uniforms(fan_in * fan_out)
        w = (bound * (2.0 * u - 1.0)).reshape(fan_in, fan_out)
        params[f"{name}.w"] = w.astype(config.dtype)
        params[f"{name}.b"] = np.zeros(fan_out, dtype=config.dtype)
    return params


# ---------------------------------------------------------------------------
# EdgeConv


def edgeconv(x: np.ndarray, neighbors: np.ndarray, w: np.ndarray, b: np.ndarray):
    """Edge feature [x_i || x_j - x_i] -> linear -> leaky ReLU -> max over edges."""
    n, d = x.shape
    k = neighbors.shape[1]
    xj = x[neighbors]  # (n, k, d)
    ef = np.empty((n, k, 2 * d), dtype=x.dtype)
    ef[:, :, :d] = x[:, None, :]
    ef[:, :, d:] = xj - x[:, None, :]
    flat = ef.reshape(n * k, 2 * d)
    h, lin_cache = pointwise_linear(flat, w, b)
    a, act_cache = leaky_relu(h)
    a = a.reshape(n, k, -1)
    arg = np.argmax(a, axis=1)  # (n, d_out), first occurrence = lowest edge
    out = np.take_along_axis(a, arg[:, None, :], axis=1)[:, 0, :]
    return out, (neighbors, lin_cache, act_cache, arg, (n, k, d))


def edgeconv_backward(cache, dout: np.ndarray):
    neighbors, lin_cache, act_cache, arg, (n, k, d) = cache
    da = np.zeros((n, k, dout.shape[1]), dtype=dout.dtype)
    np.put_along_axis(da, arg[:, None, :], dout[:, None, :], axis=1)
    dh = leaky_relu_backward(act_cache, da.reshape(n * k, -1))
    dflat, dw, db = pointwise_linear_backward(lin_cache, dh)
    def_ = dflat.reshape(n, k, 2 * d)
    dx = def_[:, :, :d].sum(axis=1) - def_[:, :, d:].sum(axis=1)
    np.add.at(dx, neighbors.ravel(), def_[:, :, d:].reshape(n * k, d))
    return dx, dw, db


# ---------------------------------------------------------------------------
# forward / backward


@dataclass
class _Tape:
    """Reverse-ordered record of one forward pass."""

    steps: list = field(default_factory=list)


def _graph_for(features: np.ndarray, config: ModelConfig):
    if features.shape[1] == 2:
        return knn_grid(features, config.k)
    return knn_bruteforce(features, config.k)


def forward(config: ModelConfig, params: dict[str, np.ndarray],
            features: np.ndarray):
    """Per-point logits and the tape needed for backward."""
    if features.shape[1] != N_INPUT_FEATURES:
        raise ValueError(f"expected (n, {N_INPUT_FEATURES}) features, got {features.shape}")
    x = np.ascontiguousarray(features, dtype=config.dtype)
    tape = _Tape()
    if config.arch == "dgcnn":
        logits = _forward_dgcnn(config, params, x, tape)
    else:
        logits = _forward_pointnet(config, params, x, tape)
    return logits, tape


def _forward_dgcnn(config, params, x, tape):
    static_graph = None
    if not config.dynamic_graph:
        static_graph = _graph_for(x[:, :2], config)
    edges = []
    cur = x
    for i in range(1, len(config.edge_widths) + 1):
        g = static_graph if static_graph is not None else _graph_for(cur, config)
        cur, cache = edgeconv(cur, g.neighbors, params[f"ec{i}.w"], params[f"ec{i}.b"])
        tape.steps.append(("edgeconv", f"ec{i}", cache))
        edges.append(cur)
    cat = np.concatenate(edges, axis=1)
    tape.steps.append(("concat", None, tuple(e.shape[1] for e in edges)))

    # cat branches: directly into the head concat, and through fuse+pool
    tape.steps.append(("branch_join", None, None))
    fused, cache = pointwise_linear(cat, params["fuse.w"], params["fuse.b"])
    tape.steps.append(("linear", "fuse", cache))
    fused, cache = leaky_relu(fused)
    tape.steps.append(("lrelu", None, cache))

    gfeat, cache = global_maxpool(fused)
    tape.steps.append(("branch_split", None, (cache, cat.shape[1])))
    h = np.concatenate([cat, np.broadcast_to(gfeat, (cat.shape[0], gfeat.shape[0]))], axis=1)

    return _head(config, params, h, tape)


def _forward_pointnet(config, params, x, tape):
    cur = x
    for i in range(1, len(config.local_widths) + 1):
        cur, cache = pointwise_linear(cur, params[f"mlp{i}.w"], params[f"mlp{i}.b"])
        tape.steps.append(("linear", f"mlp{i}", cache))
        cur, cache = leaky_relu(cur)
        tape.steps.append(("lrelu", None, cache))
    tape.steps.append(("branch_join", None, None))
    gfeat, cache = global_maxpool(cur)
    tape.steps.append(("branch_split", None, (cache, cur.shape[1])))
    h = np.concatenate([cur, np.broadcast_to(gfeat, (cur.shape[0], gfeat.shape[0]))], axis=1)
    return _head(config, params, h, tape)


def _head(config, params, h, tape):
    n_layers = len(config.head_widths) + 1
    for i in range(1, n_layers + 1):
        h, cache = pointwise_linear(h, params[f"head{i}.w"], params[f"head{i}.b"])
        tape.steps.append(("linear", f"head{i}", cache))
        if i < n_layers:
            h, cache = leaky_relu(h)
            tape.steps.append(("lrelu", None, cache))
    return h


def backward(config: ModelConfig, params: dict[str, np.ndarray], tape: _Tape,
             dlogits: np.ndarray) -> dict[str, np.ndarray]:
    """Parameter gradients for one recorded forward pass."""
    grads = {name: np.zeros_like(p) for name, p in params.items()}
    d = dlogits
    residuals: list[np.ndarray] = []
    for kind, name, cache in reversed(tape.steps):
        if kind == "linear":
            d, dw, db = pointwise_linear_backward(cache, d)
            grads[f"{name}.w"] += dw
            grads[f"{name}.b"] += db
        elif kind == "lrelu":
            d = leaky_relu_backward(cache, d)
        elif kind == "branch_split":
            # h = [per-point features || broadcast global]: hold the direct
            # slice until backward reaches the matching branch_join
            pool_cache, split = cache
            residuals.append(d[:, :split])
            d = global_maxpool_backward(pool_cache, d[:, split:].sum(axis=0))
        elif kind == "branch_join":
            d = d + residuals.pop()
        elif kind == "concat":
            parts = []
            offset = 0
            for width in cache:
                parts.append(d[:, offset:offset + width])
                offset += width
            d = parts
        elif kind == "edgeconv":
            # d may still be the list of per-EdgeConv slices from "concat"
            if isinstance(d, list):
                dout = d.pop()
            else:
                dout = d
            dx, dw, db = edgeconv_backward(cache, dout)
            grads[f"{name}.w"] += dw
            grads[f"{name}.b"] += db
            if isinstance(d, list) and d:
                d[-1] = d[-1] + dx
            else:
                d = dx
        else:  # pragma: no cover
            raise AssertionError(f"unknown tape step {kind}")
    return grads


def predict_logits(config: ModelConfig, params: dict[str, np.ndarray],
                   features: np.ndarray) -> np.ndarray:
    logits, _ = forward(config, params, features)
    return logits


def predict(checkpoint: Checkpoint, cloud: PointCloud,
            dynamic_graph: bool = True, polar_inputs: bool = False) -> np.ndarray:
    """Per-point class labels; argmax ties resolve to the lower class id."""
    config = config_from_checkpoint(checkpoint, dynamic_graph=dynamic_graph,
                                    polar_inputs=polar_inputs)
    features = cloud_features(cloud, polar_inputs=polar_inputs, dtype=config.dtype)
    params = {name: t for name, t in checkpoint.tensors.items()}
    logits = predict_logits(config, params, features)
    return np.argmax(logits, axis=1).astype(np.int64)


# ---------------------------------------------------------------------------
# checkpoint packing


def to_checkpoint(config: ModelConfig, params: dict[str, np.ndarray]) -> Checkpoint:
    tensors = {name: np.ascontiguousarray(p, dtype=np.float32)
               for name, p in params.items()}
    return Checkpoint(arch=config.arch, k=config.k, n_classes=config.n_classes,
                      tensors=tensors)


def config_from_checkpoint(ckpt: Checkpoint, dynamic_graph: bool = True,
                           polar_inputs: bool = False) -> ModelConfig:
    """Rebuild the architecture descriptor from tensor shapes."""
    base = ModelConfig(arch=ckpt.arch, k=ckpt.k, n_classes=ckpt.n_classes,
                       dynamic_graph=dynamic_graph, polar_inputs=polar_inputs)
    def _width(name):
        if f"{name}.b" not in ckpt.tensors:
            raise ValueError(f"checkpoint is missing tensor {name!r}")
        return ckpt.tensors[f"{name}.b"].shape[0]

    heads = []
    i = 1
    while f"head{i + 1}.w" in ckpt.tensors:  # the last head layer is the logits
        heads.append(_width(f"head{i}"))
        i += 1
    if ckpt.arch == "dgcnn":
        edges = []
        i = 1
        while f"ec{i}.w" in ckpt.tensors:
            edges.append(_width(f"ec{i}"))
            i += 1
        cfg = replace(base, edge_widths=tuple(edges), global_width=_width("fuse"),
                      head_widths=tuple(heads))
    else:
        locals_ = []
        i = 1
        while f"mlp{i}.w" in ckpt.tensors:
            locals_.append(_width(f"mlp{i}"))
            i += 1
        cfg = replace(base, local_widths=tuple(locals_), head_widths=tuple(heads))
    expected = {name for layer, _, _ in _layer_sizes(cfg)
                for name in (f"{layer}.w", f"{layer}.b")}
    if expected != set(ckpt.tensors):
        raise ValueError("checkpoint tensors do not form a known architecture")
    return cfg
