"""Training and evaluation-time preprocessing for the segmentation models.

Preprocessing is the paper-shaped pipeline: sample n points per scan
without replacement (seeded from the scan's own seed so reruns and
perturbation studies see identical cells), label within the 25 m radius,
min-max normalize the velocities, and scale coordinates into features.

Training is plain full-batch-gradient-descent bookkeeping: deterministic
Glorot init from the seed's stream, mini-batches reshuffled per epoch
from the same stream, per-cloud gradients averaged across the batch in
order, one Adam step per batch. Everything is single-threaded and
reduction order is fixed, so a (seed, data) pair maps to one checkpoint
bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import models
from .dataio import (
    DEFAULT_LABEL_RADIUS,
    DEFAULT_N_POINTS,
    Checkpoint,
    PointCloud,
    label_points,
    normalize_velocity,
    read_manifest,
    read_scan,
    sample_points,
)
from .ops import Adam, softmax_cross_entropy
from .rng import TAG_SAMPLE, Rng, derive_seed
from .synth import LidarScan


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    loss_log: list[tuple[int, float]]  # (epoch, mean loss)
    meta: dict


def preprocess_scan(scan: LidarScan, n_points: int = DEFAULT_N_POINTS,
                    r_label: float = DEFAULT_LABEL_RADIUS,
                    with_labels: bool = True) -> PointCloud:
    """Sample, label and normalize one scan into a model-ready cloud."""
    cloud = sample_points(scan, n_points, seed=derive_seed(scan.seed, TAG_SAMPLE))
    if with_labels:
        label_points(cloud, scan.truth, r_label)
    return normalize_velocity(cloud)


def load_training_set(data_dir, n_points: int, r_label: float,
                      polar_inputs: bool = False,
                      dtype=np.float32) -> list[tuple[np.ndarray, np.ndarray]]:
    """(features, labels) pairs for every scan listed in the manifest."""
    paths = read_manifest(data_dir)
    if not paths:
        raise ValueError(f"dataset manifest in {data_dir} lists no scans")
    out = []
    for path in paths:
        cloud = preprocess_scan(read_scan(path), n_points, r_label)
        feats = models.cloud_features(cloud, polar_inputs=polar_inputs, dtype=dtype)
        out.append((feats, cloud.labels))
    return out


def train(dataset: list[tuple[np.ndarray, np.ndarray]] | str,
          config: models.ModelConfig,
          epochs: int,
          batch_size: int,
          lr: float = 0.001,
          seed: int = 0,
          n_points: int = DEFAULT_N_POINTS,
          r_label: float = DEFAULT_LABEL_RADIUS) -> TrainResult:
    """Train `config` on a dataset directory or preloaded cloud list."""
    if isinstance(dataset, (str, bytes)) or hasattr(dataset, "__fspath__"):
        dataset = load_training_set(dataset, n_points, r_label,
                                    polar_inputs=config.polar_inputs,
                                    dtype=config.dtype)
    if not dataset:
        raise ValueError("training dataset is empty")
    if batch_size < 1:
        raise ValueError("batch size must be at least 1")

    rng = Rng(seed)
    params = models.init_params(config, seed=rng.next_u64())
    adam = Adam(lr=lr)
    loss_log: list[tuple[int, float]] = []

    for epoch in range(1, epochs + 1):
        order = rng.permutation(len(dataset))
        epoch_losses = []
        for start in range(0, len(order), batch_size):
            batch = order[start:start + batch_size]
            grads = {name: np.zeros_like(p) for name, p in params.items()}
            for cloud_idx in batch:
                feats, labels = dataset[cloud_idx]
                logits, tape = models.forward(config, params, feats)
                loss, dlogits = softmax_cross_entropy(logits, labels)
                if not np.isfinite(loss):
                    raise TrainingDiverged(
                        f"non-finite loss at epoch {epoch}, cloud {cloud_idx}"
                    )
                epoch_losses.append(loss)
                for name, g in models.backward(config, params, tape, dlogits).items():
                    grads[name] += g
            for name in grads:
                grads[name] /= len(batch)
            adam.step(params, grads)
        loss_log.append((epoch, float(np.mean(epoch_losses))))

    meta = {
        "arch": config.arch,
        "epochs": epochs,
        "batch": batch_size,
        "lr": lr,
        "k": config.k,
        "points": n_points,
        "seed": seed,
    }
    return TrainResult(checkpoint=models.to_checkpoint(config, params),
                       loss_log=loss_log, meta=meta)


def point_accuracy(config: models.ModelConfig, params: dict[str, np.ndarray],
                   dataset: list[tuple[np.ndarray, np.ndarray]]) -> float:
    correct = 0
    total = 0
    for feats, labels in dataset:
        logits, _ = models.forward(config, params, feats)
        correct += int((np.argmax(logits, axis=1) == labels).sum())
        total += len(labels)
    return correct / total


def write_loss_log(path, meta: dict, rows: list[tuple[int, float]]) -> None:
    header = " ".join(f"{k}={v}" for k, v in meta.items())
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"# {header}\n")
        for epoch, loss in rows:
            f.write(f"{epoch}\t{loss:.6f}\n")
