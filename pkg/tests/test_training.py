import numpy as np
import pytest

from vortexseg.dataio import read_checkpoint, write_checkpoint
from vortexseg.models import ModelConfig, init_params
from vortexseg.rng import Rng
from vortexseg.synth import SceneConfig, random_scene, synth_scan
from vortexseg.training import (
    TrainingDiverged,
    load_training_set,
    point_accuracy,
    preprocess_scan,
    train,
    write_loss_log,
)

TINY = ModelConfig(arch="dgcnn", k=4, edge_widths=(8, 8, 12), global_width=16,
                   head_widths=(16, 8))
GEOM_CFG = SceneConfig(noise_sigma=0.1)


def _tiny_dataset(n_scans=4, n_points=96, seed0=100):
    clouds = []
    for i in range(n_scans):
        scene = random_scene(seed0 + i, GEOM_CFG)
        scan = synth_scan(GEOM_CFG.geom, scene)
        cloud = preprocess_scan(scan, n_points=n_points)
        from vortexseg.models import cloud_features

        clouds.append((cloud_features(cloud), cloud.labels))
    return clouds


def test_zero_epochs_returns_initialization():
    dataset = _tiny_dataset()
    result = train(dataset, TINY, epochs=0, batch_size=2, seed=5)
    expected = init_params(TINY, seed=Rng(5).next_u64())
    assert result.loss_log == []
    for name, tensor in result.checkpoint.tensors.items():
        assert np.array_equal(tensor, expected[name])


def test_training_is_bit_deterministic():
    dataset = _tiny_dataset()
    a = train(dataset, TINY, epochs=2, batch_size=2, seed=9)
    b = train(dataset, TINY, epochs=2, batch_size=2, seed=9)
    for name in a.checkpoint.tensors:
        assert np.array_equal(a.checkpoint.tensors[name].view(np.uint32),
                              b.checkpoint.tensors[name].view(np.uint32))
    assert a.loss_log == b.loss_log


def test_training_loss_decreases():
    dataset = _tiny_dataset(n_scans=4, n_points=128)
    result = train(dataset, TINY, epochs=6, batch_size=2, lr=0.005, seed=3)
    losses = [loss for _, loss in result.loss_log]
    assert losses[-1] < losses[0]


def test_seed_changes_checkpoint():
    dataset = _tiny_dataset()
    a = train(dataset, TINY, epochs=1, batch_size=2, seed=1)
    b = train(dataset, TINY, epochs=1, batch_size=2, seed=2)
    assert any(
        not np.array_equal(a.checkpoint.tensors[n], b.checkpoint.tensors[n])
        for n in a.checkpoint.tensors
    )


def test_empty_dataset_rejected():
    with pytest.raises(ValueError):
        train([], TINY, epochs=1, batch_size=2, seed=0)


def test_divergence_aborts_with_diagnostic():
    dataset = _tiny_dataset(n_scans=2)
    # an absurd learning rate explodes the parameters after the first step,
    # so the next forward pass overflows and the loss goes non-finite
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises(TrainingDiverged, match="epoch"):
            train(dataset, TINY, epochs=3, batch_size=1, lr=1e6, seed=0)


def test_checkpoint_round_trips_through_disk(tmp_path):
    dataset = _tiny_dataset()
    result = train(dataset, TINY, epochs=1, batch_size=2, seed=4)
    path = tmp_path / "m.wvck"
    write_checkpoint(result.checkpoint, path)
    back = read_checkpoint(path)
    for name in result.checkpoint.tensors:
        assert np.array_equal(back.tensors[name], result.checkpoint.tensors[name])


def test_point_accuracy_on_constant_predictor():
    dataset = _tiny_dataset(n_scans=2, n_points=64)
    config = ModelConfig(arch="pointnet", local_widths=(4, 4, 4), head_widths=(4, 4))
    params = init_params(config, seed=0)
    params["head3.w"][:] = 0.0
    params["head3.b"][:] = 0.0
    acc = point_accuracy(config, params, dataset)
    expected = np.mean([np.mean(labels == 0) for _, labels in dataset])
    assert acc == pytest.approx(expected)


def test_load_training_set_from_manifest(tmp_path):
    from vortexseg.dataio import write_manifest, write_scan

    names = []
    for i in range(3):
        scene = random_scene(500 + i, GEOM_CFG)
        scan = synth_scan(GEOM_CFG.geom, scene)
        name = f"scan_{i}.wvls"
        write_scan(scan, tmp_path / name)
        names.append(name)
    write_manifest(tmp_path, names)
    dataset = load_training_set(tmp_path, n_points=64, r_label=25.0)
    assert len(dataset) == 3
    for feats, labels in dataset:
        assert feats.shape == (64, 3) and feats.dtype == np.float32
        assert labels.shape == (64,)


def test_loss_log_format(tmp_path):
    path = tmp_path / "loss.log"
    write_loss_log(path, {"arch": "dgcnn", "epochs": 2, "batch": 4},
                   [(1, 1.0986), (2, 0.9)])
    lines = path.read_text().splitlines()
    assert lines[0] == "# arch=dgcnn epochs=2 batch=4"
    assert lines[1] == "1\t1.098600"
    assert lines[2] == "2\t0.900000"
