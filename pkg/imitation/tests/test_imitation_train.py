"""Training behavior: fits, reproducibility, provenance, and failure modes."""

import csv

import numpy as np
import pytest
import torch

from imitation_harness import (
    TrainConfig,
    TrainingDivergedError,
    load_dataset,
    load_policy,
    train,
    weights_hash,
)


def test_constant_zero_expert_is_fit_to_numerical_zero(write_dataset, tmp_path):
    rng = np.random.default_rng(3)
    x = rng.uniform(-5.0, 5.0, size=(300, 2))
    path = write_dataset("zero.csv", x, np.zeros((300, 1)), np.zeros((300, 1, 2)))
    model_path = train(TrainConfig(dataset_path=str(path), epochs=500), tmp_path / "m")
    _, extras = load_policy(model_path)
    assert extras["final"]["value_mse"] <= 1e-6


def test_single_affine_piece_is_recovered_on_held_out_states(
    affine_demo, write_dataset, tmp_path
):
    x, u, jac, K, k = affine_demo
    path = write_dataset("affine.csv", x, u, jac)
    model_path = train(
        TrainConfig(dataset_path=str(path), epochs=1500), tmp_path / "m"
    )
    model, _ = load_policy(model_path)
    held_out = np.random.default_rng(9).uniform(-2.0, 2.0, size=(200, 2))
    with torch.no_grad():
        pred = model(torch.as_tensor(held_out)).numpy()
    mse = float(np.mean((pred - (held_out @ K.T + k)) ** 2))
    assert mse <= 1e-4


def test_loss_drops_two_orders_of_magnitude_on_expert_data(
    barrier_dataset, tmp_path
):
    model_path = train(
        TrainConfig(dataset_path=str(barrier_dataset), epochs=600), tmp_path / "m"
    )
    _, extras = load_policy(model_path)
    assert extras["final"]["loss"] <= extras["initial_loss"] / 100.0


def test_same_seed_gives_identical_weights(write_dataset, tmp_path):
    rng = np.random.default_rng(4)
    x = rng.uniform(-1.0, 1.0, size=(60, 2))
    path = write_dataset("tiny.csv", x, np.tanh(x[:, :1]), np.zeros((60, 1, 2)))
    cfg = TrainConfig(dataset_path=str(path), epochs=50, seed=3)
    m1, _ = load_policy(train(cfg, tmp_path / "a"))
    m2, _ = load_policy(train(cfg, tmp_path / "b"))
    assert weights_hash(m1) == weights_hash(m2)
    cfg_other = TrainConfig(dataset_path=str(path), epochs=50, seed=4)
    m3, _ = load_policy(train(cfg_other, tmp_path / "c"))
    assert weights_hash(m1) != weights_hash(m3)


def test_non_finite_loss_raises(write_dataset, tmp_path):
    rng = np.random.default_rng(5)
    x = rng.uniform(-1.0, 1.0, size=(40, 2))
    path = write_dataset("tiny.csv", x, x[:, :1], np.zeros((40, 1, 2)))
    with pytest.raises(TrainingDivergedError, match="non-finite"):
        train(
            TrainConfig(dataset_path=str(path), epochs=30, lr=1e40),
            tmp_path / "m",
        )


def test_curve_file_tracks_every_epoch(write_dataset, tmp_path):
    rng = np.random.default_rng(6)
    x = rng.uniform(-1.0, 1.0, size=(50, 2))
    path = write_dataset("tiny.csv", x, x[:, :1], np.zeros((50, 1, 2)))
    out = tmp_path / "m"
    model_path = train(TrainConfig(dataset_path=str(path), epochs=40, seed=2), out)
    _, extras = load_policy(model_path)
    with open(out / extras["curve_file"], newline="") as handle:
        rows = list(csv.reader(handle))
    assert rows[0] == ["epoch", "loss", "value_mse", "jacobian_mse"]
    assert len(rows) == 1 + 40
    losses = [float(r[1]) for r in rows[1:]]
    assert np.all(np.isfinite(losses))
    assert losses[-1] < losses[0]


def test_model_file_carries_provenance(barrier_dataset, tmp_path):
    ds = load_dataset(barrier_dataset)
    cfg = TrainConfig(dataset_path=str(barrier_dataset), epochs=30, seed=1)
    model_path = train(cfg, tmp_path / "m")
    model, extras = load_policy(model_path)
    assert extras["dataset_hash"] == ds.sha256
    assert extras["config_hash"] == cfg.config_hash()
    assert extras["weights_hash"] == weights_hash(model)
    assert extras["recipe"]["optimizer"] == "adam(full-batch)"
    assert extras["recipe"]["dtype"] == "float64"
    assert extras["recipe"]["hidden_width"] == 64
    assert "seed" not in extras["recipe"]
    assert extras["config"]["seed"] == 1
    assert extras["dataset_meta"]["policy"] == "barrier(eta=1)"


def test_config_rejects_bad_fields():
    with pytest.raises(ValueError, match="activation"):
        TrainConfig(dataset_path="x.csv", activation="sigmoid")
    with pytest.raises(ValueError, match="epochs"):
        TrainConfig(dataset_path="x.csv", epochs=0)
    with pytest.raises(ValueError, match="lr"):
        TrainConfig(dataset_path="x.csv", lr=0.0)
    with pytest.raises(ValueError, match="non-negative"):
        TrainConfig(dataset_path="x.csv", jacobian_loss_weight=-0.1)
