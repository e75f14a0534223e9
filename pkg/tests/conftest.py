"""Session fixtures: a small synthetic dataset and a model trained on it."""

import pytest

from floraclass.dataset import load_tensors, split_train_test, synth_dataset
from floraclass.optim import OptimizerConfig
from floraclass.selection import TrainConfig, train


@pytest.fixture(scope="session")
def synth(tmp_path_factory):
    """Small 3-class shape dataset: (root dir, dataset, train items, test items)."""
    root = tmp_path_factory.mktemp("synth")
    ds = synth_dataset(3, 40, 16, seed=7, out_dir=root)
    train_ds, test_ds = split_train_test(ds, 0.15, seed=7)
    return {
        "root": root,
        "dataset": ds,
        "train_ds": train_ds,
        "test_ds": test_ds,
        "train_items": load_tensors(train_ds, root, 16),
        "test_items": load_tensors(test_ds, root, 16),
    }


@pytest.fixture(scope="session")
def trained(synth):
    """A quickly trained classifier on the synth data: (spec, weights, classes)."""
    cfg = TrainConfig(
        optimizer=OptimizerConfig("Adagrad", learning_rate=0.01),
        epochs=12,
        batch_size=16,
        seed=7,
    )
    spec, weights, curve = train(cfg, synth["train_items"], 3)
    return {
        "spec": spec,
        "weights": weights,
        "class_names": synth["dataset"].class_names,
        "curve": curve,
        "config": cfg,
    }
