"""Staged model selection with k-fold validation.

The pipeline fixes one hyperparameter group per stage: dense-layer variant
first, then optimizer, then learning rate, each stage freezing the winner
of the previous one (a greedy walk, not a grid; a full cartesian sweep is
available behind a flag). Candidates that diverge score 0 instead of
aborting the sweep. Ties go to the first-declared candidate.

Per-fold seeds are derived as seed + fold_index so folds are independent
but reproducible; reported accuracies are bit-for-bit stable under a
fixed seed.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from floraclass.errors import DataError, NumericalError
from floraclass.dataset import FoldPlan, kfold_plan
from floraclass.nn import (
    LayerSpec,
    ModelSpec,
    backward,
    forward,
    init_weights,
    separable_block,
)
from floraclass.nn.model import ModelWeights, _forward_batch, dequantize_weights
from floraclass.optim import Optimizer, OptimizerConfig

Items = list[tuple[np.ndarray, int]]

EVAL_CHUNK = 256


@dataclass(frozen=True)
class TrainConfig:
    """Everything needed to train one candidate reproducibly."""

    optimizer: OptimizerConfig
    extra_dense: int | None = None
    epochs: int = 15
    batch_size: int = 16
    seed: int = 0
    augment: bool = False
    input_side: int = 16

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise DataError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise DataError(f"batch_size must be >= 1, got {self.batch_size}")


def build_model(
    num_classes: int,
    input_side: int = 16,
    extra_dense: int | None = None,
    name: str | None = None,
) -> ModelSpec:
    """Two-block depthwise-separable classifier at desk scale.

    Stem conv (stride 2) -> separable block -> separable block (stride 2)
    -> global average pool -> optional extra dense -> classifier.
    """
    layers: list[LayerSpec] = [LayerSpec.conv(8, kernel_size=3, stride=2), LayerSpec.relu()]
    layers += separable_block(16, stride=1)
    layers += separable_block(32, stride=2)
    layers.append(LayerSpec.global_avg_pool())
    if extra_dense is not None:
        layers += [LayerSpec.dense(extra_dense), LayerSpec.relu()]
    layers += [LayerSpec.dense(num_classes), LayerSpec.softmax()]
    if name is None:
        name = f"sepnet-d{extra_dense}" if extra_dense else "sepnet"
    return ModelSpec(
        name=name,
        input_shape=(input_side, input_side, 3),
        num_classes=num_classes,
        layers=tuple(layers),
    )


def _augment_tensor(x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Seeded flip/zoom on a normalized tensor, mirroring the image pipeline."""
    from floraclass import imageprep

    px = np.clip(np.rint(x * 255.0), 0, 255).astype(np.uint8)
    img = imageprep.apply_augment(
        imageprep.Image(px),
        flip=bool(rng.random() < 0.5),
        zoom=float(rng.uniform(1.0, 1.2)),
    )
    return imageprep.to_tensor(img)


def train(
    config: TrainConfig, items: Items, num_classes: int
) -> tuple[ModelSpec, ModelWeights, list[float]]:
    """Mini-batch cross-entropy training; returns the per-epoch mean loss curve."""
    if not items:
        raise DataError("empty training set")
    spec = build_model(num_classes, config.input_side, config.extra_dense)
    weights = init_weights(spec, seed=config.seed)
    opt = Optimizer(config.optimizer)
    curve: list[float] = []
    n = len(items)
    for epoch in range(config.epochs):
        rng = np.random.default_rng([max(config.seed, 0), epoch])
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            take = order[start : start + config.batch_size]
            batch = []
            labels = []
            for j in take:
                x, y = items[int(j)]
                if config.augment:
                    x = _augment_tensor(x, rng)
                batch.append(x)
                labels.append(y)
            # overflow after divergence is expected; surfaced as NumericalError
            with np.errstate(over="ignore", invalid="ignore"):
                loss, grads = backward(spec, weights, batch, labels)
            if not np.isfinite(loss):
                raise NumericalError(f"non-finite loss at epoch {epoch}")
            opt.step(weights, grads)
            total += loss * len(batch)
        curve.append(total / n)
    return spec, weights, curve


def _predict_all(spec: ModelSpec, weights: ModelWeights, items: Items) -> np.ndarray:
    weights = dequantize_weights(weights)
    rows = []
    for start in range(0, len(items), EVAL_CHUNK):
        chunk = items[start : start + EVAL_CHUNK]
        x = np.stack([t for t, _ in chunk])
        probs, _ = _forward_batch(spec, weights, x)
        rows.append(probs)
    return np.concatenate(rows, axis=0)


def top1_accuracy(spec: ModelSpec, weights: ModelWeights, items: Items) -> float:
    """Fraction of items whose argmax class equals the label."""
    if not items:
        raise DataError("cannot evaluate on an empty set")
    probs = _predict_all(spec, weights, items)
    labels = np.array([y for _, y in items])
    return float((probs.argmax(axis=1) == labels).mean())


def topk_accuracy(spec: ModelSpec, weights: ModelWeights, items: Items, k: int) -> float:
    """Hit when the true class ranks among the k highest probabilities."""
    if not items:
        raise DataError("cannot evaluate on an empty set")
    if k < 1:
        raise DataError(f"k must be >= 1, got {k}")
    probs = _predict_all(spec, weights, items)
    labels = np.array([y for _, y in items])
    order = np.argsort(-probs, axis=1, kind="stable")
    ranks = (order == labels[:, None]).argmax(axis=1)
    return float((ranks < k).mean())


def cross_validate(
    config: TrainConfig, items: Items, num_classes: int, plan: FoldPlan
) -> list[float]:
    """Per-fold Top-1: train on all-but-fold-i, evaluate on fold i."""
    accs: list[float] = []
    for fold_i, fold in enumerate(plan.folds):
        held = set(fold)
        train_items = [it for j, it in enumerate(items) if j not in held]
        val_items = [items[j] for j in fold]
        fold_config = replace(config, seed=config.seed + fold_i)
        spec, weights, _ = train(fold_config, train_items, num_classes)
        accs.append(top1_accuracy(spec, weights, val_items))
    return accs


DEFAULT_DENSE_VARIANTS: tuple[int | None, ...] = (None, 256, 512)
DEFAULT_OPTIMIZERS: tuple[str, ...] = ("SGD", "Adam", "Adamax", "Adagrad")
DEFAULT_LEARNING_RATES: tuple[float, ...] = (0.001, 0.005, 0.01)


@dataclass(frozen=True)
class StagePlan:
    """Candidate grids for the three selection stages."""

    dense_variants: tuple[int | None, ...] = DEFAULT_DENSE_VARIANTS
    optimizer_kinds: tuple[str, ...] = DEFAULT_OPTIMIZERS
    learning_rates: tuple[float, ...] = DEFAULT_LEARNING_RATES


@dataclass
class CandidateReport:
    label: str
    fold_accuracies: list[float]
    mean: float
    std: float
    seconds_per_fold: float
    diverged: bool = False


@dataclass
class StageReport:
    name: str
    candidates: list[CandidateReport]
    winner_label: str


@dataclass
class SweepReport:
    stages: list[StageReport] = field(default_factory=list)
    winner: dict | None = None

    def to_dict(self) -> dict:
        return {
            "stages": [
                {
                    "name": s.name,
                    "winner": s.winner_label,
                    "candidates": [
                        {
                            "label": c.label,
                            "fold_accuracies": c.fold_accuracies,
                            "mean": c.mean,
                            "std": c.std,
                            "seconds_per_fold": c.seconds_per_fold,
                            "diverged": c.diverged,
                        }
                        for c in s.candidates
                    ],
                }
                for s in self.stages
            ],
            "winner": self.winner,
        }


def _describe(config: TrainConfig) -> dict:
    return {
        "extra_dense": config.extra_dense,
        "optimizer": config.optimizer.kind,
        "learning_rate": config.optimizer.learning_rate,
        "epochs": config.epochs,
        "batch_size": config.batch_size,
        "seed": config.seed,
        "augment": config.augment,
        "input_side": config.input_side,
    }


def _run_stage(
    name: str,
    candidates: list[tuple[str, TrainConfig]],
    items: Items,
    num_classes: int,
    plan: FoldPlan,
) -> tuple[StageReport, TrainConfig]:
    if not candidates:
        raise DataError(f"stage {name!r} has zero candidates")
    reports: list[CandidateReport] = []
    for label, config in candidates:
        t0 = time.perf_counter()
        diverged = False
        try:
            accs = cross_validate(config, items, num_classes, plan)
        except NumericalError:
            accs = [0.0] * plan.k
            diverged = True
        elapsed = time.perf_counter() - t0
        reports.append(
            CandidateReport(
                label=label,
                fold_accuracies=[float(a) for a in accs],
                mean=float(np.mean(accs)),
                std=float(np.std(accs)),
                seconds_per_fold=elapsed / plan.k,
                diverged=diverged,
            )
        )
    best = int(np.argmax([r.mean for r in reports]))  # first max wins ties
    return (
        StageReport(name=name, candidates=reports, winner_label=reports[best].label),
        candidates[best][1],
    )


def run_sweep(
    items: Items,
    num_classes: int,
    base: TrainConfig,
    stages: StagePlan | None = None,
    k: int = 5,
    cartesian: bool = False,
) -> tuple[SweepReport, TrainConfig]:
    """Greedy staged sweep (dense variant -> optimizer -> learning rate)."""
    stages = stages or StagePlan()
    if not items:
        raise DataError("empty dataset")
    plan = kfold_plan(len(items), k, seed=base.seed)
    report = SweepReport()

    def opt_of(kind: str, lr: float) -> OptimizerConfig:
        return OptimizerConfig(kind, learning_rate=lr)

    if cartesian:
        combos = [
            (
                f"dense-{v or 'none'}/{kind}/lr-{lr:g}",
                replace(
                    base, extra_dense=v, optimizer=opt_of(kind, lr)
                ),
            )
            for v in stages.dense_variants
            for kind in stages.optimizer_kinds
            for lr in stages.learning_rates
        ]
        stage, winner = _run_stage("cartesian", combos, items, num_classes, plan)
        report.stages.append(stage)
        report.winner = _describe(winner)
        return report, winner

    dense_cands = [
        (f"dense-{v or 'none'}", replace(base, extra_dense=v))
        for v in stages.dense_variants
    ]
    stage, winner = _run_stage("dense-variant", dense_cands, items, num_classes, plan)
    report.stages.append(stage)

    opt_cands = [
        (kind, replace(winner, optimizer=opt_of(kind, base.optimizer.learning_rate)))
        for kind in stages.optimizer_kinds
    ]
    stage, winner = _run_stage("optimizer", opt_cands, items, num_classes, plan)
    report.stages.append(stage)

    lr_cands = [
        (f"lr-{lr:g}", replace(winner, optimizer=opt_of(winner.optimizer.kind, lr)))
        for lr in stages.learning_rates
    ]
    stage, winner = _run_stage("learning-rate", lr_cands, items, num_classes, plan)
    report.stages.append(stage)

    report.winner = _describe(winner)
    return report, winner


def final_train(
    config: TrainConfig | None,
    items: Items,
    num_classes: int,
    epochs: int = 40,
) -> tuple[ModelSpec, ModelWeights, list[float]]:
    """Full training run of the selected configuration on all training items."""
    if config is None:
        raise DataError("final_train needs a winning configuration")
    return train(replace(config, epochs=epochs), items, num_classes)
