"""Probability-averaging ensembles and top-k listing.

The ensemble output is the elementwise arithmetic mean of the member
models' probability vectors (generalized to any m >= 1), computed as a
sequential sum divided by m so it is bit-identical to the obvious loop.
All members must share one class list, identical in content and order;
this is enforced at construction, never at prediction time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from floraclass.errors import DataError
from floraclass.nn import forward
from floraclass.nn.model import ModelSpec, ModelWeights


@dataclass
class EnsembleModel:
    """m member models sharing one class list."""

    members: list[tuple[ModelSpec, ModelWeights]]
    class_names: list[str]
    name: str = "ensemble"

    @staticmethod
    def from_members(
        members: list[tuple[ModelSpec, ModelWeights, list[str]]],
        name: str = "ensemble",
    ) -> "EnsembleModel":
        if not members:
            raise DataError("an ensemble needs at least one member")
        first_classes = list(members[0][2])
        first_shape = tuple(members[0][0].input_shape)
        for i, (spec, _, classes) in enumerate(members):
            if list(classes) != first_classes:
                raise DataError(
                    f"member {i} class list differs from member 0: "
                    f"{classes!r} != {first_classes!r}"
                )
            if tuple(spec.input_shape) != first_shape:
                raise DataError(
                    f"member {i} input shape {spec.input_shape} != {first_shape}"
                )
        return EnsembleModel(
            members=[(spec, weights) for spec, weights, _ in members],
            class_names=first_classes,
            name=name,
        )

    @property
    def input_side(self) -> int:
        return int(self.members[0][0].input_shape[0])


def average_probabilities(vectors: list[np.ndarray]) -> np.ndarray:
    """Sequential sum over members divided by m."""
    acc = vectors[0].copy()
    for v in vectors[1:]:
        acc = acc + v
    return acc / len(vectors)


def ensemble_predict(ens: EnsembleModel, x: np.ndarray) -> np.ndarray:
    """Mean of member probability vectors for one input tensor."""
    outputs = [forward(spec, weights, [x])[0] for spec, weights in ens.members]
    return average_probabilities(outputs)


def argmax_class(p: np.ndarray) -> tuple[int, float]:
    """Index of the maximum probability; ties break to the lowest index."""
    idx = int(np.argmax(p))
    return idx, float(p[idx])


def top_k(p: np.ndarray, k: int) -> list[tuple[int, float]]:
    """The k highest (class, probability) pairs in non-increasing order;
    k > n returns all n."""
    if k < 1:
        raise DataError(f"k must be >= 1, got {k}")
    order = np.argsort(-np.asarray(p), kind="stable")
    return [(int(i), float(p[i])) for i in order[: min(k, len(p))]]
