"""Finite-difference verification of the analytic backward pass.

Everything is evaluated in float64: central differences at the default
step are accurate to ~1e-9 there, so a genuine backward bug shows up
orders of magnitude above the tolerance. The relative-error denominator
is floored (REL_FLOOR) so truncation noise on near-zero gradients does
not register as a mismatch. The check is only meaningful away from ReLU
kinks; random inputs land on a kink with negligible probability.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from floraclass.nn import model as m

MAX_PARAMS = 5000
REL_FLOOR = 1e-4


@dataclass
class GradCheckReport:
    max_rel_error: float
    worst_param: str
    per_param: dict[str, float]
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tol

    def __str__(self) -> str:
        verdict = "ok" if self.passed else "FAIL"
        return (
            f"grad_check {verdict}: max relative error {self.max_rel_error:.3e} "
            f"at {self.worst_param} (tol {self.tol:g})"
        )


def grad_check(
    spec: m.ModelSpec,
    weights: m.ModelWeights,
    batch: list[np.ndarray],
    true_classes: list[int],
    h: float = 1e-4,
    tol: float = 1e-3,
) -> GradCheckReport:
    """Compare backward() against central differences, parameter by parameter."""
    n_params = m.num_parameters(weights)
    if n_params > MAX_PARAMS:
        raise ValueError(
            f"grad_check is for models with <= {MAX_PARAMS} parameters, got {n_params}"
        )
    w64 = weights.astype(np.float64)
    batch64 = [x.astype(np.float64) for x in batch]
    _, analytic = m.backward(spec, w64, batch64, true_classes)

    x = np.stack(batch64)
    ys = np.asarray(true_classes)

    def loss_at() -> float:
        probs, _ = m._forward_batch(spec, w64, x)
        return m.mean_cross_entropy(probs, ys)

    per_param: dict[str, float] = {}
    worst = 0.0
    worst_name = "<none>"
    for i, layer in enumerate(w64.layers):
        for name, arr in layer.items():
            a = analytic.layers[i][name]
            flat = arr.reshape(-1)
            rel_max = 0.0
            for j in range(flat.size):
                orig = flat[j]
                flat[j] = orig + h
                lp = loss_at()
                flat[j] = orig - h
                lm = loss_at()
                flat[j] = orig
                numeric = (lp - lm) / (2 * h)
                ana = float(a.reshape(-1)[j])
                denom = max(abs(ana), abs(numeric), REL_FLOOR)
                rel = abs(ana - numeric) / denom
                rel_max = max(rel_max, rel)
            key = f"layer{i}.{name}"
            per_param[key] = rel_max
            if rel_max >= worst:
                worst = rel_max
                worst_name = key
    return GradCheckReport(
        max_rel_error=worst, worst_param=worst_name, per_param=per_param, tol=tol
    )
