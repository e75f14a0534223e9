"""The four parameter-update rules swept during model selection.

Each optimizer mutates a ModelWeights in place and keeps its own
per-parameter state. Conventions pinned here because they vary between
published implementations:

- Adagrad adds epsilon outside the square root: w -= lr * g / (sqrt(G) + eps).
- Adamax adds epsilon to the infinity-norm denominator so a zero gradient
  produces a zero step instead of 0/0.

No weight decay, SGD momentum, or gradient clipping.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from floraclass.errors import NumericalError, ShapeError
from floraclass.nn.model import GradientSet, ModelWeights, check_congruent

SGD = "SGD"
ADAM = "Adam"
ADAMAX = "Adamax"
ADAGRAD = "Adagrad"
KINDS = (SGD, ADAM, ADAMAX, ADAGRAD)


@dataclass(frozen=True)
class OptimizerConfig:
    kind: str
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown optimizer kind {self.kind!r}; expected one of {KINDS}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("betas must lie in [0, 1)")


@dataclass
class OptimizerState:
    """Per-parameter accumulators keyed by "<layer>.<param>" plus step counter."""

    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


class Optimizer:
    """Stateful update rule; step() advances t by exactly one."""

    def __init__(self, config: OptimizerConfig):
        self.config = config
        self.state = OptimizerState()

    def step(self, weights: ModelWeights, grads: GradientSet) -> ModelWeights:
        check_congruent(weights, grads)
        cfg = self.config
        st = self.state
        st.t += 1
        for i, (wl, gl) in enumerate(zip(weights.layers, grads.layers)):
            for name, w in wl.items():
                g = gl[name]
                if not np.all(np.isfinite(g)):
                    raise NumericalError(
                        f"non-finite gradient for parameter layer{i}.{name}"
                    )
                key = f"{i}.{name}"
                if cfg.kind == SGD:
                    w -= cfg.learning_rate * g
                elif cfg.kind == ADAGRAD:
                    acc = st.v.setdefault(key, np.zeros_like(w))
                    acc += g * g
                    w -= cfg.learning_rate * g / (np.sqrt(acc) + cfg.epsilon)
                elif cfg.kind == ADAM:
                    m = st.m.setdefault(key, np.zeros_like(w))
                    v = st.v.setdefault(key, np.zeros_like(w))
                    m += (1 - cfg.beta1) * (g - m)
                    v += (1 - cfg.beta2) * (g * g - v)
                    m_hat = m / (1 - cfg.beta1**st.t)
                    v_hat = v / (1 - cfg.beta2**st.t)
                    w -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.epsilon)
                elif cfg.kind == ADAMAX:
                    m = st.m.setdefault(key, np.zeros_like(w))
                    u = st.v.setdefault(key, np.zeros_like(w))
                    m += (1 - cfg.beta1) * (g - m)
                    np.maximum(cfg.beta2 * u, np.abs(g), out=u)
                    step = (cfg.learning_rate / (1 - cfg.beta1**st.t)) * m / (u + cfg.epsilon)
                    w -= step
        return weights


def optimizer_step(
    config: OptimizerConfig,
    state: OptimizerState,
    weights: ModelWeights,
    grads: GradientSet,
) -> tuple[ModelWeights, OptimizerState]:
    """Functional wrapper over Optimizer for a single update."""
    opt = Optimizer(config)
    opt.state = state
    return opt.step(weights, grads), opt.state
