"""Declarative model descriptions and whole-network forward/backward.

A ModelSpec is an ordered list of LayerSpecs plus the input shape and class
count. Weights live outside the spec so the same architecture can carry
float32, float16, or int8 payloads. Validation happens at construction:
shape inference must succeed end to end and the network must finish with
dense(num_classes) followed by softmax.

Batch-norm is deliberately absent; convolutions carry biases instead, which
diverges from the canonical MobileNet blocks but trains fine at this scale.
Activations are plain ReLU and initialization is He-uniform with zero biases.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from floraclass.errors import ShapeError
from floraclass.nn import ops

STANDARD_CONV = "standard-conv"
DEPTHWISE_CONV = "depthwise-conv"
POINTWISE_CONV = "pointwise-conv"
RELU = "relu"
GLOBAL_AVG_POOL = "global-avg-pool"
DENSE = "dense"
SOFTMAX = "softmax"

LAYER_KINDS = frozenset(
    {STANDARD_CONV, DEPTHWISE_CONV, POINTWISE_CONV, RELU, GLOBAL_AVG_POOL, DENSE, SOFTMAX}
)

F32 = "f32"
F16 = "f16"
I8_AFFINE = "i8-affine"
PRECISIONS = (F32, F16, I8_AFFINE)


@dataclass(frozen=True)
class LayerSpec:
    """One layer of a model; only the fields for its kind are meaningful."""

    kind: str
    kernel_size: int = 3
    stride: int = 1
    padding: str = "same"
    out_channels: int = 0
    units: int = 0

    @staticmethod
    def conv(out_channels: int, kernel_size: int = 3, stride: int = 1,
             padding: str = "same") -> "LayerSpec":
        return LayerSpec(STANDARD_CONV, kernel_size=kernel_size, stride=stride,
                         padding=padding, out_channels=out_channels)

    @staticmethod
    def depthwise(kernel_size: int = 3, stride: int = 1, padding: str = "same") -> "LayerSpec":
        return LayerSpec(DEPTHWISE_CONV, kernel_size=kernel_size, stride=stride,
                         padding=padding)

    @staticmethod
    def pointwise(out_channels: int) -> "LayerSpec":
        return LayerSpec(POINTWISE_CONV, kernel_size=1, stride=1, padding="valid",
                         out_channels=out_channels)

    @staticmethod
    def relu() -> "LayerSpec":
        return LayerSpec(RELU)

    @staticmethod
    def global_avg_pool() -> "LayerSpec":
        return LayerSpec(GLOBAL_AVG_POOL)

    @staticmethod
    def dense(units: int) -> "LayerSpec":
        return LayerSpec(DENSE, units=units)

    @staticmethod
    def softmax() -> "LayerSpec":
        return LayerSpec(SOFTMAX)


def separable_block(out_channels: int, stride: int = 1) -> list[LayerSpec]:
    """Depthwise-separable composition: depthwise -> relu -> pointwise -> relu."""
    return [
        LayerSpec.depthwise(kernel_size=3, stride=stride, padding="same"),
        LayerSpec.relu(),
        LayerSpec.pointwise(out_channels),
        LayerSpec.relu(),
    ]


def _infer_one(shape: tuple[int, ...], layer: LayerSpec) -> tuple[int, ...]:
    kind = layer.kind
    if kind in (STANDARD_CONV, DEPTHWISE_CONV, POINTWISE_CONV):
        if len(shape) != 3:
            raise ShapeError(f"{kind} needs an H x W x C input, got shape {shape}")
        h, w, c = shape
        k = layer.kernel_size
        _, _, out_h = ops._pad_amounts(h, k, layer.stride, layer.padding)
        _, _, out_w = ops._pad_amounts(w, k, layer.stride, layer.padding)
        out_c = c if kind == DEPTHWISE_CONV else layer.out_channels
        if out_c < 1:
            raise ShapeError(f"{kind} needs out_channels >= 1")
        return (out_h, out_w, out_c)
    if kind == RELU:
        return shape
    if kind == GLOBAL_AVG_POOL:
        if len(shape) != 3:
            raise ShapeError(f"global-avg-pool needs an H x W x C input, got {shape}")
        return (shape[2],)
    if kind == DENSE:
        if len(shape) != 1:
            raise ShapeError(f"dense needs a flat input, got shape {shape}")
        if layer.units < 1:
            raise ShapeError("dense needs units >= 1")
        return (layer.units,)
    if kind == SOFTMAX:
        if len(shape) != 1:
            raise ShapeError(f"softmax needs a flat input, got shape {shape}")
        return shape
    raise ShapeError(f"unknown layer kind {kind!r}")


@dataclass(frozen=True)
class ModelSpec:
    """Architecture description: layer list, input shape, and class count."""

    name: str
    input_shape: tuple[int, ...]
    num_classes: int
    layers: tuple[LayerSpec, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "input_shape", tuple(self.input_shape))
        object.__setattr__(self, "layers", tuple(self.layers))
        self.validate()

    def validate(self) -> None:
        if self.num_classes < 1:
            raise ShapeError("num_classes must be >= 1")
        if len(self.layers) < 2:
            raise ShapeError("a model needs at least dense(num_classes) and softmax")
        shapes = infer_shapes(self)
        if self.layers[-1].kind != SOFTMAX:
            raise ShapeError("the final layer must be softmax")
        last_dense = self.layers[-2]
        if last_dense.kind != DENSE or last_dense.units != self.num_classes:
            raise ShapeError(
                f"the layer before softmax must be dense({self.num_classes})"
            )
        if shapes[-1] != (self.num_classes,):
            raise ShapeError(
                f"final output shape {shapes[-1]} != ({self.num_classes},)"
            )


def infer_shapes(spec: ModelSpec) -> list[tuple[int, ...]]:
    """Output shape after each layer; raises ShapeError when inference fails."""
    shape = tuple(spec.input_shape)
    out = []
    for layer in spec.layers:
        shape = _infer_one(shape, layer)
        out.append(shape)
    return out


@dataclass
class ModelWeights:
    """Per-layer parameter tensors plus a storage-precision tag.

    ``layers[i]`` maps parameter names ("kernel", "bias", "weights") to
    arrays for layer i; parameterless layers get an empty dict. For the
    i8-affine precision, ``quant`` maps "``<layer>.<param>``" to the
    (scale, zero_point) pair used to dequantize that tensor.
    """

    layers: list[dict[str, np.ndarray]]
    precision: str = F32
    quant: dict[str, tuple[float, float]] = field(default_factory=dict)

    def copy(self) -> "ModelWeights":
        return ModelWeights(
            layers=[{k: v.copy() for k, v in layer.items()} for layer in self.layers],
            precision=self.precision,
            quant=dict(self.quant),
        )

    def astype(self, dtype) -> "ModelWeights":
        if self.precision != F32:
            raise ShapeError("astype is only defined for f32 weights")
        return ModelWeights(
            layers=[{k: v.astype(dtype) for k, v in layer.items()} for layer in self.layers],
            precision=F32,
        )


@dataclass
class GradientSet:
    """One gradient array per trainable parameter, congruent with ModelWeights."""

    layers: list[dict[str, np.ndarray]]


def check_congruent(weights: ModelWeights, grads: GradientSet) -> None:
    if len(weights.layers) != len(grads.layers):
        raise ShapeError(
            f"gradient set has {len(grads.layers)} layers, weights have "
            f"{len(weights.layers)}"
        )
    for i, (wl, gl) in enumerate(zip(weights.layers, grads.layers)):
        if set(wl) != set(gl):
            raise ShapeError(f"layer {i}: parameter names {sorted(gl)} != {sorted(wl)}")
        for name, w in wl.items():
            if gl[name].shape != w.shape:
                raise ShapeError(
                    f"layer {i} parameter {name!r}: gradient shape "
                    f"{gl[name].shape} != weight shape {w.shape}"
                )


def init_weights(spec: ModelSpec, seed: int = 0) -> ModelWeights:
    """He-uniform kernels and dense matrices, zero biases, from a seeded rng."""
    rng = np.random.default_rng(seed)
    shapes = [tuple(spec.input_shape)] + infer_shapes(spec)
    layers: list[dict[str, np.ndarray]] = []
    for i, layer in enumerate(spec.layers):
        in_shape = shapes[i]
        params: dict[str, np.ndarray] = {}
        if layer.kind in (STANDARD_CONV, POINTWISE_CONV):
            k = layer.kernel_size
            cin = in_shape[2]
            cout = layer.out_channels
            limit = np.sqrt(6.0 / (k * k * cin))
            params["kernel"] = rng.uniform(
                -limit, limit, size=(k, k, cin, cout)
            ).astype(np.float32)
            params["bias"] = np.zeros(cout, dtype=np.float32)
        elif layer.kind == DEPTHWISE_CONV:
            k = layer.kernel_size
            c = in_shape[2]
            limit = np.sqrt(6.0 / (k * k))
            params["kernel"] = rng.uniform(-limit, limit, size=(k, k, c)).astype(
                np.float32
            )
            params["bias"] = np.zeros(c, dtype=np.float32)
        elif layer.kind == DENSE:
            n_in = in_shape[0]
            limit = np.sqrt(6.0 / n_in)
            params["weights"] = rng.uniform(
                -limit, limit, size=(n_in, layer.units)
            ).astype(np.float32)
            params["bias"] = np.zeros(layer.units, dtype=np.float32)
        layers.append(params)
    return ModelWeights(layers=layers)


def num_parameters(weights: ModelWeights) -> int:
    return sum(int(a.size) for layer in weights.layers for a in layer.values())


def dequantize_weights(weights: ModelWeights) -> ModelWeights:
    """Expand any storage precision back to float32 for inference."""
    if weights.precision == F32:
        return weights
    if weights.precision == F16:
        return ModelWeights(
            layers=[
                {k: v.astype(np.float32) for k, v in layer.items()}
                for layer in weights.layers
            ]
        )
    if weights.precision == I8_AFFINE:
        out: list[dict[str, np.ndarray]] = []
        for i, layer in enumerate(weights.layers):
            decoded = {}
            for name, q in layer.items():
                scale, zero_point = weights.quant[f"{i}.{name}"]
                if scale == 0.0:
                    # constant tensor: zero_point holds the value itself
                    decoded[name] = np.full(q.shape, zero_point, dtype=np.float32)
                else:
                    decoded[name] = (
                        (q.astype(np.float64) - zero_point) * scale
                    ).astype(np.float32)
            out.append(decoded)
        return ModelWeights(layers=out)
    raise ShapeError(f"unknown precision tag {weights.precision!r}")


def _check_batch(spec: ModelSpec, batch: list[np.ndarray]) -> np.ndarray:
    if not batch:
        raise ShapeError("empty batch")
    expect = tuple(spec.input_shape)
    for i, x in enumerate(batch):
        if tuple(x.shape) != expect:
            raise ShapeError(
                f"batch item {i} has shape {tuple(x.shape)}, model expects {expect}"
            )
    return np.stack(batch)


def _forward_batch(
    spec: ModelSpec, weights: ModelWeights, x: np.ndarray, keep_inputs: bool = False
) -> tuple[np.ndarray, list[np.ndarray]]:
    """Run all layers on a stacked batch; optionally keep each layer's input."""
    inputs: list[np.ndarray] = []
    for layer, params in zip(spec.layers, weights.layers):
        if keep_inputs:
            inputs.append(x)
        kind = layer.kind
        if kind in (STANDARD_CONV, POINTWISE_CONV):
            x = ops.conv2d_batch(x, params["kernel"], params["bias"], layer.stride,
                                 layer.padding)
        elif kind == DEPTHWISE_CONV:
            x = ops.depthwise_conv2d_batch(x, params["kernel"], params["bias"],
                                           layer.stride, layer.padding)
        elif kind == RELU:
            x = ops.relu(x)
        elif kind == GLOBAL_AVG_POOL:
            x = ops.global_avg_pool(x)
        elif kind == DENSE:
            x = ops.dense(x, params["weights"], params["bias"])
        elif kind == SOFTMAX:
            x = ops.softmax(x)
    return x, inputs


def mean_cross_entropy(probs: np.ndarray, true_classes: np.ndarray) -> float:
    """Mean clamped negative log likelihood over a batch of probability rows."""
    n = probs.shape[0]
    picked = np.maximum(probs[np.arange(n), true_classes], ops.PROB_FLOOR)
    return float(-np.log(picked).mean())


def forward(
    spec: ModelSpec, weights: ModelWeights, batch: list[np.ndarray]
) -> list[np.ndarray]:
    """Apply the model to a batch of input tensors, returning probability vectors."""
    weights = dequantize_weights(weights)
    x = _check_batch(spec, batch)
    probs, _ = _forward_batch(spec, weights, x)
    return [probs[i] for i in range(probs.shape[0])]


def backward(
    spec: ModelSpec,
    weights: ModelWeights,
    batch: list[np.ndarray],
    true_classes: list[int],
) -> tuple[float, GradientSet]:
    """Mean cross-entropy over the batch and its gradient for every parameter.

    The softmax + cross-entropy composite is differentiated jointly, so the
    gradient arriving at the logits is (p - onehot(y)) / batch_size.
    """
    if weights.precision != F32:
        raise ShapeError("backward requires f32 weights; dequantize first")
    if len(true_classes) != len(batch):
        raise ShapeError(
            f"{len(true_classes)} labels for a batch of {len(batch)} inputs"
        )
    for y in true_classes:
        if not 0 <= y < spec.num_classes:
            raise ShapeError(
                f"class index {y} out of range for {spec.num_classes} classes"
            )
    x = _check_batch(spec, batch)
    n = x.shape[0]
    probs, inputs = _forward_batch(spec, weights, x, keep_inputs=True)

    ys = np.asarray(true_classes)
    loss = mean_cross_entropy(probs, ys)

    onehot = np.zeros_like(probs)
    onehot[np.arange(n), ys] = 1
    grad = (probs - onehot) / np.asarray(n, dtype=probs.dtype)

    grad_layers: list[dict[str, np.ndarray]] = [dict() for _ in spec.layers]
    # walk layers in reverse, skipping softmax whose gradient is folded in above
    for i in range(len(spec.layers) - 2, -1, -1):
        layer = spec.layers[i]
        params = weights.layers[i]
        x_in = inputs[i]
        kind = layer.kind
        if kind in (STANDARD_CONV, POINTWISE_CONV):
            grad, dk, db = ops.conv2d_batch_backward(
                x_in, params["kernel"], layer.stride, layer.padding, grad
            )
            grad_layers[i] = {"kernel": dk, "bias": db}
        elif kind == DEPTHWISE_CONV:
            grad, dk, db = ops.depthwise_conv2d_batch_backward(
                x_in, params["kernel"], layer.stride, layer.padding, grad
            )
            grad_layers[i] = {"kernel": dk, "bias": db}
        elif kind == RELU:
            grad = ops.relu_backward(x_in, grad)
        elif kind == GLOBAL_AVG_POOL:
            grad = ops.global_avg_pool_backward(x_in.shape, grad)
        elif kind == DENSE:
            grad, dw, db = ops.dense_backward(x_in, params["weights"], grad)
            grad_layers[i] = {"weights": dw, "bias": db}
    return loss, GradientSet(layers=grad_layers)


def with_name(spec: ModelSpec, name: str) -> ModelSpec:
    return replace(spec, name=name)
