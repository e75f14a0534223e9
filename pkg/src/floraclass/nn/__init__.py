"""Minimal trainable neural-network engine.

Provides the layer set needed for small depthwise-separable image
classifiers: standard/depthwise/pointwise convolutions, ReLU, global
average pooling, dense layers and softmax, together with forward and
backward passes over a declarative model description.
"""

from floraclass.nn.ops import (
    conv2d,
    cross_entropy,
    dense,
    depthwise_conv2d,
    global_avg_pool,
    relu,
    softmax,
)
from floraclass.nn.model import (
    GradientSet,
    LayerSpec,
    ModelSpec,
    ModelWeights,
    backward,
    dequantize_weights,
    forward,
    infer_shapes,
    init_weights,
    num_parameters,
    separable_block,
)
from floraclass.nn.gradcheck import GradCheckReport, grad_check

__all__ = [
    "conv2d",
    "depthwise_conv2d",
    "relu",
    "global_avg_pool",
    "dense",
    "softmax",
    "cross_entropy",
    "LayerSpec",
    "ModelSpec",
    "ModelWeights",
    "GradientSet",
    "infer_shapes",
    "init_weights",
    "num_parameters",
    "separable_block",
    "forward",
    "backward",
    "dequantize_weights",
    "grad_check",
    "GradCheckReport",
]
