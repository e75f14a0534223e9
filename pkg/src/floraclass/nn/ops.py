"""Layer operations with matching backward passes.

Feature maps are laid out height x width x channels; batched internals add
a leading batch axis. All ops preserve the floating dtype of their inputs,
so the same code runs in float32 for training and float64 for gradient
checking.

Padding follows the "same = zero-pad so H' = ceil(H / stride)" convention;
when the total padding is odd the extra pixel goes to the trailing edge.
"""

from __future__ import annotations

import numpy as np

from floraclass.errors import ShapeError


def _pad_amounts(size: int, k: int, stride: int, padding: str) -> tuple[int, int, int]:
    """Return (pad_before, pad_after, out_size) for one spatial axis."""
    if stride < 1:
        raise ShapeError(f"stride must be >= 1, got {stride}")
    if padding == "same":
        out = -(-size // stride)  # ceil division
        total = max((out - 1) * stride + k - size, 0)
        before = total // 2
        return before, total - before, out
    if padding == "valid":
        out = (size - k) // stride + 1
        if out < 1:
            raise ShapeError(
                f"valid convolution of size {size} with kernel {k} and stride "
                f"{stride} yields empty output"
            )
        return 0, 0, out
    raise ShapeError(f"unknown padding mode {padding!r} (expected 'same' or 'valid')")


def _pad_spatial(x: np.ndarray, ph: tuple[int, int], pw: tuple[int, int]) -> np.ndarray:
    if ph == (0, 0) and pw == (0, 0):
        return x
    return np.pad(x, ((0, 0), ph, pw, (0, 0)), mode="constant")


def _window(x_pad: np.ndarray, i: int, j: int, out_h: int, out_w: int, stride: int) -> np.ndarray:
    """Slice of padded input seen by kernel tap (i, j) across all output positions."""
    return x_pad[
        :,
        i : i + (out_h - 1) * stride + 1 : stride,
        j : j + (out_w - 1) * stride + 1 : stride,
        :,
    ]


# --- standard convolution (cross-correlation) ---

def conv2d_batch(
    x: np.ndarray, kernel: np.ndarray, bias: np.ndarray, stride: int, padding: str
) -> np.ndarray:
    """Batched conv: x (N,H,W,Cin), kernel (Kh,Kw,Cin,Cout) -> (N,H',W',Cout)."""
    if x.ndim != 4 or kernel.ndim != 4:
        raise ShapeError(
            f"conv2d expects 4-d input and kernel, got {x.shape} and {kernel.shape}"
        )
    kh, kw, cin, cout = kernel.shape
    if x.shape[3] != cin:
        raise ShapeError(
            f"conv2d channel mismatch: input has {x.shape[3]} channels, "
            f"kernel expects {cin}"
        )
    if bias.shape != (cout,):
        raise ShapeError(f"conv2d bias shape {bias.shape} != ({cout},)")
    n, h, w, _ = x.shape
    ph0, ph1, out_h = _pad_amounts(h, kh, stride, padding)
    pw0, pw1, out_w = _pad_amounts(w, kw, stride, padding)
    x_pad = _pad_spatial(x, (ph0, ph1), (pw0, pw1))
    out = np.zeros((n, out_h, out_w, cout), dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            out += _window(x_pad, i, j, out_h, out_w, stride) @ kernel[i, j]
    return out + bias.astype(x.dtype)


def conv2d_batch_backward(
    x: np.ndarray,
    kernel: np.ndarray,
    stride: int,
    padding: str,
    dout: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients (dx, dkernel, dbias) of conv2d_batch."""
    kh, kw, cin, cout = kernel.shape
    n, h, w, _ = x.shape
    ph0, ph1, out_h = _pad_amounts(h, kh, stride, padding)
    pw0, pw1, out_w = _pad_amounts(w, kw, stride, padding)
    x_pad = _pad_spatial(x, (ph0, ph1), (pw0, pw1))
    dx_pad = np.zeros_like(x_pad)
    dkernel = np.zeros_like(kernel)
    for i in range(kh):
        for j in range(kw):
            win = _window(x_pad, i, j, out_h, out_w, stride)
            dkernel[i, j] = np.einsum("nhwc,nhwo->co", win, dout)
            dx_pad[
                :,
                i : i + (out_h - 1) * stride + 1 : stride,
                j : j + (out_w - 1) * stride + 1 : stride,
                :,
            ] += dout @ kernel[i, j].T
    dbias = dout.sum(axis=(0, 1, 2))
    dx = dx_pad[:, ph0 : ph0 + h, pw0 : pw0 + w, :]
    return dx, dkernel, dbias


def conv2d(
    x: np.ndarray,
    kernel: np.ndarray,
    bias: np.ndarray,
    stride: int = 1,
    padding: str = "valid",
) -> np.ndarray:
    """Single-image conv: x (H,W,Cin), kernel (Kh,Kw,Cin,Cout) -> (H',W',Cout)."""
    if x.ndim != 3:
        raise ShapeError(f"conv2d expects an H x W x C input, got shape {x.shape}")
    return conv2d_batch(x[None], kernel, bias, stride, padding)[0]


# --- depthwise convolution ---

def depthwise_conv2d_batch(
    x: np.ndarray, kernel: np.ndarray, bias: np.ndarray, stride: int, padding: str
) -> np.ndarray:
    """Per-channel conv: x (N,H,W,C), kernel (Kh,Kw,C) -> (N,H',W',C)."""
    if x.ndim != 4 or kernel.ndim != 3:
        raise ShapeError(
            f"depthwise_conv2d expects 4-d input and 3-d kernel, got "
            f"{x.shape} and {kernel.shape}"
        )
    kh, kw, c = kernel.shape
    if x.shape[3] != c:
        raise ShapeError(
            f"depthwise_conv2d channel mismatch: input has {x.shape[3]} channels, "
            f"kernel has {c}"
        )
    if bias.shape != (c,):
        raise ShapeError(f"depthwise_conv2d bias shape {bias.shape} != ({c},)")
    n, h, w, _ = x.shape
    ph0, ph1, out_h = _pad_amounts(h, kh, stride, padding)
    pw0, pw1, out_w = _pad_amounts(w, kw, stride, padding)
    x_pad = _pad_spatial(x, (ph0, ph1), (pw0, pw1))
    out = np.zeros((n, out_h, out_w, c), dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            out += _window(x_pad, i, j, out_h, out_w, stride) * kernel[i, j]
    return out + bias.astype(x.dtype)


def depthwise_conv2d_batch_backward(
    x: np.ndarray,
    kernel: np.ndarray,
    stride: int,
    padding: str,
    dout: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients (dx, dkernel, dbias) of depthwise_conv2d_batch."""
    kh, kw, c = kernel.shape
    n, h, w, _ = x.shape
    ph0, ph1, out_h = _pad_amounts(h, kh, stride, padding)
    pw0, pw1, out_w = _pad_amounts(w, kw, stride, padding)
    x_pad = _pad_spatial(x, (ph0, ph1), (pw0, pw1))
    dx_pad = np.zeros_like(x_pad)
    dkernel = np.zeros_like(kernel)
    for i in range(kh):
        for j in range(kw):
            win = _window(x_pad, i, j, out_h, out_w, stride)
            dkernel[i, j] = (win * dout).sum(axis=(0, 1, 2))
            dx_pad[
                :,
                i : i + (out_h - 1) * stride + 1 : stride,
                j : j + (out_w - 1) * stride + 1 : stride,
                :,
            ] += dout * kernel[i, j]
    dbias = dout.sum(axis=(0, 1, 2))
    dx = dx_pad[:, ph0 : ph0 + h, pw0 : pw0 + w, :]
    return dx, dkernel, dbias


def depthwise_conv2d(
    x: np.ndarray,
    kernel: np.ndarray,
    bias: np.ndarray,
    stride: int = 1,
    padding: str = "valid",
) -> np.ndarray:
    """Single-image depthwise conv: x (H,W,C), kernel (Kh,Kw,C) -> (H',W',C)."""
    if x.ndim != 3:
        raise ShapeError(
            f"depthwise_conv2d expects an H x W x C input, got shape {x.shape}"
        )
    return depthwise_conv2d_batch(x[None], kernel, bias, stride, padding)[0]


# --- elementwise and head ops ---

def relu(x: np.ndarray) -> np.ndarray:
    """Elementwise max(0, x)."""
    return np.maximum(x, 0)


def relu_backward(x: np.ndarray, dout: np.ndarray) -> np.ndarray:
    return dout * (x > 0)


def global_avg_pool(x: np.ndarray) -> np.ndarray:
    """Mean over the spatial axes: (H,W,C) -> (C,) or (N,H,W,C) -> (N,C)."""
    if x.ndim == 3:
        return x.mean(axis=(0, 1))
    if x.ndim == 4:
        return x.mean(axis=(1, 2))
    raise ShapeError(f"global_avg_pool expects a 3-d or 4-d input, got {x.shape}")


def global_avg_pool_backward(x_shape: tuple[int, ...], dout: np.ndarray) -> np.ndarray:
    n, h, w, c = x_shape
    return np.broadcast_to(dout[:, None, None, :], x_shape) / np.asarray(
        h * w, dtype=dout.dtype
    )


def dense(x: np.ndarray, weights: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Affine map x . weights + bias; x (N_in,) or (N, N_in), weights (N_in, M)."""
    if weights.ndim != 2:
        raise ShapeError(f"dense expects a 2-d weight matrix, got {weights.shape}")
    if x.shape[-1] != weights.shape[0]:
        raise ShapeError(
            f"dense shape mismatch: input width {x.shape[-1]} != weight rows "
            f"{weights.shape[0]}"
        )
    if bias.shape != (weights.shape[1],):
        raise ShapeError(f"dense bias shape {bias.shape} != ({weights.shape[1]},)")
    return x @ weights + bias


def dense_backward(
    x: np.ndarray, weights: np.ndarray, dout: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients (dx, dweights, dbias) of dense for batched x (N, N_in)."""
    dweights = x.T @ dout
    dbias = dout.sum(axis=0)
    dx = dout @ weights.T
    return dx, dweights, dbias


def softmax(logits: np.ndarray) -> np.ndarray:
    """Exp-normalize along the last axis, stabilized by max subtraction."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


PROB_FLOOR = 1e-12


def cross_entropy(pred: np.ndarray, true_class: int) -> float:
    """Negative log probability of the true class, clamped at PROB_FLOOR."""
    if not 0 <= true_class < pred.shape[-1]:
        raise ShapeError(
            f"class index {true_class} out of range for {pred.shape[-1]} classes"
        )
    return float(-np.log(max(float(pred[true_class]), PROB_FLOOR)))
