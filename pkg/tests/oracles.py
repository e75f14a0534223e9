"""Independent brute-force oracles used to check the vectorized implementations.

Everything here is deliberately written as plain Python loops with its own
padding arithmetic, sharing no code with the package under test.
"""

import math

import numpy as np


def pad_for(size, k, stride, padding):
    """(pad_before, out_size) for one axis; trailing-edge extra pixel on odd pad."""
    if padding == "same":
        out = math.ceil(size / stride)
        total = max((out - 1) * stride + k - size, 0)
        return total // 2, out
    out = (size - k) // stride + 1
    return 0, out


def conv2d_oracle(x, kernel, bias, stride=1, padding="valid"):
    h, w, cin = x.shape
    kh, kw, _, cout = kernel.shape
    ph, out_h = pad_for(h, kh, stride, padding)
    pw, out_w = pad_for(w, kw, stride, padding)
    out = np.zeros((out_h, out_w, cout), dtype=np.float64)
    for oy in range(out_h):
        for ox in range(out_w):
            for oc in range(cout):
                acc = float(bias[oc])
                for i in range(kh):
                    for j in range(kw):
                        y = oy * stride + i - ph
                        xx = ox * stride + j - pw
                        if 0 <= y < h and 0 <= xx < w:
                            for ic in range(cin):
                                acc += float(x[y, xx, ic]) * float(kernel[i, j, ic, oc])
                out[oy, ox, oc] = acc
    return out


def depthwise_oracle(x, kernel, bias, stride=1, padding="valid"):
    h, w, c = x.shape
    kh, kw, _ = kernel.shape
    ph, out_h = pad_for(h, kh, stride, padding)
    pw, out_w = pad_for(w, kw, stride, padding)
    out = np.zeros((out_h, out_w, c), dtype=np.float64)
    for oy in range(out_h):
        for ox in range(out_w):
            for ch in range(c):
                acc = float(bias[ch])
                for i in range(kh):
                    for j in range(kw):
                        y = oy * stride + i - ph
                        xx = ox * stride + j - pw
                        if 0 <= y < h and 0 <= xx < w:
                            acc += float(x[y, xx, ch]) * float(kernel[i, j, ch])
                out[oy, ox, ch] = acc
    return out


def dense_oracle(x, weights, bias):
    n, m = weights.shape
    out = np.zeros(m, dtype=np.float64)
    for col in range(m):
        acc = float(bias[col])
        for row in range(n):
            acc += float(x[row]) * float(weights[row, col])
        out[col] = acc
    return out


def global_avg_pool_oracle(x):
    h, w, c = x.shape
    out = np.zeros(c, dtype=np.float64)
    for ch in range(c):
        acc = 0.0
        for y in range(h):
            for xx in range(w):
                acc += float(x[y, xx, ch])
        out[ch] = acc / (h * w)
    return out


def bilinear_oracle(pixels, out_w, out_h):
    """Half-pixel-center bilinear resample of an (H, W, 3) uint8 array."""
    src_h, src_w, _ = pixels.shape
    out = np.zeros((out_h, out_w, 3), dtype=np.uint8)
    for dy in range(out_h):
        for dx in range(out_w):
            sy = (dy + 0.5) * src_h / out_h - 0.5
            sx = (dx + 0.5) * src_w / out_w - 0.5
            y0 = math.floor(sy)
            x0 = math.floor(sx)
            fy = sy - y0
            fx = sx - x0
            for ch in range(3):
                def at(y, x):
                    y = min(max(y, 0), src_h - 1)
                    x = min(max(x, 0), src_w - 1)
                    return float(pixels[y, x, ch])

                top = at(y0, x0) * (1 - fx) + at(y0, x0 + 1) * fx
                bot = at(y0 + 1, x0) * (1 - fx) + at(y0 + 1, x0 + 1) * fx
                val = top * (1 - fy) + bot * fy
                out[dy, dx, ch] = min(max(int(round(val)), 0), 255)
    return out


def topk_oracle(probs, k):
    """Full sort by (descending probability, ascending index)."""
    order = sorted(range(len(probs)), key=lambda i: (-probs[i], i))
    return [(i, float(probs[i])) for i in order[:k]]
