"""Convolution, upsampling and activation primitives with hand-written gradients.

All tensors are batch-first ``(N, C, H, W)``; convolutions use square odd
kernels with same-padding, and stride 2 subsamples the stride-1 output.
"""

from typing import Tuple

import numpy as np


def conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int = 1) -> Tuple[np.ndarray, tuple]:
    n, _, h, wd = x.shape
    k = w.shape[2]
    p = k // 2
    xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p))) if p else x
    out = np.empty((n, w.shape[0], h, wd))
    out[...] = b[None, :, None, None]
    for dy in range(k):
        for dx in range(k):
            out += np.einsum(
                "oc,nchw->nohw", w[:, :, dy, dx], xp[:, :, dy:dy + h, dx:dx + wd], optimize=True
            )
    if stride > 1:
        out = out[:, :, ::stride, ::stride]
    return out, (xp, x.shape, stride)


def conv2d_backward(dout: np.ndarray, w: np.ndarray, cache: tuple) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients with respect to input, weights and bias."""
    xp, (n, _, h, wd), stride = cache
    k = w.shape[2]
    p = k // 2
    if stride > 1:
        full = np.zeros((n, w.shape[0], h, wd))
        full[:, :, ::stride, ::stride] = dout
        dout = full
    db = dout.sum(axis=(0, 2, 3))
    dw = np.empty_like(w)
    dxp = np.zeros_like(xp)
    for dy in range(k):
        for dx in range(k):
            window = (slice(None), slice(None), slice(dy, dy + h), slice(dx, dx + wd))
            dw[:, :, dy, dx] = np.einsum("nohw,nchw->oc", dout, xp[window], optimize=True)
            dxp[window] += np.einsum("oc,nohw->nchw", w[:, :, dy, dx], dout, optimize=True)
    return dxp[:, :, p:p + h, p:p + wd], dw, db


def upsample2(x: np.ndarray) -> np.ndarray:
    """Nearest-neighbour 2x upsampling."""
    return x.repeat(2, axis=2).repeat(2, axis=3)


def upsample2_backward(d: np.ndarray) -> np.ndarray:
    n, c, h, w = d.shape
    return d.reshape(n, c, h // 2, 2, w // 2, 2).sum(axis=(3, 5))


def tanh_backward(d: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Gradient through ``y = tanh(z)`` given the activation ``y``."""
    return d * (1.0 - y * y)
