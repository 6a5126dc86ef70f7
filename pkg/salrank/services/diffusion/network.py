"""Conditioned encoder-decoder denoiser and the jointly trained frame encoder.

The denoiser is a three-level U-Net: two full-resolution convolutions,
a stride-2 level, a stride-2 bottleneck that receives the ranking-map
conditioning, and two nearest-upsampling stages with skip connections.
It predicts the clean map (x0-parameterization).
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from salrank.core.maps import SPATIAL_STRIDE, FeatureTensor, Frame, GrayscaleMap, pointwise_product_concat
from salrank.services.diffusion.layers import (
    conv2d,
    conv2d_backward,
    tanh_backward,
    upsample2,
    upsample2_backward,
)
from salrank.utils.exceptions import DimensionError, DomainError, EmptyInputError


@dataclass(frozen=True)
class NetSpec:
    """Architecture hyper-parameters."""

    channels: Tuple[int, int, int] = (8, 16, 32)
    feature_channels: int = 16
    time_channels: int = 4

    @property
    def cond_channels(self) -> int:
        return self.feature_channels + 1

    def manifest(self) -> List[Tuple[str, Tuple[int, ...]]]:
        c1, c2, c3 = self.channels
        f = self.feature_channels
        e1 = max(1, f // 2)
        convs = [
            ("enc1", e1, 3),
            ("enc2", f, e1),
            ("in1", c1, 1 + self.time_channels),
            ("in2", c1, c1),
            ("down1", c2, c1),
            ("mid1", c2, c2),
            ("down2", c3, c2),
            ("bott", c3, c3 + self.cond_channels),
            ("up2", c2, c3 + c2),
            ("up1", c1, c2 + c1),
            ("head", 1, c1),
        ]
        out: List[Tuple[str, Tuple[int, ...]]] = []
        for name, c_out, c_in in convs:
            out.append((f"{name}.w", (c_out, c_in, 3, 3)))
            out.append((f"{name}.b", (c_out,)))
        return out


@dataclass(frozen=True, eq=False)
class DenoiserParams:
    """Flat parameter vector plus the layer-shape manifest that slices it."""

    vector: np.ndarray
    spec: NetSpec = field(default_factory=NetSpec)

    def __post_init__(self) -> None:
        vec = np.asarray(self.vector, dtype=np.float64)
        total = sum(int(np.prod(shape)) for _, shape in self.manifest)
        if vec.ndim != 1 or vec.size != total:
            raise DimensionError(f"Parameter vector has {vec.size} entries, manifest needs {total}")
        if not np.all(np.isfinite(vec)):
            raise DomainError("Parameters must be finite")
        object.__setattr__(self, "vector", vec)

    @property
    def manifest(self) -> List[Tuple[str, Tuple[int, ...]]]:
        return self.spec.manifest()

    def views(self) -> Dict[str, np.ndarray]:
        """Named reshaped views into the flat vector."""
        out, offset = {}, 0
        for name, shape in self.manifest:
            size = int(np.prod(shape))
            out[name] = self.vector[offset:offset + size].reshape(shape)
            offset += size
        return out

    def flatten(self, grads: Dict[str, np.ndarray]) -> np.ndarray:
        """Pack a name -> gradient dict in manifest order."""
        return np.concatenate([grads[name].ravel() for name, _ in self.manifest])

    def with_vector(self, vector: np.ndarray) -> "DenoiserParams":
        return DenoiserParams(vector=vector, spec=self.spec)

    @property
    def size(self) -> int:
        return int(self.vector.size)


def init_params(spec: NetSpec, rng: np.random.Generator) -> DenoiserParams:
    """Scaled-normal weights (std = 1/sqrt(fan_in)), zero biases."""
    parts = []
    for name, shape in spec.manifest():
        if name.endswith(".w"):
            fan_in = int(np.prod(shape[1:]))
            parts.append(rng.standard_normal(int(np.prod(shape))) / np.sqrt(fan_in))
        else:
            parts.append(np.zeros(int(np.prod(shape))))
    return DenoiserParams(vector=np.concatenate(parts), spec=spec)


def time_embedding(t: np.ndarray, timesteps: int, channels: int) -> np.ndarray:
    """Sinusoidal embedding of integer steps, shape (N, channels)."""
    t = np.asarray(t, dtype=np.float64).reshape(-1)
    freqs = np.arange(1, channels // 2 + 1, dtype=np.float64)
    angles = (t[:, None] / timesteps) * (np.pi / 2.0) * freqs[None, :]
    return np.concatenate([np.sin(angles), np.cos(angles)], axis=1)


# ---------------------------------------------------------------------------
# Frame encoder
# ---------------------------------------------------------------------------

def encoder_forward(p: Dict[str, np.ndarray], frames: np.ndarray) -> Tuple[np.ndarray, tuple]:
    """
    Encode windows of frames and average over the window.

    Args:
        frames: (N, window, H, W, 3) values in [0, 1]

    Returns:
        (N, feature_channels, H/4, W/4) features and the backward cache
    """
    n, wn, h, w, _ = frames.shape
    if h % SPATIAL_STRIDE or w % SPATIAL_STRIDE:
        raise DimensionError(f"Frame size {w}x{h} must be divisible by {SPATIAL_STRIDE}")
    x = frames.transpose(0, 1, 4, 2, 3).reshape(n * wn, 3, h, w)
    z1, c1 = conv2d(x, p["enc1.w"], p["enc1.b"], stride=2)
    a1 = np.tanh(z1)
    z2, c2 = conv2d(a1, p["enc2.w"], p["enc2.b"], stride=2)
    a2 = np.tanh(z2)
    feats = a2.reshape(n, wn, *a2.shape[1:]).mean(axis=1)
    return feats, (c1, a1, c2, a2, n, wn)


def encoder_backward(p: Dict[str, np.ndarray], dfeats: np.ndarray, cache: tuple) -> Dict[str, np.ndarray]:
    c1, a1, c2, a2, n, wn = cache
    da2 = np.repeat(dfeats[:, None] / wn, wn, axis=1).reshape(a2.shape)
    da1, g2w, g2b = conv2d_backward(tanh_backward(da2, a2), p["enc2.w"], c2)
    _, g1w, g1b = conv2d_backward(tanh_backward(da1, a1), p["enc1.w"], c1)
    return {"enc1.w": g1w, "enc1.b": g1b, "enc2.w": g2w, "enc2.b": g2b}


def condition(feats: np.ndarray, rank_maps: np.ndarray) -> np.ndarray:
    """Batch version of the position-wise product and concatenation."""
    return np.stack([
        pointwise_product_concat(GrayscaleMap(r), f) for f, r in zip(feats, rank_maps)
    ])


def condition_backward(dcond: np.ndarray, rank_maps: np.ndarray) -> np.ndarray:
    """Gradient of the conditioning tensor with respect to the features."""
    return dcond[:, :-1] * rank_maps[:, None]


def encode_frames(frames: Sequence[Frame], params: DenoiserParams) -> FeatureTensor:
    """Temporal-mean encoding of a list of frames, shape (C, H/4, W/4)."""
    if not frames:
        raise EmptyInputError("encode_frames needs at least one frame")
    stack = np.stack([f.image for f in frames])[None]
    feats, _ = encoder_forward(params.views(), stack)
    return feats[0]


# ---------------------------------------------------------------------------
# Denoiser
# ---------------------------------------------------------------------------

def denoiser_forward(
    p: Dict[str, np.ndarray], x_t: np.ndarray, temb: np.ndarray, cond: np.ndarray
) -> Tuple[np.ndarray, tuple]:
    """
    Raw (unclamped) x0 prediction.

    Args:
        x_t: (N, 1, H, W) noisy maps
        temb: (N, time_channels) step embedding
        cond: (N, feature_channels + 1, H/4, W/4)
    """
    n, _, h, w = x_t.shape
    if cond.shape[0] != n or cond.shape[2:] != (h // SPATIAL_STRIDE, w // SPATIAL_STRIDE):
        raise DimensionError(f"Conditioning {cond.shape} does not fit maps {x_t.shape}")
    time = np.broadcast_to(temb[:, :, None, None], (n, temb.shape[1], h, w))
    h0 = np.concatenate([x_t, time], axis=1)

    z, k1 = conv2d(h0, p["in1.w"], p["in1.b"])
    a1 = np.tanh(z)
    z, k2 = conv2d(a1, p["in2.w"], p["in2.b"])
    a2 = np.tanh(z)
    z, k3 = conv2d(a2, p["down1.w"], p["down1.b"], stride=2)
    a3 = np.tanh(z)
    z, k4 = conv2d(a3, p["mid1.w"], p["mid1.b"])
    a4 = np.tanh(z)
    z, k5 = conv2d(a4, p["down2.w"], p["down2.b"], stride=2)
    a5 = np.tanh(z)
    z, k6 = conv2d(np.concatenate([a5, cond], axis=1), p["bott.w"], p["bott.b"])
    a6 = np.tanh(z)
    z, k7 = conv2d(np.concatenate([upsample2(a6), a4], axis=1), p["up2.w"], p["up2.b"])
    a7 = np.tanh(z)
    z, k8 = conv2d(np.concatenate([upsample2(a7), a2], axis=1), p["up1.w"], p["up1.b"])
    a8 = np.tanh(z)
    out, k9 = conv2d(a8, p["head.w"], p["head.b"])
    return out, (k1, k2, k3, k4, k5, k6, k7, k8, k9, a1, a2, a3, a4, a5, a6, a7, a8)


def denoiser_backward(
    p: Dict[str, np.ndarray], dout: np.ndarray, cache: tuple
) -> Tuple[Dict[str, np.ndarray], np.ndarray]:
    """Parameter gradients and the gradient with respect to the conditioning tensor."""
    k1, k2, k3, k4, k5, k6, k7, k8, k9, a1, a2, a3, a4, a5, a6, a7, a8 = cache
    c3 = a6.shape[1]
    c2 = a7.shape[1]
    g: Dict[str, np.ndarray] = {}

    da8, g["head.w"], g["head.b"] = conv2d_backward(dout, p["head.w"], k9)
    dcat, g["up1.w"], g["up1.b"] = conv2d_backward(tanh_backward(da8, a8), p["up1.w"], k8)
    da7 = upsample2_backward(dcat[:, :c2])
    da2 = dcat[:, c2:]
    dcat, g["up2.w"], g["up2.b"] = conv2d_backward(tanh_backward(da7, a7), p["up2.w"], k7)
    da6 = upsample2_backward(dcat[:, :c3])
    da4 = dcat[:, c3:]
    dcat, g["bott.w"], g["bott.b"] = conv2d_backward(tanh_backward(da6, a6), p["bott.w"], k6)
    da5 = dcat[:, :c3]
    dcond = dcat[:, c3:]
    d, g["down2.w"], g["down2.b"] = conv2d_backward(tanh_backward(da5, a5), p["down2.w"], k5)
    da4 = da4 + d
    da3, g["mid1.w"], g["mid1.b"] = conv2d_backward(tanh_backward(da4, a4), p["mid1.w"], k4)
    d, g["down1.w"], g["down1.b"] = conv2d_backward(tanh_backward(da3, a3), p["down1.w"], k3)
    da2 = da2 + d
    da1, g["in2.w"], g["in2.b"] = conv2d_backward(tanh_backward(da2, a2), p["in2.w"], k2)
    _, g["in1.w"], g["in1.b"] = conv2d_backward(tanh_backward(da1, a1), p["in1.w"], k1)
    return g, dcond


def denoise(
    mt: np.ndarray,
    t: int,
    cond: np.ndarray,
    params: DenoiserParams,
    timesteps: int,
) -> np.ndarray:
    """
    Predict the clean map from a noisy one, clamped to [-1, 1].

    Args:
        mt: (H, W) or (N, H, W) noisy map(s) in the signed domain
        t: diffusion step
        cond: (C, H/4, W/4) or (N, C, H/4, W/4) conditioning
        timesteps: T of the schedule, for the step embedding
    """
    single = np.ndim(mt) == 2
    x = np.asarray(mt, dtype=np.float64)[None] if single else np.asarray(mt, dtype=np.float64)
    c = np.asarray(cond, dtype=np.float64)[None] if single else np.asarray(cond, dtype=np.float64)
    if c.ndim != 4 or c.shape[1] != params.spec.cond_channels:
        raise DimensionError(
            f"Conditioning must have {params.spec.cond_channels} channels, got shape {c.shape}"
        )
    temb = time_embedding(np.full(x.shape[0], t), timesteps, params.spec.time_channels)
    out, _ = denoiser_forward(params.views(), x[:, None], temb, c)
    out = np.clip(out[:, 0], -1.0, 1.0)
    return out[0] if single else out


def parameter_count(spec: Optional[NetSpec] = None) -> int:
    spec = spec or NetSpec()
    return sum(int(np.prod(shape)) for _, shape in spec.manifest())
