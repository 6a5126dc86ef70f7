"""Diffusion training: MSE on the x0 prediction, analytic gradients, Adam."""

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from salrank.config import TrainConfig
from salrank.core.maps import GrayscaleMap, VideoClip, resize_nearest
from salrank.models.records import CurationRecord
from salrank.services.curation import gt_ranking_map
from salrank.services.diffusion.network import (
    SPATIAL_STRIDE,
    DenoiserParams,
    NetSpec,
    condition,
    condition_backward,
    denoiser_backward,
    denoiser_forward,
    encoder_backward,
    encoder_forward,
    init_params,
    time_embedding,
)
from salrank.services.diffusion.schedule import NoiseSchedule, forward_sample, to_signed
from salrank.services.rankmap import PredictedRanking, predicted_ranking_map
from salrank.utils.exceptions import DimensionError, EmptyInputError, NumericDivergenceError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class TrainingExample:
    """
    One supervision item.

    m0: (H, W) target in [-1, 1]; frames: (F, H, W, 3) encoder input, the
    whole clip or a window of it; rank_map: (H/4, W/4) conditioning map in
    [0, 1] (zeros when unconditioned).
    """

    m0: np.ndarray
    frames: np.ndarray
    rank_map: np.ndarray


EncoderCaches = List[Tuple[List[int], tuple]]


def _encode_batch(p: Dict[str, np.ndarray], batch: Sequence[TrainingExample]) -> Tuple[np.ndarray, EncoderCaches]:
    """Encoder features in batch order; items with equal frame counts share one pass."""
    groups: Dict[int, List[int]] = {}
    for i, ex in enumerate(batch):
        groups.setdefault(len(ex.frames), []).append(i)
    feats: Optional[np.ndarray] = None
    caches: EncoderCaches = []
    for idx in groups.values():
        out, cache = encoder_forward(p, np.stack([batch[i].frames for i in idx]))
        if feats is None:
            feats = np.empty((len(batch), *out.shape[1:]))
        feats[idx] = out
        caches.append((idx, cache))
    return feats, caches


def _encode_batch_backward(
    p: Dict[str, np.ndarray], dfeats: np.ndarray, caches: EncoderCaches
) -> Dict[str, np.ndarray]:
    grads: Dict[str, np.ndarray] = {}
    for idx, cache in caches:
        for name, g in encoder_backward(p, dfeats[idx], cache).items():
            grads[name] = grads[name] + g if name in grads else g
    return grads


def training_step(
    batch: Sequence[TrainingExample],
    t_draws: Sequence[int],
    params: DenoiserParams,
    sched: NoiseSchedule,
    noise: np.ndarray,
) -> Tuple[float, np.ndarray]:
    """
    Mean over the batch of the squared error between m0 and the prediction.

    Args:
        t_draws: one step in 1..T per item
        noise: (N, H, W) standard-normal draws for the forward process

    Returns:
        (loss, gradient with respect to the flat parameter vector)

    Raises:
        NumericDivergenceError: If the loss is not finite
    """
    if not batch:
        raise EmptyInputError("training_step needs a non-empty batch")
    if len(t_draws) != len(batch) or len(noise) != len(batch):
        raise DimensionError("t_draws and noise must have one entry per batch item")

    p = params.views()
    m0 = np.stack([ex.m0 for ex in batch])
    rank_maps = np.stack([ex.rank_map for ex in batch])
    n = m0.shape[0]
    x_t = np.stack([forward_sample(m0[i], int(t_draws[i]), noise[i], sched) for i in range(n)])

    feats, enc_caches = _encode_batch(p, batch)
    cond = condition(feats, rank_maps)
    temb = time_embedding(np.asarray(t_draws), sched.T, params.spec.time_channels)
    out, cache = denoiser_forward(p, x_t[:, None], temb, cond)

    resid = m0 - out[:, 0]
    loss = float(np.sum(resid * resid) / n)
    if not math.isfinite(loss):
        raise NumericDivergenceError("Training loss is not finite")

    dout = (-2.0 / n) * resid[:, None]
    grads, dcond = denoiser_backward(p, dout, cache)
    grads.update(_encode_batch_backward(p, condition_backward(dcond, rank_maps), enc_caches))
    return loss, params.flatten(grads)


def check_gradients(
    loss_fn: Callable[[np.ndarray], float],
    vector: np.ndarray,
    grad: np.ndarray,
    coords: Sequence[int],
    h: float = 1e-5,
    floor: float = 1e-8,
) -> np.ndarray:
    """
    Relative error of ``grad`` against central differences at ``coords``.

    Denominators are floored at ``floor``, so where both gradients are
    near zero the error is the absolute difference over ``floor``.
    """
    errors = []
    for i in coords:
        plus = vector.copy()
        plus[i] += h
        minus = vector.copy()
        minus[i] -= h
        numeric = (loss_fn(plus) - loss_fn(minus)) / (2 * h)
        denom = max(abs(numeric) + abs(grad[i]), floor)
        errors.append(abs(numeric - grad[i]) / denom)
    return np.asarray(errors)


class Adam:
    """Adam optimizer over a flat parameter vector."""

    def __init__(self, size: int, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, vector: np.ndarray, grad: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1 ** self.t)
        v_hat = self.v / (1 - self.beta2 ** self.t)
        return vector - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def window_indices(index: int, length: int, window: int) -> List[int]:
    """Frame indices centred on ``index``, edge frames repeated; window 0 selects the whole clip."""
    if window == 0:
        return list(range(length))
    half = window // 2
    return [min(max(i, 0), length - 1) for i in range(index - half, index - half + window)]


def rank_map_for_frame(
    record: CurationRecord, frame: int, width: int, height: int, source: str = "rstar"
) -> GrayscaleMap:
    """Full-resolution training ranking map from curated ranks, in [0, 1]."""
    objects = record.frames[frame].objects
    if not objects:
        return GrayscaleMap.zeros(width, height)
    if source == "gt":
        return GrayscaleMap(gt_ranking_map(objects, width, height).values / 255.0)
    pr = PredictedRanking(
        objects=tuple((o.tag, o.rank) for o in objects),
        boxes=tuple(o.box for o in objects),
    )
    return predicted_ranking_map(pr, width, height)


@dataclass
class TrainingSet:
    """Per-clip arrays the batch sampler draws from."""

    frames: List[np.ndarray] = field(default_factory=list)  # (L, H, W, 3)
    targets: List[np.ndarray] = field(default_factory=list)  # (L, H, W) signed
    rank_maps: List[np.ndarray] = field(default_factory=list)  # (L, H/4, W/4)

    @classmethod
    def build(
        cls,
        clips: Sequence[VideoClip],
        records: Dict[str, CurationRecord],
        source: str = "rstar",
    ) -> "TrainingSet":
        if not clips:
            raise EmptyInputError("No training clips")
        ts = cls()
        for clip in clips:
            record = records[clip.id]
            h4, w4 = clip.height // SPATIAL_STRIDE, clip.width // SPATIAL_STRIDE
            ts.frames.append(np.stack([f.image for f in clip.frames]))
            ts.targets.append(np.stack([to_signed(s) for s in clip.saliency]))
            ts.rank_maps.append(np.stack([
                resize_nearest(rank_map_for_frame(record, i, clip.width, clip.height, source), h4, w4).values
                for i in range(clip.length)
            ]))
        return ts

    def pairs(self) -> List[Tuple[int, int]]:
        return [(c, f) for c in range(len(self.frames)) for f in range(len(self.frames[c]))]

    def example(self, clip: int, frame: int, window: int, conditioned: bool) -> TrainingExample:
        length = len(self.frames[clip])
        rank_map = self.rank_maps[clip][frame]
        return TrainingExample(
            m0=self.targets[clip][frame],
            frames=self.frames[clip][window_indices(frame, length, window)],
            rank_map=rank_map if conditioned else np.zeros_like(rank_map),
        )


@dataclass
class TrainResult:
    params: DenoiserParams
    losses: List[float]


def train(
    data: TrainingSet,
    config: TrainConfig,
    sched: Optional[NoiseSchedule] = None,
    params: Optional[DenoiserParams] = None,
) -> TrainResult:
    """
    Run ``config.steps`` Adam steps; deterministic given ``config.seed``.

    Raises:
        NumericDivergenceError: With the last finite step if the loss diverges
    """
    sched = sched or NoiseSchedule.linear(config.timesteps, config.beta_start, config.beta_end)
    rng = np.random.default_rng(config.seed)
    spec = NetSpec(
        channels=tuple(config.channels),
        feature_channels=config.feature_channels,
        time_channels=config.time_channels,
    )
    params = params or init_params(spec, rng)
    optimizer = Adam(params.size, config.learning_rate)
    pairs = data.pairs()
    losses: List[float] = []
    started = time.time()

    logger.info(
        "Training started",
        extra={"steps": config.steps, "parameters": params.size, "pairs": len(pairs), "seed": config.seed},
    )
    for step in range(1, config.steps + 1):
        picks = rng.integers(0, len(pairs), size=config.batch_size)
        conditioned = rng.random(config.batch_size) < config.ratio
        batch = [
            data.example(*pairs[j], window=config.temporal_window, conditioned=bool(c))
            for j, c in zip(picks, conditioned)
        ]
        t_draws = rng.integers(1, sched.T + 1, size=config.batch_size)
        noise = rng.standard_normal((config.batch_size, *batch[0].m0.shape))
        try:
            loss, grad = training_step(batch, t_draws, params, sched, noise)
        except NumericDivergenceError as e:
            raise NumericDivergenceError(f"Loss diverged at step {step}", last_finite_step=step - 1) from e
        vector = optimizer.step(params.vector, grad)
        if not np.all(np.isfinite(vector)):
            raise NumericDivergenceError(f"Parameters diverged at step {step}", last_finite_step=step - 1)
        params = params.with_vector(vector)
        losses.append(loss)
        if step % config.log_every == 0 or step == config.steps:
            window = losses[-config.log_every:]
            logger.info(
                "Training progress",
                extra={
                    "step": step,
                    "loss": round(float(np.mean(window)), 6),
                    "elapsed_s": round(time.time() - started, 2),
                },
            )
    return TrainResult(params=params, losses=losses)
