"""Deterministic reverse-trajectory sampler."""

import logging
from typing import Callable, List, Sequence, Union

import numpy as np

from salrank.core.maps import GrayscaleMap
from salrank.services.diffusion.network import SPATIAL_STRIDE, DenoiserParams, denoise
from salrank.services.diffusion.schedule import NoiseSchedule, from_signed, reverse_step
from salrank.utils.exceptions import DimensionError, NumericDivergenceError

logger = logging.getLogger(__name__)

X0Predictor = Callable[[np.ndarray, int], np.ndarray]


def sample_trajectory(m_T: np.ndarray, predict_x0: X0Predictor, sched: NoiseSchedule) -> np.ndarray:
    """
    Run t = T..1 reverse steps from ``m_T`` using any x0 predictor.

    Raises:
        NumericDivergenceError: If an intermediate map is not finite
    """
    m = np.asarray(m_T, dtype=np.float64)
    for t in range(sched.T, 0, -1):
        m = reverse_step(m, t, predict_x0(m, t), sched)
        if not np.all(np.isfinite(m)):
            raise NumericDivergenceError(f"Non-finite map at reverse step {t}", last_finite_step=t + 1)
    return m


def sample(
    cond: np.ndarray, params: DenoiserParams, sched: NoiseSchedule, seed: Union[int, Sequence[int]]
) -> List[GrayscaleMap]:
    """
    Decode one saliency map per conditioning tensor.

    Args:
        cond: (N, C, H/4, W/4) conditioning, one row per frame
        seed: seeds the Gaussian starting point m_T (anything default_rng accepts)

    Returns:
        N maps in [0, 1]
    """
    cond = np.asarray(cond, dtype=np.float64)
    if cond.ndim == 3:
        cond = cond[None]
    if cond.ndim != 4:
        raise DimensionError(f"Conditioning must be (N, C, h, w), got {cond.shape}")
    n, _, h4, w4 = cond.shape
    rng = np.random.default_rng(seed)
    m_T = rng.standard_normal((n, h4 * SPATIAL_STRIDE, w4 * SPATIAL_STRIDE))
    m0 = sample_trajectory(m_T, lambda m, t: denoise(m, t, cond, params, sched.T), sched)
    return [from_signed(m) for m in m0]
