"""Noise schedule plus the closed-form forward process and deterministic reverse step."""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from salrank.core.maps import GrayscaleMap
from salrank.utils.exceptions import DimensionError, DomainError, SpecError

# terminal cumulative product must fall below this for a proper noise endpoint
MAX_TERMINAL_ALPHA_BAR = 0.05


@dataclass(frozen=True, eq=False)
class NoiseSchedule:
    """Per-step betas and cumulative products; ``alpha_bars[0] == 1``."""

    betas: np.ndarray
    alpha_bars: np.ndarray

    @classmethod
    def from_betas(
        cls, betas: Sequence[float], max_terminal: float = MAX_TERMINAL_ALPHA_BAR
    ) -> "NoiseSchedule":
        """
        Build a schedule from explicit betas.

        Raises:
            SpecError: If a beta is outside (0, 1) or the terminal alpha-bar is too large
        """
        b = np.asarray(betas, dtype=np.float64)
        if b.ndim != 1 or b.size < 1:
            raise SpecError("A schedule needs at least one step")
        if np.any(b <= 0) or np.any(b >= 1):
            raise SpecError("Betas must lie in (0, 1)")
        alpha_bars = np.concatenate([[1.0], np.cumprod(1.0 - b)])
        if not alpha_bars[-1] < max_terminal:
            raise SpecError(
                f"Terminal alpha-bar {alpha_bars[-1]:.4f} is not below {max_terminal}; "
                "raise beta_end or the step count"
            )
        b.flags.writeable = False
        alpha_bars.flags.writeable = False
        return cls(betas=b, alpha_bars=alpha_bars)

    @classmethod
    def linear(cls, timesteps: int = 100, beta_start: float = 1e-4, beta_end: float = 0.07) -> "NoiseSchedule":
        return cls.from_betas(np.linspace(beta_start, beta_end, timesteps))

    @property
    def T(self) -> int:
        return int(self.betas.size)

    def alpha_bar(self, t: int) -> float:
        if not 0 <= t <= self.T:
            raise DomainError(f"Timestep {t} outside 0..{self.T}")
        return float(self.alpha_bars[t])


def to_signed(grid: GrayscaleMap) -> np.ndarray:
    """Map a [0, 1] saliency map to the symmetric diffusion domain [-1, 1]."""
    return 2.0 * grid.values - 1.0


def from_signed(values: np.ndarray) -> GrayscaleMap:
    """Back from [-1, 1] to a clamped [0, 1] map."""
    return GrayscaleMap(np.clip((np.asarray(values) + 1.0) / 2.0, 0.0, 1.0))


def forward_sample(m0: np.ndarray, t: int, noise: np.ndarray, sched: NoiseSchedule) -> np.ndarray:
    """Closed-form noising: sqrt(abar_t) m0 + sqrt(1 - abar_t) noise."""
    m0 = np.asarray(m0, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    if m0.shape != noise.shape:
        raise DimensionError(f"Noise shape {noise.shape} differs from map shape {m0.shape}")
    ab = sched.alpha_bar(t)
    return np.sqrt(ab) * m0 + np.sqrt(1.0 - ab) * noise


def reverse_step(mt: np.ndarray, t: int, x0_hat: np.ndarray, sched: NoiseSchedule) -> np.ndarray:
    """
    One deterministic (eta = 0) reverse step from an x0 estimate.

    Raises:
        DomainError: If ``t`` is not in 1..T
    """
    if not 1 <= t <= sched.T:
        raise DomainError(f"Reverse step needs 1 <= t <= {sched.T}, got {t}")
    ab_t = sched.alpha_bars[t]
    ab_prev = sched.alpha_bars[t - 1]
    eps_hat = (mt - np.sqrt(ab_t) * x0_hat) / np.sqrt(1.0 - ab_t)
    return np.sqrt(ab_prev) * x0_hat + np.sqrt(1.0 - ab_prev) * eps_hat
