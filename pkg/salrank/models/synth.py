"""Synthetic blob-world dataset specification."""

from __future__ import annotations

from typing import List, Optional

from pydantic import Field, model_validator

from salrank.core.maps import SPATIAL_STRIDE
from salrank.models.base import APIModel


class SynthSpec(APIModel):
    """Parameters of the synthetic disk dataset (all randomness flows from ``seed``)."""

    n_clips: int = Field(default=40, ge=1)
    n_test_clips: int = Field(default=10, ge=0)
    frames_per_clip: int = Field(default=8, ge=1)
    width: int = Field(default=32, ge=4)
    height: int = Field(default=32, ge=4)
    n_objects: int = Field(default=3, ge=1)
    radius_min: float = Field(default=4.0, ge=1)
    radius_max: float = Field(default=6.0, gt=0)
    max_speed: float = Field(default=1.0, ge=0)
    weights: Optional[List[float]] = None
    shuffle_weights: bool = True
    n_fix: int = Field(default=20, ge=1)
    blur_sigma: Optional[float] = Field(default=None, gt=0)
    noise_amplitude: float = Field(default=0.1, ge=0, le=0.5)
    seed: int = 0

    @model_validator(mode="after")
    def _check(self) -> "SynthSpec":
        if self.radius_min > self.radius_max:
            raise ValueError("radius_min must not exceed radius_max")
        if self.width % SPATIAL_STRIDE or self.height % SPATIAL_STRIDE:
            raise ValueError(
                f"Frame size {self.width}x{self.height} must be divisible by {SPATIAL_STRIDE}"
            )
        if 2 * self.radius_max + 1 > min(self.width, self.height):
            raise ValueError(
                f"Disks of radius {self.radius_max} do not fit a {self.width}x{self.height} frame"
            )
        if self.n_test_clips > self.n_clips:
            raise ValueError("n_test_clips cannot exceed n_clips")
        if self.weights is not None:
            if len(self.weights) != self.n_objects:
                raise ValueError("weights must have one entry per object")
            if any(w <= 0 for w in self.weights):
                raise ValueError("weights must be positive")
        return self

    @property
    def sigma(self) -> float:
        return self.blur_sigma if self.blur_sigma is not None else self.width / 30.0

    def weight_profile(self) -> List[float]:
        """Attention weights summing to 1 (halving profile when unset)."""
        raw = self.weights if self.weights is not None else [0.5 ** k for k in range(self.n_objects)]
        total = float(sum(raw))
        return [w / total for w in raw]
