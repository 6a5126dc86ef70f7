"""Map and geometry types shared by every module, plus pixel-level algebra.

Maps are stored row-major as ``values[y, x]``; boxes are half-open pixel
rectangles ``[x0, x1) x [y0, y1)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_serializer, model_validator

from salrank.utils.exceptions import DimensionError, DomainError

# encoder and U-Net both downsample twice
SPATIAL_STRIDE = 4

# channels x height x width
FeatureTensor = np.ndarray


class BoundingBox(BaseModel):
    """Half-open pixel rectangle; serializes as ``[x0, y0, x1, y1]``."""

    model_config = ConfigDict(frozen=True)

    x0: int
    y0: int
    x1: int
    y1: int

    @model_validator(mode="before")
    @classmethod
    def _from_sequence(cls, data):
        if isinstance(data, (list, tuple)):
            if len(data) != 4:
                raise ValueError("box must have exactly four coordinates")
            return dict(zip(("x0", "y0", "x1", "y1"), (int(v) for v in data)))
        return data

    @model_serializer
    def _as_list(self) -> List[int]:
        return [self.x0, self.y0, self.x1, self.y1]

    @classmethod
    def of(cls, x0: int, y0: int, x1: int, y1: int) -> "BoundingBox":
        return cls(x0=x0, y0=y0, x1=x1, y1=y1)

    @property
    def width(self) -> int:
        return max(0, self.x1 - self.x0)

    @property
    def height(self) -> int:
        return max(0, self.y1 - self.y0)

    @property
    def area(self) -> int:
        return self.width * self.height

    def clip(self, width: int, height: int) -> "BoundingBox":
        """Clip to the frame ``[0, width) x [0, height)``; may yield zero area."""
        x0 = min(max(self.x0, 0), width)
        y0 = min(max(self.y0, 0), height)
        x1 = min(max(self.x1, x0), width)
        y1 = min(max(self.y1, y0), height)
        return BoundingBox.of(x0, y0, x1, y1)

    def require_within(self, width: int, height: int) -> "BoundingBox":
        """Return self if it is a non-empty box inside the frame, else raise."""
        if not (0 <= self.x0 < self.x1 <= width and 0 <= self.y0 < self.y1 <= height):
            raise DimensionError(
                f"Box {self.model_dump()} is empty or outside a {width}x{height} frame"
            )
        return self

    def iou(self, other: "BoundingBox") -> float:
        ix = max(0, min(self.x1, other.x1) - max(self.x0, other.x0))
        iy = max(0, min(self.y1, other.y1) - max(self.y0, other.y0))
        inter = ix * iy
        union = self.area + other.area - inter
        return inter / union if union > 0 else 0.0

    def slices(self) -> Tuple[slice, slice]:
        """Row and column slices for ``values[y, x]`` indexing."""
        return slice(self.y0, self.y1), slice(self.x0, self.x1)


@dataclass(frozen=True, eq=False)
class GrayscaleMap:
    """Nonnegative ``height x width`` pixel grid (saliency, fixation and ranking maps)."""

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.values, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimensionError(f"Map must be a non-empty 2-D grid, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise DomainError("Map values must be finite")
        if np.any(arr < 0):
            raise DomainError("Map values must be nonnegative")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @classmethod
    def zeros(cls, width: int, height: int) -> "GrayscaleMap":
        return cls(np.zeros((height, width)))

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True, eq=False)
class FixationMap:
    """Binary presence map of human gaze points."""

    base: GrayscaleMap

    def __post_init__(self) -> None:
        v = self.base.values
        if not np.all((v == 0) | (v == 1)):
            raise DomainError("Fixation map values must be 0 or 1")

    @classmethod
    def from_points(cls, width: int, height: int, points: Sequence[Tuple[int, int]]) -> "FixationMap":
        """Build from ``(x, y)`` points; coincident points collapse to one pixel."""
        values = np.zeros((height, width))
        for x, y in points:
            if not (0 <= x < width and 0 <= y < height):
                raise DimensionError(f"Fixation ({x}, {y}) outside a {width}x{height} map")
            values[y, x] = 1.0
        return cls(GrayscaleMap(values))

    @classmethod
    def from_values(cls, values: np.ndarray) -> "FixationMap":
        """Any positive pixel counts as a fixation."""
        return cls(GrayscaleMap((np.asarray(values) > 0).astype(np.float64)))

    @property
    def mask(self) -> np.ndarray:
        return self.base.values > 0

    @property
    def count(self) -> int:
        return int(self.mask.sum())

    @property
    def width(self) -> int:
        return self.base.width

    @property
    def height(self) -> int:
        return self.base.height


@dataclass(frozen=True, eq=False)
class Frame:
    """RGB frame with channel-last values in [0, 1]."""

    image: np.ndarray
    index: int

    def __post_init__(self) -> None:
        arr = np.array(self.image, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise DimensionError(f"Frame must be height x width x 3, got {arr.shape}")
        if np.any(arr < 0) or np.any(arr > 1) or not np.all(np.isfinite(arr)):
            raise DomainError("Frame values must lie in [0, 1]")
        arr.flags.writeable = False
        object.__setattr__(self, "image", arr)

    @property
    def width(self) -> int:
        return self.image.shape[1]

    @property
    def height(self) -> int:
        return self.image.shape[0]


Annotation = Tuple[str, BoundingBox]


@dataclass(frozen=True, eq=False)
class VideoClip:
    """One clip: frames with per-frame fixations, saliency and object annotations."""

    id: str
    frames: List[Frame]
    fixations: List[FixationMap]
    saliency: List[GrayscaleMap]
    annotations: List[List[Annotation]] = field(default_factory=list)

    @property
    def width(self) -> int:
        return self.frames[0].width

    @property
    def height(self) -> int:
        return self.frames[0].height

    @property
    def length(self) -> int:
        return len(self.frames)

    @property
    def middle_index(self) -> int:
        return len(self.frames) // 2

    def validate(self) -> "VideoClip":
        """Check per-frame lists agree in length and spatial size."""
        if not self.frames:
            raise DimensionError(f"Clip {self.id} has no frames")
        n = len(self.frames)
        if len(self.fixations) != n or len(self.saliency) != n:
            raise DimensionError(f"Clip {self.id}: per-frame lists differ in length")
        if self.annotations and len(self.annotations) != n:
            raise DimensionError(f"Clip {self.id}: annotations cover {len(self.annotations)} of {n} frames")
        shape = (self.height, self.width)
        for frame, fix, sal in zip(self.frames, self.fixations, self.saliency):
            if (frame.height, frame.width) != shape or fix.base.shape != shape or sal.shape != shape:
                raise DimensionError(f"Clip {self.id}: frame {frame.index} differs in size")
        return self


def count_fixations_in_box(box: BoundingBox, fix: FixationMap) -> int:
    """Number of fixated pixels inside ``box``."""
    box.require_within(fix.width, fix.height)
    rows, cols = box.slices()
    return int(np.count_nonzero(fix.base.values[rows, cols] > 0))


def minmax_scale_to_255(grid: GrayscaleMap) -> GrayscaleMap:
    """Scale so the peak is 255; an all-zero map stays all-zero."""
    peak = float(grid.values.max())
    if peak <= 0.0:
        return GrayscaleMap(np.zeros(grid.shape))
    # divide first so the peak lands on exactly 255
    return GrayscaleMap(255.0 * (grid.values / peak))


def resize_nearest(grid: GrayscaleMap, height: int, width: int) -> GrayscaleMap:
    """Nearest-neighbour resize, sampling source pixel centres."""
    if height < 1 or width < 1:
        raise DimensionError(f"Cannot resize to {width}x{height}")
    if grid.shape == (height, width):
        return grid
    rows = np.minimum(((np.arange(height) + 0.5) * grid.height / height).astype(int), grid.height - 1)
    cols = np.minimum(((np.arange(width) + 0.5) * grid.width / width).astype(int), grid.width - 1)
    return GrayscaleMap(grid.values[np.ix_(rows, cols)])


def pointwise_product_concat(rank_map: GrayscaleMap, features: FeatureTensor) -> FeatureTensor:
    """Multiply every feature channel by the map, then append the map as a channel."""
    feats = np.asarray(features, dtype=np.float64)
    if feats.ndim != 3:
        raise DimensionError(f"Features must be channels x height x width, got {feats.shape}")
    if feats.shape[1:] != rank_map.shape:
        raise DimensionError(
            f"Ranking map {rank_map.shape} does not match feature grid {feats.shape[1:]}"
        )
    r = rank_map.values
    return np.concatenate([feats * r[None, :, :], r[None, :, :]], axis=0)

