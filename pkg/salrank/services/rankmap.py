"""Predicted ranking maps from ranked, grounded objects, and random ranking maps."""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from salrank.core.maps import BoundingBox, GrayscaleMap
from salrank.models.wire import RankingMapObject
from salrank.utils.exceptions import DimensionError, DomainError

logger = logging.getLogger(__name__)

# random boxes smaller than this share of the frame are redrawn
MIN_RANDOM_BOX_SHARE = 0.01


@dataclass(frozen=True)
class PredictedRanking:
    """
    Ranked tags with their grounded boxes, aligned by index.

    A ``None`` box means grounding failed; the object keeps its rank and
    still counts towards m.
    """

    objects: Tuple[Tuple[str, int], ...]
    boxes: Tuple[Optional[BoundingBox], ...]
    grounded: bool = True

    def __post_init__(self) -> None:
        if len(self.objects) != len(self.boxes):
            raise DimensionError(
                f"{len(self.objects)} ranked objects but {len(self.boxes)} boxes"
            )
        ranks = sorted(rank for _, rank in self.objects)
        if ranks != list(range(1, len(ranks) + 1)):
            raise DomainError(f"Ranks must be exactly 1..m, got {ranks}")

    @classmethod
    def from_tags(
        cls,
        tags: Sequence[str],
        located: dict,
        grounded: bool = True,
    ) -> "PredictedRanking":
        """Rank tags by position (rank 1 first), boxes looked up by tag."""
        objects = tuple((tag, i) for i, tag in enumerate(tags, start=1))
        boxes = tuple(located.get(tag) for tag in tags)
        return cls(objects=objects, boxes=boxes, grounded=grounded)

    @property
    def m(self) -> int:
        return len(self.objects)

    def contributions(self) -> List[RankingMapObject]:
        return [
            RankingMapObject(
                tag=tag, rank=rank, rstar=rstar(rank, self.m), box=box, grounded=self.grounded
            )
            for (tag, rank), box in zip(self.objects, self.boxes)
        ]


def rstar(rank: int, m: int) -> float:
    """Intensity of rank ``rank`` among ``m``: 1 for the top object, 0 for the last."""
    if m < 1 or not 1 <= rank <= m:
        raise DomainError(f"Rank {rank} outside 1..{m}")
    if m == 1:
        return 1.0
    return 1.0 - (rank - 1) / (m - 1)


def predicted_ranking_map(pr: PredictedRanking, width: int, height: int) -> GrayscaleMap:
    """Sum r* over each located box, clamp to [0, 1]; background stays 0."""
    canvas = np.zeros((height, width))
    for (tag, rank), box in zip(pr.objects, pr.boxes):
        if box is None:
            continue
        rows, cols = box.require_within(width, height).slices()
        canvas[rows, cols] += rstar(rank, pr.m)
    return GrayscaleMap(np.clip(canvas, 0.0, 1.0))


def _random_box(rng: np.random.Generator, width: int, height: int) -> BoundingBox:
    min_area = max(1.0, MIN_RANDOM_BOX_SHARE * width * height)
    while True:
        xs = np.sort(rng.integers(0, width + 1, size=2))
        ys = np.sort(rng.integers(0, height + 1, size=2))
        box = BoundingBox.of(int(xs[0]), int(ys[0]), int(xs[1]), int(ys[1]))
        if box.area >= min_area:
            return box


def random_ranking(
    seed: Union[int, Sequence[int]],
    n_boxes: int,
    width: int,
    height: int,
    tags: Optional[Sequence[str]] = None,
) -> PredictedRanking:
    """
    Uniformly random boxes with a random rank permutation.

    ``tags`` names the boxes (defaults to ``random0..``); the boxes are not
    localization claims, so the ranking is marked ungrounded.
    """
    if n_boxes < 1:
        raise DomainError("A random ranking needs at least one box")
    names = list(tags) if tags is not None else [f"random{i}" for i in range(n_boxes)]
    if len(names) != n_boxes:
        raise DimensionError(f"{len(names)} tags for {n_boxes} random boxes")
    rng = np.random.default_rng(seed)
    boxes = tuple(_random_box(rng, width, height) for _ in range(n_boxes))
    ranks = rng.permutation(n_boxes) + 1
    objects = tuple((name, int(rank)) for name, rank in zip(names, ranks))
    return PredictedRanking(objects=objects, boxes=boxes, grounded=False)


def random_ranking_map(seed: int, n_boxes: int, width: int, height: int) -> GrayscaleMap:
    """Render a seeded random ranking."""
    return predicted_ranking_map(random_ranking(seed, n_boxes, width, height), width, height)


def write_sidecar(pr: PredictedRanking, path: Path) -> None:
    """Write the contributing objects next to a ranking-map PNG."""
    payload = [obj.model_dump() for obj in pr.contributions()]
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")
