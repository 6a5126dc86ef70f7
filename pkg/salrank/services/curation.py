"""Data curation: fixation-based object ranking, ground-truth ranking maps, CoT records."""

import logging
import math
from typing import List, Sequence

import numpy as np

from salrank.core.maps import (
    Annotation,
    FixationMap,
    GrayscaleMap,
    VideoClip,
    count_fixations_in_box,
    minmax_scale_to_255,
)
from salrank.models.records import CurationRecord, FrameRanking, RankedObject
from salrank.utils.exceptions import DimensionError, EmptyInputError, IncompleteInputError

logger = logging.getLogger(__name__)


def rank_score(box, fix: FixationMap) -> float:
    """Fixation count inside the box divided by the square root of its area."""
    if box.area < 1:
        raise DimensionError(f"Box {box.model_dump()} has zero area")
    return count_fixations_in_box(box, fix) / math.sqrt(box.area)


def assign_ranks(objects: Sequence[Annotation], fix: FixationMap) -> List[RankedObject]:
    """
    Score and rank objects for one frame.

    Order: score descending, then larger box, then tag; ranks are 1..m.

    Raises:
        EmptyInputError: If no objects are given
    """
    if not objects:
        raise EmptyInputError("Cannot rank an empty object list")
    scored = [(tag, box, rank_score(box, fix)) for tag, box in objects]
    scored.sort(key=lambda item: (-item[2], -item[1].area, item[0]))
    return [
        RankedObject(tag=tag, box=box, score=score, rank=i)
        for i, (tag, box, score) in enumerate(scored, start=1)
    ]


def gt_ranking_map(objects: Sequence[RankedObject], width: int, height: int) -> GrayscaleMap:
    """Sum object scores over their boxes, then scale the peak to 255."""
    canvas = np.zeros((height, width))
    for obj in objects:
        rows, cols = obj.box.require_within(width, height).slices()
        canvas[rows, cols] += obj.score
    return minmax_scale_to_255(GrayscaleMap(canvas))


def rank_frames(clip: VideoClip) -> List[FrameRanking]:
    """Per-frame rankings; frames without objects get an empty list."""
    if len(clip.annotations) != clip.length:
        raise IncompleteInputError(
            f"Clip {clip.id} has annotations for {len(clip.annotations)} of {clip.length} frames"
        )
    frames = []
    for frame, objects, fix in zip(clip.frames, clip.annotations, clip.fixations):
        ranked = assign_ranks(objects, fix) if objects else []
        frames.append(FrameRanking(frame=frame.index, objects=ranked))
    return frames


def emit_record(clip: VideoClip, caption: str) -> CurationRecord:
    """
    Build the VSOR-CoT supervision record for a clip.

    Raises:
        IncompleteInputError: If any frame lacks annotations
        EmptyInputError: If the caption is blank
    """
    if not caption or not caption.strip():
        raise EmptyInputError(f"Clip {clip.id} needs a non-empty caption")
    record = CurationRecord(clip_id=clip.id, caption=caption, frames=rank_frames(clip))
    logger.debug(
        "Curated clip",
        extra={"clip_id": clip.id, "frames": clip.length},
    )
    return record


def gt_ranking_maps(clip: VideoClip, record: CurationRecord) -> List[GrayscaleMap]:
    """Ground-truth ranking map (0-255) for every frame of a curated clip."""
    return [gt_ranking_map(fr.objects, clip.width, clip.height) for fr in record.frames]
