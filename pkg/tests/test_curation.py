"""Tests for fixation-based ranking, ground-truth ranking maps and curation records."""

import math

import numpy as np
import pytest

from salrank.core.maps import BoundingBox, FixationMap, VideoClip
from salrank.models.records import CurationRecord, RankedObject
from salrank.services.curation import (
    assign_ranks,
    emit_record,
    gt_ranking_map,
    gt_ranking_maps,
    rank_frames,
    rank_score,
)
from salrank.utils.exceptions import DimensionError, EmptyInputError, IncompleteInputError


def _random_box(rng, w, h):
    x0, x1 = sorted(rng.choice(w + 1, size=2, replace=False))
    y0, y1 = sorted(rng.choice(h + 1, size=2, replace=False))
    return BoundingBox.of(int(x0), int(y0), int(x1), int(y1))


def test_rank_score_and_gt_map_match_brute_force(rng):
    w, h = 12, 10
    for _ in range(1000):
        fix = FixationMap.from_values(rng.random((h, w)) < 0.15)
        boxes = [_random_box(rng, w, h) for _ in range(rng.integers(1, 4))]
        objects = []
        for i, box in enumerate(boxes):
            count = 0
            for y in range(h):
                for x in range(w):
                    if box.x0 <= x < box.x1 and box.y0 <= y < box.y1 and fix.base.values[y, x] > 0:
                        count += 1
            expected = count / math.sqrt((box.x1 - box.x0) * (box.y1 - box.y0))
            score = rank_score(box, fix)
            assert score == expected
            objects.append(RankedObject(tag=f"o{i}", box=box, score=score, rank=i + 1))

        canvas = [[0.0] * w for _ in range(h)]
        for obj in objects:
            for y in range(obj.box.y0, obj.box.y1):
                for x in range(obj.box.x0, obj.box.x1):
                    canvas[y][x] += obj.score
        peak = max(max(row) for row in canvas)
        expected_map = np.array(
            [[(255.0 * v / peak if peak > 0 else 0.0) for v in row] for row in canvas]
        )
        np.testing.assert_array_equal(gt_ranking_map(objects, w, h).values, expected_map)


def test_rank_score_worked_cases():
    fix = FixationMap.from_points(10, 10, [(1, 1), (2, 2), (3, 3), (8, 8)])
    assert rank_score(BoundingBox.of(0, 0, 4, 4), fix) == 3 / 4
    assert rank_score(BoundingBox.of(5, 0, 9, 4), fix) == 0.0
    with pytest.raises(DimensionError):
        rank_score(BoundingBox.of(2, 2, 2, 6), fix)
    with pytest.raises(DimensionError):
        rank_score(BoundingBox.of(0, 0, 11, 4), fix)


def test_assign_ranks_orders_by_score_then_area_then_tag():
    fix = FixationMap.from_points(20, 20, [(1, 1), (12, 12)])
    objects = [
        ("zebra", BoundingBox.of(10, 10, 14, 14)),  # 1/4
        ("apple", BoundingBox.of(0, 0, 4, 4)),  # 1/4, same area
        ("big", BoundingBox.of(0, 0, 16, 16)),  # 2/16 = 1/8
        ("empty-large", BoundingBox.of(15, 0, 20, 5)),
        ("empty-small", BoundingBox.of(16, 16, 18, 18)),
    ]
    ranked = assign_ranks(objects, fix)
    assert [o.tag for o in ranked] == ["apple", "zebra", "big", "empty-large", "empty-small"]
    assert [o.rank for o in ranked] == [1, 2, 3, 4, 5]


def test_assign_ranks_is_a_permutation(rng):
    for _ in range(50):
        fix = FixationMap.from_values(rng.random((8, 8)) < 0.3)
        objects = [(f"t{i}", _random_box(rng, 8, 8)) for i in range(rng.integers(1, 6))]
        ranks = [o.rank for o in assign_ranks(objects, fix)]
        assert sorted(ranks) == list(range(1, len(objects) + 1))


def test_assign_ranks_empty():
    with pytest.raises(EmptyInputError):
        assign_ranks([], FixationMap.from_points(2, 2, [(0, 0)]))


def test_gt_ranking_map_all_zero_scores():
    obj = RankedObject(tag="a", box=BoundingBox.of(0, 0, 2, 2), score=0.0, rank=1)
    assert gt_ranking_map([obj], 4, 4).values.sum() == 0.0


def test_gt_ranking_map_overlap_sums_before_scaling():
    a = RankedObject(tag="a", box=BoundingBox.of(0, 0, 2, 2), score=1.0, rank=1)
    b = RankedObject(tag="b", box=BoundingBox.of(1, 1, 3, 3), score=1.0, rank=2)
    grid = gt_ranking_map([a, b], 3, 3).values
    assert grid[1, 1] == 255.0
    assert grid[0, 0] == 127.5
    assert grid[2, 0] == 0.0


def test_rank_frames_and_records(tiny_clips):
    clip = tiny_clips[0]
    record = emit_record(clip, "Two disks drift.")
    assert isinstance(record, CurationRecord)
    assert len(record.frames) == clip.length
    assert all(len(fr.objects) == 2 for fr in record.frames)
    assert CurationRecord.model_validate_json(record.to_jsonl()) == record
    maps = gt_ranking_maps(clip, record)
    assert all(m.values.max() == 255.0 for m in maps)


def test_emit_record_requires_annotations_and_caption(tiny_clips):
    clip = tiny_clips[0]
    bare = VideoClip(id=clip.id, frames=clip.frames, fixations=clip.fixations, saliency=clip.saliency)
    with pytest.raises(IncompleteInputError):
        emit_record(bare, "caption")
    with pytest.raises(EmptyInputError):
        emit_record(clip, "   ")


def test_rank_frames_empty_frame_gets_empty_ranking(tiny_clips):
    clip = tiny_clips[0]
    annotations = [[] for _ in clip.frames]
    empty = VideoClip(
        id=clip.id, frames=clip.frames, fixations=clip.fixations, saliency=clip.saliency,
        annotations=annotations,
    )
    assert all(fr.objects == [] for fr in rank_frames(empty))
