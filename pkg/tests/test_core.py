"""Tests for map types, pixel algebra, configuration and logging."""

import json
import logging

import numpy as np
import pytest

from salrank.config import Settings, TrainConfig, load_kv_file, load_settings, load_train_config
from salrank.core.maps import (
    BoundingBox,
    FixationMap,
    Frame,
    GrayscaleMap,
    VideoClip,
    count_fixations_in_box,
    minmax_scale_to_255,
    pointwise_product_concat,
    resize_nearest,
)
from salrank.utils.exceptions import (
    DimensionError,
    DomainError,
    InputError,
    NumericDivergenceError,
    SpecError,
    TransportError,
)
from salrank.utils.logging_config import JSONLogFormatter, bind_run_id, current_run_id


# --------------------------
# Boxes
# --------------------------

def test_box_from_list_and_serialized_as_list():
    box = BoundingBox.model_validate([1, 2, 5, 7])
    assert (box.x0, box.y0, box.x1, box.y1) == (1, 2, 5, 7)
    assert box.model_dump() == [1, 2, 5, 7]
    assert box.area == 20


def test_box_clip_and_require_within():
    box = BoundingBox.of(-3, 2, 20, 9)
    assert box.clip(10, 8).model_dump() == [0, 2, 10, 8]
    with pytest.raises(DimensionError):
        box.require_within(10, 8)
    with pytest.raises(DimensionError):
        BoundingBox.of(2, 2, 2, 5).require_within(10, 10)


def test_box_iou():
    a = BoundingBox.of(0, 0, 4, 4)
    assert a.iou(a) == 1.0
    assert a.iou(BoundingBox.of(2, 0, 6, 4)) == pytest.approx(8 / 24)
    assert a.iou(BoundingBox.of(5, 5, 6, 6)) == 0.0


# --------------------------
# Maps
# --------------------------

def test_grayscale_map_rejects_negative_and_nonfinite():
    with pytest.raises(DomainError):
        GrayscaleMap(np.array([[0.0, -1.0]]))
    with pytest.raises(DomainError):
        GrayscaleMap(np.array([[np.nan, 1.0]]))
    with pytest.raises(DimensionError):
        GrayscaleMap(np.zeros(4))


def test_grayscale_map_is_read_only_copy():
    source = np.ones((2, 3))
    grid = GrayscaleMap(source)
    source[0, 0] = 5.0
    assert grid.values[0, 0] == 1.0
    with pytest.raises(ValueError):
        grid.values[0, 0] = 2.0
    assert (grid.width, grid.height) == (3, 2)


def test_fixation_map_must_be_binary():
    with pytest.raises(DomainError):
        FixationMap(GrayscaleMap(np.array([[0.0, 0.5]])))
    fix = FixationMap.from_points(4, 3, [(0, 0), (3, 2), (3, 2)])
    assert fix.count == 2
    with pytest.raises(DimensionError):
        FixationMap.from_points(4, 3, [(4, 0)])


def test_frame_range_check():
    with pytest.raises(DomainError):
        Frame(image=np.full((2, 2, 3), 1.5), index=0)
    with pytest.raises(DimensionError):
        Frame(image=np.zeros((2, 2)), index=0)


def test_count_fixations_in_box_half_open():
    fix = FixationMap.from_points(6, 6, [(1, 1), (3, 3), (4, 4)])
    assert count_fixations_in_box(BoundingBox.of(1, 1, 4, 4), fix) == 2
    with pytest.raises(DimensionError):
        count_fixations_in_box(BoundingBox.of(0, 0, 7, 3), fix)


def test_minmax_scale_to_255():
    scaled = minmax_scale_to_255(GrayscaleMap(np.array([[0.0, 2.0], [1.0, 4.0]])))
    assert scaled.values.max() == 255.0
    assert scaled.values[0, 1] == pytest.approx(127.5)
    assert minmax_scale_to_255(GrayscaleMap.zeros(3, 2)).values.sum() == 0.0


@pytest.mark.parametrize("peak", np.linspace(0.01, 3.0, 300))
def test_minmax_scale_peak_is_exactly_255(peak):
    scaled = minmax_scale_to_255(GrayscaleMap(np.array([[0.0, peak / 3, peak]]))).values
    assert scaled.max() == 255.0
    assert scaled.min() == 0.0


def test_resize_nearest_downsamples_blocks():
    grid = GrayscaleMap(np.kron(np.array([[1.0, 2.0], [3.0, 4.0]]), np.ones((4, 4))))
    small = resize_nearest(grid, 2, 2)
    np.testing.assert_array_equal(small.values, [[1.0, 2.0], [3.0, 4.0]])
    assert resize_nearest(grid, 8, 8) is grid


def test_pointwise_product_concat():
    rank_map = GrayscaleMap(np.array([[0.0, 1.0], [0.5, 0.25]]))
    feats = np.arange(8, dtype=float).reshape(2, 2, 2)
    out = pointwise_product_concat(rank_map, feats)
    assert out.shape == (3, 2, 2)
    np.testing.assert_array_equal(out[0], feats[0] * rank_map.values)
    np.testing.assert_array_equal(out[-1], rank_map.values)
    with pytest.raises(DimensionError):
        pointwise_product_concat(GrayscaleMap.zeros(3, 2), feats)


def test_pointwise_product_with_zero_map_zeroes_features():
    out = pointwise_product_concat(GrayscaleMap.zeros(2, 2), np.ones((4, 2, 2)))
    assert not out.any()


def test_video_clip_validate_catches_size_mismatch():
    frames = [Frame(image=np.zeros((4, 4, 3)), index=0)]
    fix = [FixationMap.from_points(4, 4, [(0, 0)])]
    with pytest.raises(DimensionError):
        VideoClip(id="c", frames=frames, fixations=fix, saliency=[GrayscaleMap.zeros(5, 4)]).validate()
    clip = VideoClip(id="c", frames=frames, fixations=fix, saliency=[GrayscaleMap.zeros(4, 4)]).validate()
    assert clip.middle_index == 0


# --------------------------
# Configuration
# --------------------------

def test_load_kv_file(tmp_path):
    path = tmp_path / "cfg.txt"
    path.write_text("# comment\nSteps = 10\n\nratio=0.25  # trailing\n", encoding="utf-8")
    assert load_kv_file(path) == {"steps": "10", "ratio": "0.25"}


def test_load_kv_file_errors(tmp_path):
    with pytest.raises(SpecError):
        load_kv_file(tmp_path / "missing.txt")
    bad = tmp_path / "bad.txt"
    bad.write_text("no equals sign\n", encoding="utf-8")
    with pytest.raises(SpecError):
        load_kv_file(bad)


def test_train_config_from_file_with_overrides(tmp_path):
    path = tmp_path / "train.txt"
    path.write_text("steps = 12\nchannels = 4, 8, 16\nlog_level = DEBUG\n", encoding="utf-8")
    config = load_train_config(path, seed=7, ratio=None)
    assert config.steps == 12
    assert config.channels == (4, 8, 16)
    assert config.seed == 7
    assert config.ratio == TrainConfig().ratio


def test_train_config_rejects_odd_time_channels():
    with pytest.raises(SpecError):
        load_train_config(None, time_channels=3)


def test_settings_from_env_and_file(monkeypatch, tmp_path):
    monkeypatch.setenv("SALRANK_MLLM_URL", "http://mllm.test/v1/vsor")
    assert Settings().mllm_url == "http://mllm.test/v1/vsor"
    path = tmp_path / "cfg.txt"
    path.write_text("ground_url = http://ground.test\nsteps = 3\n", encoding="utf-8")
    settings = load_settings(path)
    assert settings.ground_url == "http://ground.test"
    assert settings.mllm_url == "http://mllm.test/v1/vsor"


# --------------------------
# Errors and logging
# --------------------------

def test_exit_codes():
    assert DimensionError("x").exit_code == 2
    assert isinstance(SpecError("x"), InputError)
    assert NumericDivergenceError("x", last_finite_step=4).exit_code == 3
    assert TransportError("x").exit_code == 4


def test_json_formatter_includes_run_id_and_extra():
    record = logging.LogRecord("salrank.test", logging.INFO, __file__, 1, "hello %s", ("world",), None)
    record.step = 5
    with bind_run_id("run-123"):
        payload = json.loads(JSONLogFormatter().format(record))
    assert payload["message"] == "hello world"
    assert payload["severity"] == "INFO"
    assert payload["run_id"] == "run-123"
    assert payload["step"] == 5


def test_bind_run_id_restores_previous_and_replaces_malformed():
    with bind_run_id("outer") as outer:
        with bind_run_id("bad id\nwith newline") as inner:
            assert inner != "bad id\nwith newline"
            assert len(inner) == 12
            assert current_run_id() == inner
        assert current_run_id() == outer == "outer"
    assert current_run_id() == ""
