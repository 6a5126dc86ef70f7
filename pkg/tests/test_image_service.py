"""Tests for PNG/PGM encoding of maps and frames."""

import base64

import numpy as np
import pytest
from PIL import Image

from salrank.core.maps import FixationMap, Frame, GrayscaleMap
from salrank.services.image_service import (
    frame_from_base64,
    frame_to_base64,
    read_fixation_png,
    read_map_png,
    write_fixation_png,
    write_map_pgm,
    write_map_png,
)
from salrank.utils.exceptions import InputError


def test_unit_map_is_quantized_to_eight_bits(tmp_path):
    grid = GrayscaleMap(np.array([[0.0, 0.5], [1.0, 0.2]]))
    path = tmp_path / "map.png"
    write_map_png(grid, path)
    with Image.open(path) as im:
        assert im.mode == "L"
        assert np.asarray(im).tolist() == [[0, 128], [255, 51]]
    assert np.max(np.abs(read_map_png(path).values - grid.values)) <= 0.5 / 255


def test_raw_map_keeps_0_255_values(tmp_path):
    grid = GrayscaleMap(np.array([[0.0, 127.5, 255.0]]))
    path = tmp_path / "gt.png"
    write_map_png(grid, path, unit=False)
    assert read_map_png(path, unit=False).values.tolist() == [[0.0, 128.0, 255.0]]


def test_pgm_dump(tmp_path):
    path = tmp_path / "map.pgm"
    write_map_pgm(GrayscaleMap(np.array([[0.0, 1.0]])), path)
    assert path.read_bytes().startswith(b"P5")


def test_fixation_png_round_trip(tmp_path):
    fix = FixationMap.from_points(5, 4, [(0, 0), (4, 3), (2, 1)])
    path = tmp_path / "fix.png"
    write_fixation_png(fix, path)
    loaded = read_fixation_png(path)
    np.testing.assert_array_equal(loaded.base.values, fix.base.values)


def test_frame_base64_round_trip(rng):
    frame = Frame(image=rng.integers(0, 256, size=(4, 6, 3)) / 255.0, index=0)
    decoded = frame_from_base64(frame_to_base64(frame))
    np.testing.assert_allclose(decoded.image, frame.image, atol=1e-12)


def test_bad_payloads_and_files(tmp_path):
    with pytest.raises(InputError):
        frame_from_base64("not base64!")
    with pytest.raises(InputError):
        frame_from_base64(base64.b64encode(b"GIF89a....").decode())
    with pytest.raises(InputError):
        read_map_png(tmp_path / "missing.png")
    junk = tmp_path / "junk.png"
    junk.write_bytes(b"not an image")
    with pytest.raises(InputError):
        read_map_png(junk)
