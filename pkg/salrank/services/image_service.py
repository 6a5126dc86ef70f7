"""PNG / PGM encoding and decoding for maps and frames."""

import base64
import io
import logging
from pathlib import Path

import numpy as np
from PIL import Image

from salrank.core.maps import FixationMap, Frame, GrayscaleMap
from salrank.utils.exceptions import InputError

logger = logging.getLogger(__name__)

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def _to_uint8(values: np.ndarray, unit: bool) -> np.ndarray:
    scaled = values * 255.0 if unit else values
    return np.clip(np.rint(scaled), 0, 255).astype(np.uint8)


def map_to_png_bytes(grid: GrayscaleMap, unit: bool = True) -> bytes:
    """
    Encode a map as 8-bit grayscale PNG.

    Args:
        grid: Map to encode
        unit: True for [0, 1] maps (value = round(255 v)), False for 0-255 maps
    """
    out = io.BytesIO()
    Image.fromarray(_to_uint8(grid.values, unit)).save(out, format="PNG")
    return out.getvalue()


def write_map_png(grid: GrayscaleMap, path: Path, unit: bool = True) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(map_to_png_bytes(grid, unit=unit))


def write_map_pgm(grid: GrayscaleMap, path: Path, unit: bool = True) -> None:
    """Raw portable graymap (P5) dump for debugging."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(_to_uint8(grid.values, unit)).save(path, format="PPM")


def _open(path_or_bytes) -> Image.Image:
    try:
        if isinstance(path_or_bytes, (bytes, bytearray)):
            return Image.open(io.BytesIO(path_or_bytes))
        return Image.open(Path(path_or_bytes))
    except FileNotFoundError as e:
        raise InputError(f"Image not found: {path_or_bytes}") from e
    except Exception as e:
        raise InputError(f"Unreadable image: {e}") from e


def read_map_png(path: Path, unit: bool = True) -> GrayscaleMap:
    """Decode an 8-bit map; ``unit`` rescales 0-255 to [0, 1]."""
    with _open(path) as im:
        values = np.asarray(im.convert("L"), dtype=np.float64)
    return GrayscaleMap(values / 255.0 if unit else values)


def read_fixation_png(path: Path) -> FixationMap:
    """Any nonzero pixel is a fixation."""
    with _open(path) as im:
        values = np.asarray(im.convert("L"))
    return FixationMap.from_values(values)


def write_fixation_png(fix: FixationMap, path: Path) -> None:
    write_map_png(fix.base, path, unit=True)


def frame_to_png_bytes(frame: Frame) -> bytes:
    out = io.BytesIO()
    Image.fromarray(_to_uint8(frame.image, unit=True)).save(out, format="PNG")
    return out.getvalue()


def write_frame_png(frame: Frame, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(frame_to_png_bytes(frame))


def read_frame_png(path_or_bytes, index: int = 0) -> Frame:
    with _open(path_or_bytes) as im:
        values = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    return Frame(image=values, index=index)


def frame_to_base64(frame: Frame) -> str:
    return base64.b64encode(frame_to_png_bytes(frame)).decode("ascii")


def frame_from_base64(payload: str) -> Frame:
    """
    Decode a base64 PNG frame from a grounding request.

    Raises:
        InputError: If the payload is not base64 or not a PNG
    """
    try:
        data = base64.b64decode(payload, validate=True)
    except Exception as e:
        raise InputError(f"Frame payload is not valid base64: {e}") from e
    if not data.startswith(PNG_MAGIC):
        raise InputError("Frame payload is not a PNG image")
    return read_frame_png(data)
