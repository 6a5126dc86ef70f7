"""Synthetic blob-world generator: moving disks, mixture fixations, blurred saliency."""

import logging
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np
from pydantic import ValidationError
from scipy.ndimage import gaussian_filter

from salrank.config import load_kv_file
from salrank.core.maps import BoundingBox, FixationMap, Frame, GrayscaleMap, VideoClip
from salrank.models.synth import SynthSpec
from salrank.utils.exceptions import SpecError

logger = logging.getLogger(__name__)


def load_synth_spec(path: Path) -> SynthSpec:
    """
    Read a key-value spec file (``weights`` as a comma-separated list).

    Raises:
        SpecError: If the file is missing or the geometry is infeasible
    """
    values: Dict[str, object] = dict(load_kv_file(path))
    if "weights" in values:
        values["weights"] = [float(v) for v in str(values["weights"]).replace(",", " ").split()]
    try:
        return SynthSpec(**values)
    except (ValidationError, ValueError) as e:
        raise SpecError(f"Invalid synthetic spec {path}: {e}") from e


def clip_id(index: int) -> str:
    return f"clip{index:04d}"


def split_of(spec: SynthSpec, index: int) -> str:
    """The last ``n_test_clips`` clips form the test split."""
    return "test" if index >= spec.n_clips - spec.n_test_clips else "train"


def _trajectories(
    rng: np.random.Generator, spec: SynthSpec, radii: np.ndarray
) -> np.ndarray:
    """Disk centres per frame, shape (frames, K, 2) as (x, y), reflected at the borders."""
    k = spec.n_objects
    lo = radii[:, None]
    hi = np.stack([spec.width - 1 - radii, spec.height - 1 - radii], axis=1)
    pos = lo + rng.random((k, 2)) * (hi - lo)
    angle = rng.random(k) * 2 * np.pi
    speed = rng.random(k) * spec.max_speed
    vel = np.stack([np.cos(angle), np.sin(angle)], axis=1) * speed[:, None]

    out = np.zeros((spec.frames_per_clip, k, 2))
    for t in range(spec.frames_per_clip):
        out[t] = pos
        pos = pos + vel
        below = pos < lo
        above = pos > hi
        pos = np.where(below, 2 * lo - pos, pos)
        pos = np.where(above, 2 * hi - pos, pos)
        vel = np.where(below | above, -vel, vel)
        pos = np.clip(pos, lo, hi)
    return out


def _disk_mask(cx: float, cy: float, r: float, width: int, height: int) -> np.ndarray:
    yy, xx = np.mgrid[0:height, 0:width]
    return (xx - cx) ** 2 + (yy - cy) ** 2 <= r * r


def _mask_box(mask: np.ndarray) -> BoundingBox:
    ys, xs = np.nonzero(mask)
    return BoundingBox.of(int(xs.min()), int(ys.min()), int(xs.max()) + 1, int(ys.max()) + 1)


def generate_clip(spec: SynthSpec, index: int) -> VideoClip:
    """One clip, deterministic in (spec.seed, index)."""
    rng = np.random.default_rng([spec.seed, index])
    k = spec.n_objects
    w, h = spec.width, spec.height

    radii = spec.radius_min + rng.random(k) * (spec.radius_max - spec.radius_min)
    centres = _trajectories(rng, spec, radii)
    colors = 0.2 + 0.8 * rng.random((k, 3))
    weights = np.asarray(spec.weight_profile())
    if spec.shuffle_weights:
        weights = weights[rng.permutation(k)]
    tags = [f"disk{i}" for i in range(k)]

    frames, fixations, saliency, annotations = [], [], [], []
    for t in range(spec.frames_per_clip):
        image = 0.4 + spec.noise_amplitude * rng.random((h, w, 3))
        masks = []
        for i in range(k):
            cx, cy = centres[t, i]
            mask = _disk_mask(cx, cy, radii[i], w, h)
            image[mask] = colors[i]
            masks.append(mask)

        points: List[Tuple[int, int]] = []
        chosen = rng.choice(k, size=spec.n_fix, p=weights)
        for i in chosen:
            ys, xs = np.nonzero(masks[i])
            j = rng.integers(len(xs))
            points.append((int(xs[j]), int(ys[j])))
        fix = FixationMap.from_points(w, h, points)

        blurred = gaussian_filter(fix.base.values, sigma=spec.sigma, mode="constant")
        sal = GrayscaleMap(blurred / blurred.max())

        frames.append(Frame(image=np.clip(image, 0.0, 1.0), index=t))
        fixations.append(fix)
        saliency.append(sal)
        annotations.append([(tags[i], _mask_box(masks[i])) for i in range(k)])

    return VideoClip(
        id=clip_id(index),
        frames=frames,
        fixations=fixations,
        saliency=saliency,
        annotations=annotations,
    ).validate()


def generate(spec: SynthSpec) -> List[VideoClip]:
    """Generate every clip of the spec, in clip-id order."""
    clips = [generate_clip(spec, i) for i in range(spec.n_clips)]
    logger.info(
        "Generated synthetic dataset",
        extra={"clips": len(clips), "frames_per_clip": spec.frames_per_clip, "seed": spec.seed},
    )
    return clips

