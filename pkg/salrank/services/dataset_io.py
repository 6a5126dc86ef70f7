"""On-disk dataset layout: per-clip PNG folders, annotation and index JSON."""

import json
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

from pydantic import ValidationError

from salrank.core.maps import GrayscaleMap, VideoClip
from salrank.models.records import (
    AnnotatedObject,
    ClipAnnotations,
    CurationRecord,
    FrameAnnotations,
)
from salrank.models.wire import Provenance
from salrank.services.image_service import (
    read_fixation_png,
    read_frame_png,
    read_map_png,
    write_fixation_png,
    write_frame_png,
    write_map_png,
)
from salrank.services.rankmap import PredictedRanking, predicted_ranking_map, write_sidecar
from salrank.utils.exceptions import DimensionError, IncompleteInputError, InputError

logger = logging.getLogger(__name__)

DATASET_INDEX = "index.json"
CLIP_INDEX = "index.json"
ANNOTATIONS = "annotations.json"
RECORDS = "records.jsonl"


def write_json(path: Path, payload) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_json(path: Path):
    path = Path(path)
    if not path.is_file():
        raise InputError(f"Missing file: {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise InputError(f"Malformed JSON in {path}: {e}") from e


def write_clip(clip: VideoClip, clip_dir: Path) -> None:
    """Write frames, fixations, saliency, annotations and the clip index."""
    clip_dir = Path(clip_dir)
    entries = []
    for frame, fix, sal in zip(clip.frames, clip.fixations, clip.saliency):
        name = f"{frame.index:03d}.png"
        write_frame_png(frame, clip_dir / "frames" / name)
        write_fixation_png(fix, clip_dir / "fixations" / name)
        write_map_png(sal, clip_dir / "saliency" / name)
        entries.append({
            "frame": frame.index,
            "image": f"frames/{name}",
            "fixation": f"fixations/{name}",
            "saliency": f"saliency/{name}",
        })
    write_json(clip_dir / CLIP_INDEX, {
        "clip_id": clip.id,
        "width": clip.width,
        "height": clip.height,
        "frames": entries,
    })
    annotations = ClipAnnotations(
        clip_id=clip.id,
        frames=[
            FrameAnnotations(
                frame=frame.index,
                objects=[AnnotatedObject(tag=tag, box=box) for tag, box in objects],
            )
            for frame, objects in zip(clip.frames, clip.annotations)
        ],
    )
    write_json(clip_dir / ANNOTATIONS, annotations.model_dump())


def write_dataset(clips: Iterable[VideoClip], out_dir: Path, splits: Dict[str, str]) -> None:
    out_dir = Path(out_dir)
    clips = sorted(clips, key=lambda c: c.id)
    for clip in clips:
        write_clip(clip, out_dir / clip.id)
    write_json(out_dir / DATASET_INDEX, {
        "clips": [{"clip_id": c.id, "split": splits.get(c.id, "train")} for c in clips],
    })
    logger.info("Wrote dataset", extra={"path": str(out_dir), "clips": len(clips)})


def load_clip(clip_dir: Path) -> VideoClip:
    """
    Load one clip directory.

    A missing ``annotations.json`` yields a clip without annotations; a
    partial one raises IncompleteInputError.
    """
    clip_dir = Path(clip_dir)
    index = read_json(clip_dir / CLIP_INDEX)
    try:
        entries = sorted(index["frames"], key=lambda e: e["frame"])
        clip_name = index["clip_id"]
    except (KeyError, TypeError) as e:
        raise InputError(f"Malformed clip index in {clip_dir}: {e}") from e

    frames = [read_frame_png(clip_dir / e["image"], index=e["frame"]) for e in entries]
    fixations = [read_fixation_png(clip_dir / e["fixation"]) for e in entries]
    saliency = [read_map_png(clip_dir / e["saliency"]) for e in entries]

    annotations: List[list] = []
    if (clip_dir / ANNOTATIONS).is_file():
        try:
            parsed = ClipAnnotations.model_validate(read_json(clip_dir / ANNOTATIONS))
        except ValidationError as e:
            raise InputError(f"Malformed annotations in {clip_dir}: {e}") from e
        by_frame = {fa.frame: [(o.tag, o.box) for o in fa.objects] for fa in parsed.frames}
        missing = [e["frame"] for e in entries if e["frame"] not in by_frame]
        if missing:
            raise IncompleteInputError(f"Clip {clip_name} lacks annotations for frames {missing}")
        annotations = [by_frame[e["frame"]] for e in entries]

    return VideoClip(
        id=clip_name,
        frames=frames,
        fixations=fixations,
        saliency=saliency,
        annotations=annotations,
    ).validate()


def dataset_clip_ids(dataset_dir: Path, split: Optional[str] = None) -> List[str]:
    index = read_json(Path(dataset_dir) / DATASET_INDEX)
    try:
        entries = index["clips"]
        return sorted(e["clip_id"] for e in entries if split is None or e.get("split") == split)
    except (KeyError, TypeError) as e:
        raise InputError(f"Malformed dataset index in {dataset_dir}: {e}") from e


def load_dataset(dataset_dir: Path, split: Optional[str] = None) -> List[VideoClip]:
    """Load clips sorted by id, optionally restricted to one split."""
    dataset_dir = Path(dataset_dir)
    return [load_clip(dataset_dir / cid) for cid in dataset_clip_ids(dataset_dir, split)]


def write_records(records: Iterable[CurationRecord], path: Path) -> None:
    lines = [r.to_jsonl() for r in sorted(records, key=lambda r: r.clip_id)]
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def read_records(path: Path) -> Dict[str, CurationRecord]:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"Missing curated records: {path} (run `salrank curate` first)")
    records = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = CurationRecord.model_validate_json(line)
        except ValidationError as e:
            raise InputError(f"{path}:{lineno}: malformed record: {e}") from e
        records[record.clip_id] = record
    return records


def read_captions(path: Path) -> Dict[str, str]:
    """Captions file: JSON object mapping clip id to caption."""
    payload = read_json(path)
    if not isinstance(payload, dict):
        raise InputError(f"Captions file {path} must map clip ids to captions")
    return {str(k): str(v) for k, v in payload.items()}


# --------------------------
# Prediction directories
# --------------------------

PROVENANCE = "provenance.json"
RANKING_MAP = "ranking_map.png"
RANKING_SIDECAR = "ranking_map.json"
ERRORS = "errors.json"


def write_prediction(
    clip_dir: Path,
    maps: Sequence[GrayscaleMap],
    frame_indices: Sequence[int],
    provenance: Provenance,
    ranking: PredictedRanking,
) -> None:
    """Per-frame saliency PNGs, the ranking map with its sidecar, and provenance."""
    clip_dir = Path(clip_dir)
    clip_dir.mkdir(parents=True, exist_ok=True)
    for index, grid in zip(frame_indices, maps):
        write_map_png(grid, clip_dir / f"{index:03d}.png")
    rank_map = predicted_ranking_map(ranking, maps[0].width, maps[0].height)
    write_map_png(rank_map, clip_dir / RANKING_MAP)
    write_sidecar(ranking, clip_dir / RANKING_SIDECAR)
    write_json(clip_dir / PROVENANCE, provenance.model_dump(mode="json"))


def prediction_clip_ids(pred_dir: Path) -> List[str]:
    pred_dir = Path(pred_dir)
    if not pred_dir.is_dir():
        raise InputError(f"Prediction directory not found: {pred_dir}")
    return sorted(p.name for p in pred_dir.iterdir() if (p / PROVENANCE).is_file())


def read_provenance(clip_dir: Path) -> Provenance:
    try:
        return Provenance.model_validate(read_json(Path(clip_dir) / PROVENANCE))
    except ValidationError as e:
        raise InputError(f"Malformed provenance in {clip_dir}: {e}") from e


def read_prediction_maps(clip_dir: Path, clip: VideoClip) -> List[GrayscaleMap]:
    """
    One predicted map per frame of ``clip``.

    Raises:
        DimensionError: If the predicted frame set differs from the clip's
    """
    clip_dir = Path(clip_dir)
    expected = [f"{f.index:03d}.png" for f in clip.frames]
    present = sorted(p.name for p in clip_dir.glob("[0-9][0-9][0-9].png"))
    if present != sorted(expected):
        raise DimensionError(
            f"Clip {clip.id}: {len(present)} predicted frames for {clip.length} dataset frames"
        )
    return [read_map_png(clip_dir / name) for name in expected]
