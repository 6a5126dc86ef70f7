"""End-to-end inference: VSOR prompting, grounding, ranking maps, diffusion decoding."""

import asyncio
import logging
import math
import re
import zlib
from dataclasses import dataclass
from typing import Callable, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np

from salrank.config import settings
from salrank.core.maps import GrayscaleMap, VideoClip, pointwise_product_concat, resize_nearest
from salrank.models.wire import Provenance, VsorPrompt, VsorResponse
from salrank.services.curation import assign_ranks
from salrank.services.diffusion.network import SPATIAL_STRIDE, DenoiserParams, encode_frames
from salrank.services.diffusion.sampler import sample
from salrank.services.diffusion.schedule import NoiseSchedule
from salrank.services.diffusion.training import window_indices
from salrank.services.grounding_service import Grounder, Located, OracleGrounder
from salrank.services.mllm_service import MllmClient
from salrank.services.rankmap import PredictedRanking, predicted_ranking_map, random_ranking
from salrank.utils.exceptions import (
    DomainError,
    EmptyInputError,
    IncompleteInputError,
    ParseError,
    SalRankException,
)

logger = logging.getLogger(__name__)

Source = Literal["mllm", "oracle", "random"]
PromptMode = Literal["cot", "direct"]

# random-source rankings for clips without annotations
DEFAULT_RANDOM_BOXES = 3

_COT_INSTRUCTION = (
    "You are given the frames of a short video.\n"
    "First, describe the video in one sentence on a line starting with 'Caption:'.\n"
    "Then, using that description, rank the objects that attract human gaze, "
    "most salient first, under a line 'Ranking:' as a numbered list "
    "('1. <object>', '2. <object>', ...)."
)
_DIRECT_INSTRUCTION = (
    "You are given the frames of a short video.\n"
    "Rank the objects that attract human gaze, most salient first, "
    "under a line 'Ranking:' as a numbered list ('1. <object>', '2. <object>', ...). "
    "Do not describe the video."
)

_NUMBERED = re.compile(r"^\s*(\d+)\s*[.)]\s*(.+?)\s*$")
_LABEL = re.compile(r"^\s*(caption|ranking)\s*:\s*", re.IGNORECASE)


# --------------------------
# Prompting
# --------------------------

def frame_ref(clip_id: str, index: int) -> str:
    return f"{clip_id}/{index:03d}"


def parse_frame_ref(ref: str) -> Tuple[str, int]:
    """Inverse of ``frame_ref``."""
    clip_id, _, index = ref.rpartition("/")
    if not clip_id or not index.isdigit():
        raise DomainError(f"Malformed frame reference: {ref!r}")
    return clip_id, int(index)


def build_prompt(clip: VideoClip, mode: PromptMode = "cot") -> VsorPrompt:
    """Instruction plus references to every frame of the clip."""
    if not clip.frames:
        raise EmptyInputError(f"Clip {clip.id} has no frames")
    instruction = _COT_INSTRUCTION if mode == "cot" else _DIRECT_INSTRUCTION
    refs = [frame_ref(clip.id, f.index) for f in clip.frames]
    return VsorPrompt(instruction=instruction, frame_refs=refs, mode=mode)


def serialize_response(response: VsorResponse) -> str:
    lines = []
    if response.caption:
        lines.append(f"Caption: {response.caption}")
    lines.append("Ranking:")
    lines.extend(f"{i}. {tag}" for i, tag in enumerate(response.ranking, start=1))
    return "\n".join(lines)


def parse_response(text: str) -> VsorResponse:
    """
    Split an answer into caption and ranking.

    The ranking block is the first run of numbered lines (``1. tag`` or
    ``1) tag``; blank lines inside the run are allowed). Non-empty lines
    before it form the caption; ``Caption:``/``Ranking:`` labels are dropped
    and prose after the block is ignored.

    Raises:
        ParseError: If no numbered line is found
    """
    lines = text.splitlines()
    start = next((i for i, line in enumerate(lines) if _NUMBERED.match(line)), None)
    if start is None:
        raise ParseError("No ranking block in MLLM response", raw_text=text)

    caption_parts = []
    for line in lines[:start]:
        stripped = _LABEL.sub("", line).strip()
        if stripped:
            caption_parts.append(stripped)

    tags = []
    for line in lines[start:]:
        if not line.strip():
            continue
        match = _NUMBERED.match(line)
        if not match:
            break
        tags.append(match.group(2))

    response = VsorResponse(caption=" ".join(caption_parts), ranking=tags)
    if not response.ranking:
        raise ParseError("Ranking block has no usable tags", raw_text=text)
    return response


# --------------------------
# Ranking sources
# --------------------------

def oracle_rank(clip: VideoClip) -> VsorResponse:
    """
    Fixation-based ranking of the middle frame, standing in for the MLLM.

    Raises:
        IncompleteInputError: If the middle frame has no annotations
    """
    middle = clip.middle_index
    if len(clip.annotations) != clip.length or not clip.annotations[middle]:
        raise IncompleteInputError(f"Clip {clip.id} has no annotations for frame {middle}")
    ranked = assign_ranks(clip.annotations[middle], clip.fixations[middle])
    return VsorResponse(caption=settings.placeholder_caption, ranking=[o.tag for o in ranked])


async def ground(
    tags: Sequence[str],
    clip: VideoClip,
    grounder: Grounder,
) -> Located:
    """Locate ranked tags on the clip's middle frame; unmatched tags are omitted."""
    if not tags:
        raise EmptyInputError("Nothing to ground")
    middle = clip.middle_index
    return await grounder.locate(list(tags), clip.frames[middle], frame_ref(clip.id, middle))


def oracle_grounder(clip: VideoClip) -> OracleGrounder:
    middle = clip.middle_index
    annotations = clip.annotations[middle] if len(clip.annotations) > middle else []
    return OracleGrounder(annotations)


def clip_seed(seed: int, clip_id: str) -> List[int]:
    """Seed material for per-clip random draws, stable across runs."""
    return [seed, zlib.crc32(clip_id.encode("utf-8"))]


@dataclass
class ClipRanking:
    """A clip's predicted ranking and how it was obtained."""

    ranking: PredictedRanking
    caption: str = ""
    prompt_mode: Optional[PromptMode] = None


async def resolve_ranking(
    clip: VideoClip,
    source: Source,
    seed: int = 0,
    mllm: Optional[MllmClient] = None,
    grounder: Optional[Grounder] = None,
    prompt_mode: PromptMode = "cot",
) -> ClipRanking:
    """
    Ranking for one clip from the chosen source.

    Raises:
        TransportError, ParseError: From the MLLM or grounding backends
        IncompleteInputError: If the oracle source has no annotations
    """
    if source == "random":
        middle = clip.middle_index
        objects = clip.annotations[middle] if len(clip.annotations) > middle else []
        tags = [tag for tag, _ in objects] or None
        n_boxes = len(objects) or DEFAULT_RANDOM_BOXES
        pr = random_ranking(clip_seed(seed, clip.id), n_boxes, clip.width, clip.height, tags=tags)
        return ClipRanking(ranking=pr)

    if source == "oracle":
        response = oracle_rank(clip)
        located = await ground(response.ranking, clip, grounder or oracle_grounder(clip))
        pr = PredictedRanking.from_tags(response.ranking, dict(located))
        return ClipRanking(ranking=pr, caption=response.caption)

    if mllm is None:
        mllm = MllmClient()
    text = await mllm.complete(build_prompt(clip, prompt_mode))
    response = parse_response(text)
    located = await ground(response.ranking, clip, grounder or oracle_grounder(clip))
    pr = PredictedRanking.from_tags(response.ranking, dict(located))
    logger.debug(
        "MLLM ranking resolved",
        extra={"clip_id": clip.id, "ranked": pr.m, "located": len(located), "mode": prompt_mode},
    )
    return ClipRanking(ranking=pr, caption=response.caption, prompt_mode=prompt_mode)


async def resolve_rankings(
    clips: Sequence[VideoClip],
    source: Source,
    seed: int = 0,
    mllm: Optional[MllmClient] = None,
    grounder_for: Optional[Callable[[VideoClip], Grounder]] = None,
    prompt_mode: PromptMode = "cot",
    max_in_flight: Optional[int] = None,
) -> Dict[str, Union[ClipRanking, SalRankException]]:
    """
    Resolve every clip concurrently with at most ``max_in_flight`` requests.

    A failing clip maps to its exception; the others are unaffected.
    ``grounder_for`` builds a grounder per clip (defaults to the oracle).
    """
    semaphore = asyncio.Semaphore(max_in_flight or settings.max_in_flight)

    async def one(clip: VideoClip) -> Union[ClipRanking, SalRankException]:
        async with semaphore:
            try:
                grounder = grounder_for(clip) if grounder_for else None
                return await resolve_ranking(clip, source, seed, mllm, grounder, prompt_mode)
            except SalRankException as e:
                logger.warning(
                    "Ranking failed for clip",
                    extra={"clip_id": clip.id, "source": source, "error": str(e)},
                )
                return e

    results = await asyncio.gather(*(one(clip) for clip in clips))
    return {clip.id: result for clip, result in zip(clips, results)}


# --------------------------
# Decoding
# --------------------------

def select_frames(length: int, ratio: float) -> List[int]:
    """
    ceil(ratio * length) evenly spaced frame indices, the first always included.
    """
    if not 0.0 <= ratio <= 1.0:
        raise DomainError(f"Ranking-map ratio must lie in [0, 1], got {ratio}")
    k = math.ceil(round(ratio * length, 9))
    return [(i * length) // k for i in range(k)] if k else []


def conditioning(
    clip: VideoClip,
    params: DenoiserParams,
    rank_map: GrayscaleMap,
    conditioned: Sequence[int],
    window: int = 0,
) -> np.ndarray:
    """
    (L, C, H/4, W/4) conditioning; frames outside ``conditioned`` get a zero ranking map.

    ``window`` 0 encodes the whole clip once and shares it across frames;
    a positive window encodes frames centred on each target frame.
    """
    h4, w4 = clip.height // SPATIAL_STRIDE, clip.width // SPATIAL_STRIDE
    small = resize_nearest(rank_map, h4, w4)
    zero = GrayscaleMap.zeros(w4, h4)
    chosen = set(conditioned)
    shared = encode_frames(clip.frames, params) if window == 0 else None
    rows = []
    for i in range(clip.length):
        if shared is None:
            feats = encode_frames([clip.frames[j] for j in window_indices(i, clip.length, window)], params)
        else:
            feats = shared
        rows.append(pointwise_product_concat(small if i in chosen else zero, feats))
    return np.stack(rows)


def decode_clip(
    clip: VideoClip,
    ranking: PredictedRanking,
    params: DenoiserParams,
    sched: NoiseSchedule,
    ratio: float,
    seed: int = 0,
    window: int = 0,
) -> Tuple[List[GrayscaleMap], List[int]]:
    """Saliency maps for every frame plus the indices that saw the ranking map."""
    chosen = select_frames(clip.length, ratio)
    rank_map = predicted_ranking_map(ranking, clip.width, clip.height)
    cond = conditioning(clip, params, rank_map, chosen, window)
    return sample(cond, params, sched, clip_seed(seed, clip.id)), chosen


@dataclass
class ClipPrediction:
    maps: List[GrayscaleMap]
    provenance: Provenance
    ranking: PredictedRanking


def prediction_for(
    clip: VideoClip,
    resolved: ClipRanking,
    params: DenoiserParams,
    sched: NoiseSchedule,
    ratio: float,
    source: Source,
    seed: int = 0,
    window: int = 0,
) -> ClipPrediction:
    maps, chosen = decode_clip(clip, resolved.ranking, params, sched, ratio, seed, window)
    provenance = Provenance(
        clip_id=clip.id,
        source=source,
        ratio=ratio,
        seed=seed,
        prompt_mode=resolved.prompt_mode,
        caption=resolved.caption,
        conditioned_frames=chosen,
        objects=resolved.ranking.contributions(),
    )
    return ClipPrediction(maps=maps, provenance=provenance, ranking=resolved.ranking)


async def predict_clip(
    clip: VideoClip,
    params: DenoiserParams,
    sched: NoiseSchedule,
    ratio: float,
    source: Source,
    seed: int = 0,
    window: int = 0,
    mllm: Optional[MllmClient] = None,
    grounder: Optional[Grounder] = None,
    prompt_mode: PromptMode = "cot",
) -> ClipPrediction:
    """
    One saliency map per frame, conditioned on the chosen ranking source.

    Raises:
        TransportError, ParseError: From the MLLM source
    """
    resolved = await resolve_ranking(clip, source, seed, mllm, grounder, prompt_mode)
    return prediction_for(clip, resolved, params, sched, ratio, source, seed, window)
