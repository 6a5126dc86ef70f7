"""Stub MLLM and grounding endpoints used by integration tests and demos."""

import logging

from fastapi import APIRouter, Depends

from salrank.api.dependencies import DEFAULT_CANNED, StubState, get_stub_state
from salrank.models.wire import Detection, GroundRequest, GroundResponse, MllmRequest, MllmResponse
from salrank.services.pipeline import oracle_rank, parse_frame_ref, serialize_response
from salrank.utils.exceptions import EmptyInputError, InputError

logger = logging.getLogger(__name__)
router = APIRouter(prefix="/v1", tags=["stub"])


@router.post("/vsor", response_model=MllmResponse)
async def vsor(body: MllmRequest, state: StubState = Depends(get_stub_state)) -> MllmResponse:
    """
    Answer a ranking prompt.

    Oracle mode ranks the clip named by the first frame reference; the
    caption line is omitted when the prompt asks for a ranking only.
    """
    if not state.oracle_mode:
        text = state.canned_text or serialize_response(DEFAULT_CANNED)
        return MllmResponse(text=text)
    if not body.frames:
        raise EmptyInputError("Oracle stub needs at least one frame reference")
    clip_id, _ = parse_frame_ref(body.frames[0])
    response = oracle_rank(state.clip(clip_id))
    if "Caption:" not in body.instruction:
        response = response.model_copy(update={"caption": ""})
    logger.info("Stub ranking", extra={"clip_id": clip_id, "ranked": len(response.ranking)})
    return MllmResponse(text=serialize_response(response))


@router.post("/ground", response_model=GroundResponse)
async def ground(body: GroundRequest, state: StubState = Depends(get_stub_state)) -> GroundResponse:
    """Boxes for the requested tags; tags the stub does not know are left out."""
    wanted = set(body.tags)
    if not state.oracle_mode:
        return GroundResponse(detections=[d for d in state.detections if d.tag in wanted])
    if not body.frame_ref:
        raise InputError("Oracle grounding needs a frame_ref")
    clip_id, index = parse_frame_ref(body.frame_ref)
    clip = state.clip(clip_id)
    if not 0 <= index < len(clip.annotations):
        raise InputError(f"Clip {clip_id} has no annotations for frame {index}")
    detections = [Detection(tag=tag, box=box) for tag, box in clip.annotations[index] if tag in wanted]
    return GroundResponse(detections=detections)
