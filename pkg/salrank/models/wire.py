"""Wire models for the MLLM and grounding endpoints and prediction provenance."""

from __future__ import annotations

from typing import List, Literal, Optional

from pydantic import Field, field_validator

from salrank.core.maps import BoundingBox
from salrank.models.base import APIModel


class VsorPrompt(APIModel):
    """Instruction text plus frame references sent to the MLLM."""

    instruction: str
    frame_refs: List[str] = Field(default_factory=list)
    mode: Literal["cot", "direct"] = "cot"


class VsorResponse(APIModel):
    """Parsed MLLM answer: caption (may be empty in direct mode) and tags, rank 1 first."""

    caption: str = ""
    ranking: List[str] = Field(default_factory=list)

    @field_validator("caption")
    @classmethod
    def _single_line(cls, value: str) -> str:
        return " ".join(value.split())

    @field_validator("ranking")
    @classmethod
    def _dedupe_tags(cls, value: List[str]) -> List[str]:
        tags: List[str] = []
        for raw in value:
            tag = " ".join(raw.split()).rstrip(".,;:")
            if tag and tag not in tags:
                tags.append(tag)
        return tags


class MllmRequest(APIModel):
    instruction: str
    frames: List[str] = Field(default_factory=list)


class MllmResponse(APIModel):
    text: str


class GroundRequest(APIModel):
    tags: List[str] = Field(..., min_length=1)
    frame: str  # base64 PNG
    frame_ref: Optional[str] = None


class Detection(APIModel):
    tag: str
    box: BoundingBox
    score: float = 1.0


class GroundResponse(APIModel):
    detections: List[Detection] = Field(default_factory=list)


class RankingMapObject(APIModel):
    """One object contributing to a predicted ranking map (sidecar JSON)."""

    tag: str
    rank: int = Field(..., ge=1)
    rstar: float
    box: Optional[BoundingBox] = None
    grounded: bool = True


class Provenance(APIModel):
    """How a clip's predictions were produced."""

    clip_id: str
    source: Literal["mllm", "oracle", "random"]
    ratio: float
    seed: int
    prompt_mode: Optional[Literal["cot", "direct"]] = None
    caption: str = ""
    conditioned_frames: List[int] = Field(default_factory=list)
    objects: List[RankingMapObject] = Field(default_factory=list)
