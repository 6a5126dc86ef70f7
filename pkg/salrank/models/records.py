"""Curation record models (JSON-lines supervision targets)."""

from __future__ import annotations

from typing import List

from pydantic import Field

from salrank.core.maps import BoundingBox
from salrank.models.base import APIModel


class RankedObject(APIModel):
    """A tagged box with its fixation score and rank within one frame."""

    tag: str = Field(..., min_length=1)
    box: BoundingBox
    score: float = Field(..., ge=0)
    rank: int = Field(..., ge=1)


class FrameRanking(APIModel):
    """Ranked objects of one frame."""

    frame: int = Field(..., ge=0)
    objects: List[RankedObject] = Field(default_factory=list)


class CurationRecord(APIModel):
    """One clip's caption plus per-frame salient object rankings."""

    clip_id: str = Field(..., min_length=1)
    caption: str = Field(..., min_length=1)
    frames: List[FrameRanking] = Field(default_factory=list)

    def to_jsonl(self) -> str:
        return self.model_dump_json()


class AnnotatedObject(APIModel):
    """Annotation input: a tag and its box."""

    tag: str = Field(..., min_length=1)
    box: BoundingBox


class FrameAnnotations(APIModel):
    frame: int = Field(..., ge=0)
    objects: List[AnnotatedObject] = Field(default_factory=list)


class ClipAnnotations(APIModel):
    """Contents of a clip's ``annotations.json``."""

    clip_id: str
    frames: List[FrameAnnotations] = Field(default_factory=list)
