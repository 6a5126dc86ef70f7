"""Pydantic models."""

from salrank.models.records import (
    AnnotatedObject,
    ClipAnnotations,
    CurationRecord,
    FrameAnnotations,
    FrameRanking,
    RankedObject,
)
from salrank.models.synth import SynthSpec
from salrank.models.wire import (
    Detection,
    GroundRequest,
    GroundResponse,
    MllmRequest,
    MllmResponse,
    Provenance,
    RankingMapObject,
    VsorPrompt,
    VsorResponse,
)

__all__ = [
    "AnnotatedObject",
    "ClipAnnotations",
    "CurationRecord",
    "Detection",
    "FrameAnnotations",
    "FrameRanking",
    "GroundRequest",
    "GroundResponse",
    "MllmRequest",
    "MllmResponse",
    "Provenance",
    "RankedObject",
    "RankingMapObject",
    "SynthSpec",
    "VsorPrompt",
    "VsorResponse",
]
