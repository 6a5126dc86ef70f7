"""Grounding backends: locate tagged objects in a frame as bounding boxes."""

import logging
from typing import Dict, List, Optional, Protocol, Sequence, Tuple

import httpx
from pydantic import ValidationError

from salrank.config import settings
from salrank.core.maps import Annotation, BoundingBox, Frame
from salrank.models.wire import GroundRequest, GroundResponse
from salrank.services.image_service import frame_to_base64
from salrank.utils.exceptions import TransportError

logger = logging.getLogger(__name__)

Located = List[Tuple[str, BoundingBox]]


class Grounder(Protocol):
    async def locate(self, tags: Sequence[str], frame: Frame, frame_ref: Optional[str] = None) -> Located:
        ...


class OracleGrounder:
    """Looks tags up in a frame's annotations by exact string match."""

    def __init__(self, annotations: Sequence[Annotation]):
        self.boxes: Dict[str, BoundingBox] = {}
        for tag, box in annotations:
            self.boxes.setdefault(tag, box)

    async def locate(self, tags: Sequence[str], frame: Frame, frame_ref: Optional[str] = None) -> Located:
        return [(tag, self.boxes[tag]) for tag in tags if tag in self.boxes]


class RemoteGrounder:
    """POSTs tags and a base64 PNG frame to a grounding endpoint."""

    def __init__(
        self,
        url: Optional[str] = None,
        timeout: Optional[float] = None,
        transport: Optional[httpx.AsyncBaseTransport] = None,
    ):
        self.url = url or settings.ground_url
        self.timeout = timeout if timeout is not None else settings.http_timeout
        self.transport = transport
        if not self.url:
            raise TransportError("No grounding endpoint configured (set SALRANK_GROUND_URL)")

    async def locate(self, tags: Sequence[str], frame: Frame, frame_ref: Optional[str] = None) -> Located:
        """
        Best-scoring detection per requested tag, clipped to the frame.

        Tags without a detection (or whose box falls outside the frame) are
        omitted.

        Raises:
            TransportError: If the endpoint is unreachable or answers malformed JSON
        """
        body = GroundRequest(tags=list(tags), frame=frame_to_base64(frame), frame_ref=frame_ref)
        try:
            async with httpx.AsyncClient(timeout=self.timeout, transport=self.transport) as client:
                response = await client.post(self.url, json=body.model_dump(exclude_none=True))
                response.raise_for_status()
                parsed = GroundResponse(**response.json())
        except httpx.HTTPError as e:
            logger.warning("Grounding request failed", extra={"url": self.url, "error": str(e)})
            raise TransportError(f"Grounding request to {self.url} failed: {e}") from e
        except (ValueError, ValidationError) as e:
            raise TransportError(f"Malformed grounding response from {self.url}: {e}") from e

        best: Dict[str, Tuple[float, BoundingBox]] = {}
        for det in parsed.detections:
            if det.tag not in tags:
                continue
            box = det.box.clip(frame.width, frame.height)
            if box.area < 1:
                continue
            if det.tag not in best or det.score > best[det.tag][0]:
                best[det.tag] = (det.score, box)
        located = [(tag, best[tag][1]) for tag in tags if tag in best]
        logger.debug(
            "Grounded tags",
            extra={"requested": len(tags), "located": len(located), "frame_ref": frame_ref},
        )
        return located
