"""HTTP client for the video salient-object-ranking MLLM endpoint."""

import logging
import time
from typing import Optional

import httpx
from pydantic import ValidationError

from salrank.config import settings
from salrank.models.wire import MllmRequest, MllmResponse, VsorPrompt
from salrank.utils.exceptions import TransportError

logger = logging.getLogger(__name__)


class MllmClient:
    """
    Sends a prompt plus frame references as a single user turn and returns
    the raw answer text.

    ``transport`` lets tests route requests to an in-process app.
    """

    def __init__(
        self,
        url: Optional[str] = None,
        timeout: Optional[float] = None,
        transport: Optional[httpx.AsyncBaseTransport] = None,
    ):
        self.url = url or settings.mllm_url
        self.timeout = timeout if timeout is not None else settings.http_timeout
        self.transport = transport
        if not self.url:
            raise TransportError("No MLLM endpoint configured (set SALRANK_MLLM_URL)")

    async def complete(self, prompt: VsorPrompt) -> str:
        """
        Raises:
            TransportError: If the endpoint is unreachable or answers malformed JSON
        """
        body = MllmRequest(instruction=prompt.instruction, frames=prompt.frame_refs)
        started = time.time()
        try:
            async with httpx.AsyncClient(timeout=self.timeout, transport=self.transport) as client:
                response = await client.post(self.url, json=body.model_dump())
                response.raise_for_status()
                answer = MllmResponse(**response.json())
        except httpx.HTTPError as e:
            logger.warning("MLLM request failed", extra={"url": self.url, "error": str(e)})
            raise TransportError(f"MLLM request to {self.url} failed: {e}") from e
        except (ValueError, ValidationError) as e:
            raise TransportError(f"Malformed MLLM response from {self.url}: {e}") from e

        logger.debug(
            "MLLM answered",
            extra={
                "frames": len(prompt.frame_refs),
                "mode": prompt.mode,
                "chars": len(answer.text),
                "elapsed_ms": round((time.time() - started) * 1000, 2),
            },
        )
        return answer.text
