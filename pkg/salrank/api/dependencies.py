"""Shared stub-server state and its request dependency."""

import logging
from functools import lru_cache
from pathlib import Path
from typing import List, Optional

from fastapi import Request

from salrank.core.maps import VideoClip
from salrank.models.wire import Detection, VsorResponse
from salrank.services.dataset_io import dataset_clip_ids, load_clip
from salrank.utils.exceptions import InputError

logger = logging.getLogger(__name__)

DEFAULT_CANNED = VsorResponse(caption="A video clip.", ranking=["disk0", "disk1", "disk2"])


class StubState:
    """
    What the stub answers.

    With a dataset directory the answers are oracle rankings and annotated
    boxes of the referenced clip; otherwise the configured canned text and
    detections are echoed.
    """

    def __init__(
        self,
        dataset_dir: Optional[Path] = None,
        canned_text: Optional[str] = None,
        detections: Optional[List[Detection]] = None,
    ):
        self.dataset_dir = Path(dataset_dir) if dataset_dir else None
        self.canned_text = canned_text
        self.detections = list(detections or [])
        self._known = set(dataset_clip_ids(self.dataset_dir)) if self.dataset_dir else set()

    @property
    def oracle_mode(self) -> bool:
        return self.dataset_dir is not None

    def clip(self, clip_id: str) -> VideoClip:
        if clip_id not in self._known:
            raise InputError(f"Unknown clip {clip_id!r}")
        return _load_cached(self.dataset_dir / clip_id)


@lru_cache(maxsize=64)
def _load_cached(clip_dir: Path) -> VideoClip:
    logger.debug("Loading clip for stub", extra={"clip_dir": str(clip_dir)})
    return load_clip(clip_dir)


def get_stub_state(request: Request) -> StubState:
    return request.app.state.stub
