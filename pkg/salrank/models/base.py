"""Shared pydantic base model."""

from pydantic import BaseModel, ConfigDict


class APIModel(BaseModel):
    """
    Base model config:
    - Forbid unknown keys (catches drift in files and wire payloads early)
    - Strip whitespace from strings
    """

    model_config = ConfigDict(
        extra="forbid",
        str_strip_whitespace=True,
    )
