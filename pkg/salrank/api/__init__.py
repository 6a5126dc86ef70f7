"""Stub MLLM and grounding server."""
