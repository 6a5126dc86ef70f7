"""Stub-server request middleware."""
