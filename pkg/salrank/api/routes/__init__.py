"""Stub-server endpoints."""
