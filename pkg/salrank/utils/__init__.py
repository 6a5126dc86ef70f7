"""Exceptions and logging setup."""
