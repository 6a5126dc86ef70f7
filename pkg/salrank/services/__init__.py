"""Curation, modelling, inference, I/O and experiment services."""
