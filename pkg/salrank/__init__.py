"""Salient-object-ranking conditioned video saliency prediction."""
