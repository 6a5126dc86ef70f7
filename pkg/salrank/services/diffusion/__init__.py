"""Ranking-map-conditioned diffusion saliency decoder."""
