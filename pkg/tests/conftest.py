"""Pytest configuration and fixtures."""

import logging
import os

import numpy as np
import pytest
from fastapi.testclient import TestClient

from salrank.api.main import create_app
from salrank.core.maps import FixationMap, GrayscaleMap
from salrank.models.synth import SynthSpec
from salrank.services import dataset_io
from salrank.services.diffusion.network import NetSpec
from salrank.services.synth import generate, split_of


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full training runs; set SALRANK_RUN_SLOW=1 to run")


def pytest_collection_modifyitems(config, items):
    if os.environ.get("SALRANK_RUN_SLOW") == "1":
        return
    skip = pytest.mark.skip(reason="slow acceptance run (set SALRANK_RUN_SLOW=1)")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(autouse=True)
def reset_logging():
    """CLI invocations install handlers on captured streams; drop them afterwards."""
    yield
    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)


@pytest.fixture
def tiny_spec() -> SynthSpec:
    return SynthSpec(
        n_clips=4,
        n_test_clips=2,
        frames_per_clip=4,
        width=16,
        height=16,
        n_objects=2,
        radius_min=2,
        radius_max=3,
        n_fix=12,
        seed=3,
    )


@pytest.fixture
def tiny_clips(tiny_spec):
    return generate(tiny_spec)


@pytest.fixture
def tiny_dataset(tmp_path, tiny_spec, tiny_clips):
    """Synthetic dataset written to disk (train and test splits)."""
    out = tmp_path / "data"
    splits = {clip.id: split_of(tiny_spec, i) for i, clip in enumerate(tiny_clips)}
    dataset_io.write_dataset(tiny_clips, out, splits)
    return out


@pytest.fixture
def small_net() -> NetSpec:
    """Architecture small enough for finite-difference checks."""
    return NetSpec(channels=(2, 3, 4), feature_channels=2, time_channels=2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def random_map_pair(rng):
    """Factory for random (prediction, ground truth, fixations) triples."""

    def make(size: int = 16, n_fix: int = 10):
        pred = GrayscaleMap(rng.random((size, size)))
        gt = GrayscaleMap(rng.random((size, size)))
        values = np.zeros((size, size))
        flat = rng.choice(size * size, size=n_fix, replace=False)
        values.flat[flat] = 1.0
        return pred, gt, FixationMap.from_values(values)

    return make


@pytest.fixture
def stub_client():
    """Stub server echoing canned answers."""
    return TestClient(create_app())
