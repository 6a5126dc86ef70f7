"""End-to-end tests for the command-line interface."""

import json
from pathlib import Path
from unittest.mock import patch

import httpx
import pandas as pd
import pytest
from click.testing import CliRunner

from salrank.cli import main

SPEC = """\
n_clips = 4
n_test_clips = 2
frames_per_clip = 4
width = 16
height = 16
n_objects = 2
radius_min = 2
radius_max = 3
n_fix = 12
seed = 3
"""

TRAIN = """\
# tiny network so the suite stays fast
channels = 2, 3, 4
feature_channels = 2
time_channels = 2
batch_size = 2
timesteps = 20
beta_end = 0.4
log_every = 1
"""


@pytest.fixture
def runner():
    return CliRunner()


def _invoke(runner, *args):
    result = runner.invoke(main, [str(a) for a in args], catch_exceptions=False)
    return result


def _pipeline(runner, root: Path) -> Path:
    """synth -> curate -> train -> predict -> eval under ``root``."""
    root.mkdir(parents=True, exist_ok=True)
    (root / "spec.txt").write_text(SPEC)
    (root / "train.txt").write_text(TRAIN)
    cfg = ["--config", root / "train.txt"]
    data, ckpt, pred = root / "data", root / "ckpt" / "model.bin", root / "pred"

    for args in [
        ["synth", root / "spec.txt", "--out", data],
        ["curate", data],
        [*cfg, "train", data, "--out", ckpt, "--steps", 2],
        [*cfg, "predict", data, ckpt, "--out", pred, "--source", "oracle", "--ratio", 0.5],
        ["eval", pred, data],
    ]:
        result = _invoke(runner, *args)
        assert result.exit_code == 0, result.output
    return root


def test_pipeline_outputs(runner, tmp_path):
    root = _pipeline(runner, tmp_path)
    data, pred = root / "data", root / "pred"
    assert (data / "records.jsonl").is_file()
    assert sorted(p.name for p in (data / "clip0000" / "ranking_maps").iterdir()) == [
        "000.png", "001.png", "002.png", "003.png"
    ]
    assert (root / "ckpt" / "loss.csv").is_file()
    assert (root / "ckpt" / "loss.png").is_file()

    assert sorted(p.name for p in pred.iterdir() if p.is_dir()) == ["clip0002", "clip0003"]
    provenance = json.loads((pred / "clip0002" / "provenance.json").read_text())
    assert provenance["source"] == "oracle"
    assert provenance["conditioned_frames"] == [0, 2]
    assert json.loads((pred / "errors.json").read_text()) == []

    metrics = pd.read_csv(pred / "metrics.csv", keep_default_na=False)
    assert list(metrics.columns) == ["frame", "auc_j", "cc", "sim", "nss"]
    assert len(metrics) == 2 * 4 + 1
    assert metrics["frame"].iloc[-1] == "mean"


def test_reruns_are_byte_identical(runner, tmp_path):
    first = _pipeline(runner, tmp_path / "a")
    second = _pipeline(runner, tmp_path / "b")
    compared = 0
    for path in sorted(first.rglob("*")):
        if path.is_dir() or path.suffix == ".png" and path.parent.name == "ckpt":
            continue
        twin = second / path.relative_to(first)
        assert path.read_bytes() == twin.read_bytes(), path
        compared += 1
    assert compared > 50


def test_missing_spec_exits_with_input_code(runner, tmp_path):
    result = _invoke(runner, "synth", tmp_path / "nope.txt", "--out", tmp_path / "data")
    assert result.exit_code == 2
    assert "Error:" in result.output


def test_synth_rejects_frame_size_the_encoder_cannot_stride(runner, tmp_path):
    (tmp_path / "spec.txt").write_text(SPEC.replace("width = 16", "width = 18"))
    result = _invoke(runner, "synth", tmp_path / "spec.txt", "--out", tmp_path / "data")
    assert result.exit_code == 2
    assert "divisible by 4" in result.output
    assert not (tmp_path / "data" / "index.json").exists()


def test_eval_detects_missing_frames(runner, tmp_path):
    root = _pipeline(runner, tmp_path)
    (root / "pred" / "clip0003" / "001.png").unlink()
    result = _invoke(runner, "eval", root / "pred", root / "data")
    assert result.exit_code == 2


def test_unreachable_mllm_exits_with_transport_code(runner, tmp_path, monkeypatch):
    root = _pipeline(runner, tmp_path)
    monkeypatch.setenv("SALRANK_MLLM_URL", "http://mllm.invalid/v1/vsor")
    monkeypatch.delenv("SALRANK_GROUND_URL", raising=False)
    with patch("httpx.AsyncClient.post", side_effect=httpx.ConnectError("connection refused")):
        result = _invoke(
            runner, "predict", root / "data", root / "ckpt" / "model.bin",
            "--out", root / "pred-mllm", "--source", "mllm",
        )
    assert result.exit_code == 4
    errors = json.loads((root / "pred-mllm" / "errors.json").read_text())
    assert [e["clip_id"] for e in errors] == ["clip0002", "clip0003"]
    assert {e["error"] for e in errors} == {"TransportError"}


def test_experiment_commands(runner, tmp_path):
    root = _pipeline(runner, tmp_path)
    data, ckpt = root / "data", root / "ckpt" / "model.bin"

    result = _invoke(runner, "ratio-sweep", data, ckpt, "--out", root / "sweep")
    assert result.exit_code == 0, result.output
    sweep = pd.read_csv(root / "sweep" / "ratio_sweep.csv")
    assert list(sweep["ratio_label"]) == ["0", "1/16", "1/8", "1/4", "1/2", "1"]
    assert (root / "sweep" / "ratio_sweep.png").is_file()

    result = _invoke(runner, "replace", data, ckpt, "--out", root / "replace")
    assert result.exit_code == 0, result.output
    table = pd.read_csv(root / "replace" / "replacement.csv")
    assert list(table["source"]) == ["oracle", "random"]
    assert (root / "replace" / "replacement.png").is_file()

    result = _invoke(runner, "correlate", root / "pred", data)
    assert result.exit_code == 0, result.output
    corr = pd.read_csv(root / "pred" / "correlation.csv")
    assert list(corr["clip_id"]) == ["clip0002", "clip0003", "mean"]
    assert corr["rank_correlation"].iloc[-1] == 1.0
