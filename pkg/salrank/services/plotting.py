"""PNG figures for experiment outputs (matplotlib, Agg backend)."""

import logging
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from salrank.core.maps import Frame, GrayscaleMap  # noqa: E402

logger = logging.getLogger(__name__)

# no version-stamped Software chunk
_PNG_METADATA = {"Software": None}


def _save(fig, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=100, metadata=_PNG_METADATA)
    plt.close(fig)
    logger.info("Wrote figure", extra={"path": str(path)})


def plot_loss(losses: Sequence[float], path: Path, window: int = 50) -> None:
    """Raw training loss plus its moving average."""
    steps = np.arange(1, len(losses) + 1)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(steps, losses, color="0.75", linewidth=0.8, label="loss")
    if len(losses) >= window:
        smooth = np.convolve(losses, np.ones(window) / window, mode="valid")
        ax.plot(steps[window - 1:], smooth, color="C0", label=f"mean of {window}")
    ax.set_xlabel("step")
    ax.set_ylabel("MSE")
    ax.set_yscale("log")
    ax.legend()
    fig.tight_layout()
    _save(fig, path)


def plot_ratio_sweep(table: pd.DataFrame, path: Path) -> None:
    """CC against the ranking-map ratio, one labelled point per ratio."""
    fig, ax = plt.subplots(figsize=(6, 4))
    x = np.arange(len(table))
    ax.plot(x, table["cc"], marker="o")
    ax.set_xticks(x)
    ax.set_xticklabels(table["ratio_label"])
    ax.set_xlabel("ranking-map ratio")
    ax.set_ylabel("mean CC")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    _save(fig, path)


def plot_replacement(
    frame: Frame,
    oracle_map: GrayscaleMap,
    oracle_pred: GrayscaleMap,
    random_map: GrayscaleMap,
    random_pred: GrayscaleMap,
    gt: GrayscaleMap,
    path: Path,
) -> None:
    """Side by side: frame, oracle and random ranking maps with their predictions, ground truth."""
    panels = [
        ("frame", frame.image, None),
        ("oracle ranking map", oracle_map.values, "gray"),
        ("oracle prediction", oracle_pred.values, "gray"),
        ("random ranking map", random_map.values, "gray"),
        ("random prediction", random_pred.values, "gray"),
        ("ground truth", gt.values, "gray"),
    ]
    fig, axes = plt.subplots(1, len(panels), figsize=(2.2 * len(panels), 2.6))
    for ax, (title, image, cmap) in zip(axes, panels):
        if cmap:
            ax.imshow(image, cmap=cmap, vmin=0.0, vmax=1.0, interpolation="nearest")
        else:
            ax.imshow(image, interpolation="nearest")
        ax.set_title(title, fontsize=8)
        ax.axis("off")
    fig.tight_layout()
    _save(fig, path)
