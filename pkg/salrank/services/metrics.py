"""Saliency metrics (AUC-Judd, CC, SIM, NSS) and Spearman rank correlation."""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.stats import rankdata

from salrank.core.maps import FixationMap, GrayscaleMap
from salrank.utils.exceptions import DimensionError, UndefinedMetricError

logger = logging.getLogger(__name__)

METRIC_COLUMNS = ["auc_j", "cc", "sim", "nss"]
UNDEFINED = "undefined"


def _same_shape(a: GrayscaleMap, b_shape) -> None:
    if a.shape != tuple(b_shape):
        raise DimensionError(f"Map shapes differ: {a.shape} vs {tuple(b_shape)}")


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    """Pearson correlation of two flat arrays; undefined when either is constant."""
    da = a - a.mean()
    db = b - b.mean()
    saa = float(np.dot(da, da))
    sbb = float(np.dot(db, db))
    if saa == 0.0 or sbb == 0.0:
        raise UndefinedMetricError("Correlation is undefined for a constant input")
    r = float(np.dot(da, db)) / math.sqrt(saa * sbb)
    return min(1.0, max(-1.0, r))


def cc(pred: GrayscaleMap, gt: GrayscaleMap) -> float:
    """Linear correlation coefficient between two maps."""
    _same_shape(pred, gt.shape)
    return _pearson(pred.values.ravel(), gt.values.ravel())


def nss(pred: GrayscaleMap, fix: FixationMap) -> float:
    """Mean standardized prediction at fixated pixels (population std)."""
    _same_shape(pred, fix.base.shape)
    mask = fix.mask
    if not mask.any():
        raise UndefinedMetricError("NSS needs at least one fixation")
    values = pred.values
    sigma = float(values.std())
    if sigma == 0.0:
        raise UndefinedMetricError("NSS is undefined for a constant prediction")
    z = (values - values.mean()) / sigma
    return float(z[mask].mean())


def sim(pred: GrayscaleMap, gt: GrayscaleMap) -> float:
    """Histogram intersection of the two maps viewed as distributions."""
    _same_shape(pred, gt.shape)
    p_mass = float(pred.values.sum())
    g_mass = float(gt.values.sum())
    if p_mass <= 0.0 or g_mass <= 0.0:
        raise UndefinedMetricError("SIM needs maps with positive total mass")
    score = float(np.minimum(pred.values / p_mass, gt.values / g_mass).sum())
    return min(1.0, max(0.0, score))


def auc_judd(pred: GrayscaleMap, fix: FixationMap) -> float:
    """
    ROC area with fixated pixels as positives and every other pixel as negative.

    Thresholds are the distinct predicted values at fixations; the curve is
    closed with (0, 0) and (1, 1) and integrated with the trapezoid rule.
    """
    _same_shape(pred, fix.base.shape)
    mask = fix.mask.ravel()
    n_pos = int(mask.sum())
    n_neg = mask.size - n_pos
    if n_pos == 0:
        raise UndefinedMetricError("AUC-Judd needs at least one fixation")
    if n_neg == 0:
        raise UndefinedMetricError("AUC-Judd needs at least one non-fixated pixel")

    values = pred.values.ravel()
    pos = np.sort(values[mask])
    neg = np.sort(values[~mask])
    thresholds = np.unique(pos)[::-1]
    # fraction of values >= threshold, via sorted search
    tpr = (n_pos - np.searchsorted(pos, thresholds, side="left")) / n_pos
    fpr = (n_neg - np.searchsorted(neg, thresholds, side="left")) / n_neg
    tpr = np.concatenate([[0.0], tpr, [1.0]])
    fpr = np.concatenate([[0.0], fpr, [1.0]])
    area = float(np.sum((fpr[1:] - fpr[:-1]) * (tpr[1:] + tpr[:-1]) / 2.0))
    return min(1.0, max(0.0, area))


def spearman(ranks_a: Sequence[float], ranks_b: Sequence[float]) -> float:
    """Spearman rho with average ranks for ties."""
    if len(ranks_a) != len(ranks_b):
        raise DimensionError(f"Rank lists differ in length: {len(ranks_a)} vs {len(ranks_b)}")
    if len(ranks_a) < 2:
        raise UndefinedMetricError("Spearman correlation needs at least two items")
    a = rankdata(np.asarray(ranks_a, dtype=np.float64), method="average")
    b = rankdata(np.asarray(ranks_b, dtype=np.float64), method="average")
    return _pearson(a, b)


def _safe(fn, *args) -> float:
    try:
        return fn(*args)
    except UndefinedMetricError:
        return float("nan")


@dataclass
class MetricReport:
    """Per-frame metric values plus their means; NaN marks an undefined value."""

    frames: List[str] = field(default_factory=list)
    auc_j: List[float] = field(default_factory=list)
    cc: List[float] = field(default_factory=list)
    sim: List[float] = field(default_factory=list)
    nss: List[float] = field(default_factory=list)

    def add(self, label: str, pred: GrayscaleMap, gt: GrayscaleMap, fix: FixationMap) -> None:
        self.frames.append(label)
        self.auc_j.append(_safe(auc_judd, pred, fix))
        self.cc.append(_safe(cc, pred, gt))
        self.sim.append(_safe(sim, pred, gt))
        self.nss.append(_safe(nss, pred, fix))

    def extend(self, other: "MetricReport") -> None:
        for name in ["frames", *METRIC_COLUMNS]:
            getattr(self, name).extend(getattr(other, name))

    def mean(self, metric: str) -> float:
        """Mean over frames where the metric is defined, summed in frame order."""
        values = [v for v in getattr(self, metric) if not math.isnan(v)]
        if not values:
            return float("nan")
        total = 0.0
        for v in values:
            total += v
        return total / len(values)

    def means(self) -> dict:
        return {name: self.mean(name) for name in METRIC_COLUMNS}

    def to_frame(self) -> pd.DataFrame:
        rows = pd.DataFrame({"frame": self.frames, **{m: getattr(self, m) for m in METRIC_COLUMNS}})
        mean_row = pd.DataFrame([{"frame": "mean", **self.means()}])
        return pd.concat([rows, mean_row], ignore_index=True)

    def write_csv(self, path: Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, na_rep=UNDEFINED, float_format="%.10g")
        logger.info("Wrote metrics table", extra={"path": str(path), "frames": len(self.frames)})


def clip_metrics(
    preds: Sequence[GrayscaleMap],
    gts: Sequence[GrayscaleMap],
    fixations: Sequence[FixationMap],
    labels: Optional[Sequence[str]] = None,
) -> MetricReport:
    """Evaluate one clip frame by frame, in frame order."""
    if not (len(preds) == len(gts) == len(fixations)):
        raise DimensionError(
            f"Frame counts differ: {len(preds)} predictions, {len(gts)} maps, {len(fixations)} fixation maps"
        )
    labels = list(labels) if labels is not None else [f"{i:03d}" for i in range(len(preds))]
    report = MetricReport()
    for label, pred, gt, fix in zip(labels, preds, gts, fixations):
        report.add(label, pred, gt, fix)
    return report
