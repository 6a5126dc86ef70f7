"""Experiment drivers: ranking-map ratio sweep, ranking-map replacement, correlation analysis."""

import logging
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import pandas as pd

from salrank.core.maps import GrayscaleMap, VideoClip
from salrank.models.wire import Provenance
from salrank.services.curation import assign_ranks
from salrank.services.diffusion.network import DenoiserParams
from salrank.services.diffusion.schedule import NoiseSchedule
from salrank.services.metrics import METRIC_COLUMNS, UNDEFINED, MetricReport, cc, clip_metrics, spearman
from salrank.services.pipeline import ClipRanking, decode_clip
from salrank.services.rankmap import PredictedRanking, predicted_ranking_map
from salrank.utils.exceptions import EmptyInputError, UndefinedMetricError

logger = logging.getLogger(__name__)

SWEEP_RATIOS: Tuple[Fraction, ...] = tuple(
    Fraction(v) for v in ("0", "1/16", "1/8", "1/4", "1/2", "1")
)
MATCH_IOU = 0.5


def frame_labels(clip: VideoClip) -> List[str]:
    return [f"{clip.id}/{f.index:03d}" for f in clip.frames]


def evaluate(clips: Sequence[VideoClip], predictions: Dict[str, List[GrayscaleMap]]) -> MetricReport:
    """Per-frame metrics over every clip, in clip order."""
    report = MetricReport()
    for clip in clips:
        report.extend(clip_metrics(predictions[clip.id], clip.saliency, clip.fixations, frame_labels(clip)))
    return report


def _summary_row(report: MetricReport, **labels) -> dict:
    return {**labels, **report.means(), "frames": len(report.frames)}


def _decode_all(
    clips: Sequence[VideoClip],
    rankings: Dict[str, ClipRanking],
    params: DenoiserParams,
    sched: NoiseSchedule,
    ratio: float,
    seed: int,
    window: int,
) -> Dict[str, List[GrayscaleMap]]:
    return {
        clip.id: decode_clip(clip, rankings[clip.id].ranking, params, sched, ratio, seed, window)[0]
        for clip in clips
    }


def ratio_sweep(
    clips: Sequence[VideoClip],
    rankings: Dict[str, ClipRanking],
    params: DenoiserParams,
    sched: NoiseSchedule,
    seed: int = 0,
    window: int = 0,
    ratios: Sequence[Fraction] = SWEEP_RATIOS,
) -> pd.DataFrame:
    """
    Decode the same clips at each ranking-map ratio; one mean-metrics row per ratio.

    Every ratio reuses the same starting noise, so rows differ only in conditioning.
    """
    clips = [c for c in clips if c.id in rankings]
    if not clips:
        raise EmptyInputError("No clips with a resolved ranking to sweep over")
    rows = []
    for ratio in ratios:
        started = time.time()
        preds = _decode_all(clips, rankings, params, sched, float(ratio), seed, window)
        report = evaluate(clips, preds)
        rows.append(_summary_row(report, ratio=float(ratio), ratio_label=str(ratio)))
        logger.info(
            "Ratio evaluated",
            extra={
                "ratio": str(ratio),
                "cc": round(report.mean("cc"), 6),
                "elapsed_s": round(time.time() - started, 2),
            },
        )
    return pd.DataFrame(rows, columns=["ratio", "ratio_label", *METRIC_COLUMNS, "frames"])


@dataclass
class ReplacementResult:
    table: pd.DataFrame
    predictions: Dict[str, Dict[str, List[GrayscaleMap]]] = field(default_factory=dict)


def replacement(
    clips: Sequence[VideoClip],
    rankings_by_source: Dict[str, Dict[str, ClipRanking]],
    params: DenoiserParams,
    sched: NoiseSchedule,
    ratio: float,
    seed: int = 0,
    window: int = 0,
) -> ReplacementResult:
    """
    Decode one checkpoint with each ranking source (e.g. oracle vs random).

    Only clips resolved by every source are compared.
    """
    shared = [c for c in clips if all(c.id in r for r in rankings_by_source.values())]
    if not shared:
        raise EmptyInputError("No clip was resolved by every ranking source")
    rows = []
    result = ReplacementResult(table=pd.DataFrame())
    for source, rankings in rankings_by_source.items():
        preds = _decode_all(shared, rankings, params, sched, ratio, seed, window)
        report = evaluate(shared, preds)
        rows.append(_summary_row(report, source=source, ratio=ratio))
        result.predictions[source] = preds
        logger.info("Source evaluated", extra={"source": source, "cc": round(report.mean("cc"), 6)})
    result.table = pd.DataFrame(rows, columns=["source", "ratio", *METRIC_COLUMNS, "frames"])
    return result


# --------------------------
# Correlation analysis
# --------------------------

def ranking_from_provenance(provenance: Provenance) -> PredictedRanking:
    objects = sorted(provenance.objects, key=lambda o: o.rank)
    return PredictedRanking(
        objects=tuple((o.tag, o.rank) for o in objects),
        boxes=tuple(o.box for o in objects),
        grounded=all(o.grounded for o in objects),
    )


def match_objects(provenance: Provenance, clip: VideoClip) -> List[Tuple[int, int]]:
    """
    (predicted rank, ground-truth rank) pairs for corresponding objects.

    Objects correspond on an exact tag match; grounded objects also need
    IoU >= 0.5 with the annotated box. Grounded objects without a box never match.
    """
    middle = clip.middle_index
    if len(clip.annotations) <= middle or not clip.annotations[middle]:
        return []
    gt = {o.tag: o for o in assign_ranks(clip.annotations[middle], clip.fixations[middle])}
    pairs = []
    for obj in provenance.objects:
        truth = gt.get(obj.tag)
        if truth is None:
            continue
        if obj.grounded and (obj.box is None or obj.box.iou(truth.box) < MATCH_IOU):
            continue
        pairs.append((obj.rank, truth.rank))
    return pairs


def correlate_clip(provenance: Provenance, clip: VideoClip) -> Dict[str, float]:
    """
    Map correlation (CC of the ranking map against the middle frame's
    ground-truth saliency) and rank correlation (Spearman over matched
    objects); NaN where undefined.
    """
    middle = clip.middle_index
    rank_map = predicted_ranking_map(ranking_from_provenance(provenance), clip.width, clip.height)
    try:
        map_corr = cc(rank_map, clip.saliency[middle])
    except UndefinedMetricError:
        map_corr = float("nan")
    pairs = match_objects(provenance, clip)
    try:
        rank_corr = spearman([p for p, _ in pairs], [g for _, g in pairs])
    except UndefinedMetricError:
        rank_corr = float("nan")
    return {"map_correlation": map_corr, "rank_correlation": rank_corr, "matched": len(pairs)}


def correlation_table(clips: Sequence[VideoClip], provenances: Dict[str, Provenance]) -> pd.DataFrame:
    """Per-clip correlations plus a mean row over defined values."""
    rows = []
    for clip in clips:
        if clip.id not in provenances:
            continue
        rows.append({"clip_id": clip.id, **correlate_clip(provenances[clip.id], clip)})
    if not rows:
        raise EmptyInputError("No predicted clip matches the dataset")
    table = pd.DataFrame(rows, columns=["clip_id", "map_correlation", "rank_correlation", "matched"])
    mean = {
        "clip_id": "mean",
        "map_correlation": table["map_correlation"].mean(skipna=True),
        "rank_correlation": table["rank_correlation"].mean(skipna=True),
        "matched": table["matched"].mean(),
    }
    return pd.concat([table, pd.DataFrame([mean])], ignore_index=True)


def write_table(table: pd.DataFrame, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(path, index=False, na_rep=UNDEFINED, float_format="%.10g")
    logger.info("Wrote table", extra={"path": str(path), "rows": len(table)})
