"""Tests for saliency metrics, Spearman correlation and metric tables."""

import math

import numpy as np
import pandas as pd
import pytest

from salrank.core.maps import FixationMap, GrayscaleMap
from salrank.services.metrics import (
    MetricReport,
    auc_judd,
    cc,
    clip_metrics,
    nss,
    sim,
    spearman,
)
from salrank.utils.exceptions import DimensionError, UndefinedMetricError


# --------------------------
# Naive per-pixel references
# --------------------------

def _flat(grid):
    return [float(v) for v in np.asarray(grid).ravel()]


def naive_cc(p, g):
    p, g = _flat(p), _flat(g)
    n = len(p)
    mp, mg = sum(p) / n, sum(g) / n
    num = sum((a - mp) * (b - mg) for a, b in zip(p, g))
    den = math.sqrt(sum((a - mp) ** 2 for a in p) * sum((b - mg) ** 2 for b in g))
    return num / den


def naive_nss(p, f):
    p, f = _flat(p), _flat(f)
    n = len(p)
    mean = sum(p) / n
    std = math.sqrt(sum((a - mean) ** 2 for a in p) / n)
    z = [(a - mean) / std for a, fx in zip(p, f) if fx > 0]
    return sum(z) / len(z)


def naive_sim(p, g):
    p, g = _flat(p), _flat(g)
    sp, sg = sum(p), sum(g)
    return sum(min(a / sp, b / sg) for a, b in zip(p, g))


def naive_auc_judd(p, f):
    p, f = _flat(p), _flat(f)
    pos = [a for a, fx in zip(p, f) if fx > 0]
    neg = [a for a, fx in zip(p, f) if fx == 0]
    tp, fp = [0.0], [0.0]
    for thr in sorted(set(pos), reverse=True):
        tp.append(sum(1 for a in pos if a >= thr) / len(pos))
        fp.append(sum(1 for a in neg if a >= thr) / len(neg))
    tp.append(1.0)
    fp.append(1.0)
    return sum((fp[i + 1] - fp[i]) * (tp[i + 1] + tp[i]) / 2 for i in range(len(tp) - 1))


def test_metrics_match_naive_reference(random_map_pair):
    for i in range(100):
        pred, gt, fix = random_map_pair(16, n_fix=1 + i % 20)
        assert abs(cc(pred, gt) - naive_cc(pred.values, gt.values)) <= 1e-9
        assert abs(nss(pred, fix) - naive_nss(pred.values, fix.base.values)) <= 1e-9
        assert abs(sim(pred, gt) - naive_sim(pred.values, gt.values)) <= 1e-9
        assert abs(auc_judd(pred, fix) - naive_auc_judd(pred.values, fix.base.values)) <= 1e-9


def test_auc_judd_with_ties_matches_reference(rng):
    for _ in range(20):
        pred = GrayscaleMap(rng.integers(0, 4, size=(8, 8)).astype(float))
        fix = FixationMap.from_values(rng.random((8, 8)) < 0.2)
        if fix.count == 0:
            continue
        assert abs(auc_judd(pred, fix) - naive_auc_judd(pred.values, fix.base.values)) <= 1e-9


# --------------------------
# Edge cases
# --------------------------

def test_self_evaluation_is_perfect(random_map_pair):
    _, gt, _ = random_map_pair()
    assert cc(gt, gt) == 1.0
    assert sim(gt, gt) == pytest.approx(1.0, abs=1e-12)


def test_constant_prediction():
    pred = GrayscaleMap(np.full((4, 4), 0.3))
    gt = GrayscaleMap(np.arange(16, dtype=float).reshape(4, 4))
    fix = FixationMap.from_points(4, 4, [(1, 1), (2, 3)])
    with pytest.raises(UndefinedMetricError):
        cc(pred, gt)
    with pytest.raises(UndefinedMetricError):
        nss(pred, fix)
    assert auc_judd(pred, fix) == 0.5


def test_perfect_separation_gives_auc_one():
    values = np.zeros((4, 4))
    values[0, 0] = values[1, 1] = 1.0
    fix = FixationMap.from_values(values)
    assert auc_judd(GrayscaleMap(values), fix) == 1.0


def test_metric_preconditions():
    grid = GrayscaleMap(np.ones((3, 3)))
    no_fix = FixationMap(GrayscaleMap.zeros(3, 3))
    with pytest.raises(UndefinedMetricError):
        auc_judd(grid, no_fix)
    with pytest.raises(UndefinedMetricError):
        nss(grid, no_fix)
    with pytest.raises(UndefinedMetricError):
        sim(GrayscaleMap.zeros(3, 3), grid)
    with pytest.raises(DimensionError):
        cc(grid, GrayscaleMap(np.ones((3, 4))))


def test_metric_ranges(random_map_pair):
    for _ in range(20):
        pred, gt, fix = random_map_pair(12, 6)
        assert -1.0 <= cc(pred, gt) <= 1.0
        assert 0.0 <= sim(pred, gt) <= 1.0
        assert 0.0 <= auc_judd(pred, fix) <= 1.0


def test_spearman():
    assert spearman([1, 2, 3, 4], [1, 2, 3, 4]) == 1.0
    assert spearman([1, 2, 3], [3, 2, 1]) == -1.0
    assert spearman([1, 2, 3], [10, 30, 20]) == pytest.approx(0.5)
    with pytest.raises(UndefinedMetricError):
        spearman([1], [1])
    with pytest.raises(UndefinedMetricError):
        spearman([1, 1, 1], [1, 2, 3])
    with pytest.raises(DimensionError):
        spearman([1, 2], [1, 2, 3])


# --------------------------
# Reports
# --------------------------

def test_clip_metrics_marks_undefined_rows(tmp_path):
    gt = GrayscaleMap(np.arange(16, dtype=float).reshape(4, 4))
    fix = FixationMap.from_points(4, 4, [(3, 3), (2, 3)])
    constant = GrayscaleMap(np.full((4, 4), 0.5))
    report = clip_metrics([gt, constant], [gt, gt], [fix, fix], labels=["a", "b"])
    assert report.cc[0] == 1.0
    assert math.isnan(report.cc[1])
    assert report.mean("cc") == 1.0
    assert report.auc_j[1] == 0.5

    path = tmp_path / "metrics.csv"
    report.write_csv(path)
    table = pd.read_csv(path, keep_default_na=False)
    assert list(table.columns) == ["frame", "auc_j", "cc", "sim", "nss"]
    assert list(table["frame"]) == ["a", "b", "mean"]
    assert table.loc[1, "cc"] == "undefined"
    assert table.loc[1, "nss"] == "undefined"


def test_report_means_match_rows(random_map_pair, tmp_path):
    report = MetricReport()
    for i in range(7):
        pred, gt, fix = random_map_pair(10, 5)
        report.add(f"f{i}", pred, gt, fix)
    path = tmp_path / "m.csv"
    report.write_csv(path)
    table = pd.read_csv(path)
    rows, mean = table.iloc[:-1], table.iloc[-1]
    for column in ["auc_j", "cc", "sim", "nss"]:
        assert mean[column] == pytest.approx(rows[column].astype(float).mean(), abs=1e-9)


def test_clip_metrics_length_mismatch():
    grid = GrayscaleMap(np.ones((2, 2)))
    fix = FixationMap.from_points(2, 2, [(0, 0)])
    with pytest.raises(DimensionError):
        clip_metrics([grid], [grid, grid], [fix])
