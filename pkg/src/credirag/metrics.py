"""Accuracy, F1, ROC/AUC and reliability-curve data for Fake/Real predictions."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from ._io import atomic_open
from .exceptions import ConfigError, EmptyInput, SingleClass
from .labels import Label


class DegenerateMetricWarning(UserWarning):
    """F1 is undefined (no positives predicted or present) and was reported as 0."""


def _as_codes(y) -> np.ndarray:
    arr = np.asarray(y)
    if arr.dtype.kind in "OUS":
        arr = np.array([int(Label.parse(v)) for v in arr])
    return arr.astype(np.int64)


def _check_pair(y_true, y_pred):
    t, p = _as_codes(y_true), _as_codes(y_pred)
    if t.shape != p.shape:
        raise ValueError(f"length mismatch: {t.shape} vs {p.shape}")
    if t.size == 0:
        raise EmptyInput("no predictions")
    return t, p


def confusion(y_true, y_pred, positive: Label = Label.FAKE) -> tuple[int, int, int, int]:
    """Return ``(tp, fp, fn, tn)`` for the given positive class."""
    t, p = _check_pair(y_true, y_pred)
    pos = int(positive)
    tp = int(np.sum((p == pos) & (t == pos)))
    fp = int(np.sum((p == pos) & (t != pos)))
    fn = int(np.sum((p != pos) & (t == pos)))
    tn = int(np.sum((p != pos) & (t != pos)))
    return tp, fp, fn, tn


def accuracy(y_true, y_pred) -> float:
    t, p = _check_pair(y_true, y_pred)
    return float(np.mean(t == p))


def f1_from_counts(tp: int, fp: int, fn: int) -> float:
    denom = 2 * tp + fp + fn
    if denom == 0:
        warnings.warn("F1 undefined with no positive predictions or labels; reporting 0.0",
                      DegenerateMetricWarning, stacklevel=2)
        return 0.0
    return 2 * tp / denom


def f1(y_true, y_pred, positive: Label = Label.FAKE) -> float:
    """F1 of the positive class; Fake by default since the target is misinformation."""
    tp, fp, fn, _ = confusion(y_true, y_pred, positive)
    return f1_from_counts(tp, fp, fn)


@dataclass
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float

    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))


def roc(y_true, scores, positive: Label = Label.REAL) -> RocCurve:
    """ROC from a threshold sweep over the distinct scores, highest first.

    Items sharing a score enter the curve together, which makes the
    trapezoidal AUC equal to the rank (Mann-Whitney) estimate.
    """
    t = _as_codes(y_true)
    s = np.asarray(scores, dtype=float)
    if t.shape != s.shape:
        raise ValueError("labels and scores differ in length")
    if t.size == 0:
        raise EmptyInput("no predictions")
    is_pos = t == int(positive)
    n_pos, n_neg = int(is_pos.sum()), int((~is_pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("ROC needs both classes")
    order = np.argsort(-s, kind="stable")
    s_sorted, pos_sorted = s[order], is_pos[order]
    # last index of each block of equal scores
    ends = np.r_[np.flatnonzero(np.diff(s_sorted) != 0), s_sorted.size - 1]
    tps = np.cumsum(pos_sorted)[ends]
    fps = (ends + 1) - tps
    tpr = np.r_[0.0, tps / n_pos]
    fpr = np.r_[0.0, fps / n_neg]
    thresholds = np.r_[np.inf, s_sorted[ends]]
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
    return RocCurve(fpr, tpr, thresholds, auc)


def auc(y_true, scores, positive: Label = Label.REAL) -> float:
    return roc(y_true, scores, positive).auc


@dataclass
class CalibrationCurve:
    mean_predicted: np.ndarray
    frequency: np.ndarray
    count: np.ndarray
    bin_index: np.ndarray
    n_bins: int

    def bins(self) -> list[tuple[float, float, int]]:
        return list(zip(self.mean_predicted.tolist(), self.frequency.tolist(), self.count.tolist()))


def calibration(y_true, p_real, n_bins: int = 10) -> CalibrationCurve:
    """Equal-width reliability bins over P(real); empty bins are dropped."""
    if n_bins < 1:
        raise ConfigError("n_bins must be >= 1")
    t = _as_codes(y_true)
    p = np.asarray(p_real, dtype=float)
    if t.shape != p.shape:
        raise ValueError("labels and probabilities differ in length")
    if t.size == 0:
        raise EmptyInput("no predictions")
    edges = np.arange(n_bins + 1) / n_bins
    idx = np.digitize(p, edges[1:-1], right=False)
    counts = np.bincount(idx, minlength=n_bins)
    keep = np.flatnonzero(counts)
    sum_p = np.bincount(idx, weights=p, minlength=n_bins)
    sum_real = np.bincount(idx, weights=(t == Label.REAL).astype(float), minlength=n_bins)
    return CalibrationCurve(sum_p[keep] / counts[keep], sum_real[keep] / counts[keep],
                            counts[keep], keep, n_bins)


def metrics_report(y_true, y_pred, p_real, positive: Label = Label.FAKE, n_bins: int = 10) -> dict:
    """Everything ``evaluate`` writes for one prediction set."""
    tp, fp, fn, tn = confusion(y_true, y_pred, positive)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateMetricWarning)
        f = f1_from_counts(tp, fp, fn)
    out = {
        "n": tp + fp + fn + tn,
        "accuracy": accuracy(y_true, y_pred),
        "f1": f,
        "f1_positive_class": str(positive),
        "f1_degenerate": (2 * tp + fp + fn) == 0,
        "confusion": {"tp": tp, "fp": fp, "fn": fn, "tn": tn},
    }
    try:
        curve = roc(y_true, p_real)
        out["auc"] = curve.auc
        out["roc"] = {"fpr": curve.fpr.tolist(), "tpr": curve.tpr.tolist()}
    except SingleClass:
        out["auc"] = None
        out["roc"] = None
    cal = calibration(y_true, p_real, n_bins)
    out["calibration"] = {"mean_predicted": cal.mean_predicted.tolist(),
                          "frequency": cal.frequency.tolist(), "count": cal.count.tolist(),
                          "n_bins": n_bins}
    return out


def write_roc_csv(path, fpr, tpr) -> None:
    with atomic_open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["fpr", "tpr"])
        w.writerows(zip(map(repr, map(float, fpr)), map(repr, map(float, tpr))))


def write_calibration_csv(path, mean_predicted, frequency, count) -> None:
    with atomic_open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mean_predicted", "frequency", "count"])
        for m, f, c in zip(mean_predicted, frequency, count):
            w.writerow([repr(float(m)), repr(float(f)), int(c)])
