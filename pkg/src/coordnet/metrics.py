"""Precision/recall arithmetic, confidence intervals, curves and error histograms."""

from __future__ import annotations

import csv
import math
import statistics
from collections import Counter
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

Z_95 = 1.96
CI_METHOD = "normal approximation: mean +/- 1.96 * sample_std / sqrt(n)"


@dataclass(frozen=True)
class Confusion:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    def __add__(self, other: Confusion) -> Confusion:
        return Confusion(self.tp + other.tp, self.fp + other.fp, self.tn + other.tn, self.fn + other.fn)

    @classmethod
    def from_labels(cls, y_true: Iterable[int], y_pred: Iterable[int]) -> Confusion:
        c = Counter(zip(y_true, y_pred))
        return cls(tp=c[(1, 1)], fp=c[(0, 1)], tn=c[(0, 0)], fn=c[(1, 0)])


@dataclass(frozen=True)
class Interval:
    mean: float
    low: float
    high: float


@dataclass(frozen=True)
class MetricSummary:
    f1: Interval
    precision: Interval
    recall: Interval
    n_runs: int

    def to_dict(self) -> dict:
        out = {"n_runs": self.n_runs, "ci_method": CI_METHOD}
        for name in ("f1", "precision", "recall"):
            iv = getattr(self, name)
            out[name] = {"mean": iv.mean, "ci_low": iv.low, "ci_high": iv.high}
        return out


def _ratio(num: int, den: int, other_den: int) -> float:
    if den:
        return num / den
    # nothing predicted/present: perfect only if the other side is empty too
    return 1.0 if other_den == 0 else 0.0


def prf(c: Confusion) -> tuple[float, float, float]:
    """(precision, recall, F1) with fixed conventions for empty denominators."""
    p = _ratio(c.tp, c.tp + c.fp, c.tp + c.fn)
    r = _ratio(c.tp, c.tp + c.fn, c.tp + c.fp)
    f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f1


def confidence_interval(values: Sequence[float]) -> tuple[float, float, float]:
    if not values:
        raise ValueError("need at least one value")
    mean = statistics.fmean(values)
    if len(values) == 1:
        return mean, mean, mean
    half = Z_95 * statistics.stdev(values) / math.sqrt(len(values))
    return mean, mean - half, mean + half


def _bounded_interval(values: Sequence[float]) -> Interval:
    mean, low, high = confidence_interval(values)
    return Interval(mean, max(0.0, low), min(1.0, high))


def summarize(per_run: Sequence[tuple[float, float, float]]) -> MetricSummary:
    """CIs across runs of (precision, recall, f1) triples, clipped to [0, 1]."""
    p, r, f = zip(*per_run)
    return MetricSummary(
        f1=_bounded_interval(f),
        precision=_bounded_interval(p),
        recall=_bounded_interval(r),
        n_runs=len(per_run),
    )


@dataclass(frozen=True)
class CurvePoint:
    threshold: float
    x: float
    y: float


def curves(scored: Iterable[tuple[float, int]]) -> tuple[list[CurvePoint], list[CurvePoint]]:
    """ROC (x=FPR, y=TPR) and P-R (x=recall, y=precision) points.

    Thresholds sweep the distinct scores in descending order; a row counts
    as positive when its score is >= the threshold. The ROC curve starts
    at (0, 0) with an infinite threshold and ends at (1, 1).
    """
    scored = sorted(scored, key=lambda sl: -sl[0])
    n_pos = sum(1 for _, lab in scored if lab == 1)
    n_neg = len(scored) - n_pos
    roc = [CurvePoint(math.inf, 0.0, 0.0)]
    pr: list[CurvePoint] = []
    tp = fp = 0
    i = 0
    while i < len(scored):
        thr = scored[i][0]
        while i < len(scored) and scored[i][0] == thr:
            if scored[i][1] == 1:
                tp += 1
            else:
                fp += 1
            i += 1
        tpr = tp / n_pos if n_pos else 0.0
        fpr = fp / n_neg if n_neg else 0.0
        roc.append(CurvePoint(thr, fpr, tpr))
        p, r, _ = prf(Confusion(tp=tp, fp=fp, tn=n_neg - fp, fn=n_pos - tp))
        pr.append(CurvePoint(thr, r, p))
    if (roc[-1].x, roc[-1].y) != (1.0, 1.0):
        roc.append(CurvePoint(-math.inf, 1.0, 1.0))
    return roc, pr


def write_curve(points: Iterable[CurvePoint], fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["threshold", "x", "y"])
    for pt in points:
        w.writerow([repr(pt.threshold), repr(pt.x), repr(pt.y)])


def error_histogram(rows: Iterable[tuple[str, object, int, int]], true_label: int | None = None) -> dict:
    """Count, per date, the runs whose held-out instance was misclassified.

    ``rows`` are ``(run_id, date, true_label, predicted_label)``. With
    ``true_label=0`` only false positives (misread non-SIO days) count.
    """
    wrong: dict[object, set] = {}
    for run_id, day, y, yhat in rows:
        if y == yhat or (true_label is not None and y != true_label):
            continue
        wrong.setdefault(day, set()).add(run_id)
    return {day: len(runs) for day, runs in wrong.items()}


def top_dates(histogram: dict, k: int) -> list:
    """Dates with the most errors; ties broken by earlier date."""
    return [d for d, _ in sorted(histogram.items(), key=lambda kv: (-kv[1], kv[0]))[:k]]
