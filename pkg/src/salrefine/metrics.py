"""Saliency evaluation: PR curves, max F-measure, S-measure and MAE."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import EmptyGroundTruthError, ShapeMismatchError

NUM_THRESHOLDS = 256
BETA2 = 0.3
EPS = np.finfo(np.float64).eps


def _as_map(x):
    if hasattr(x, "detach"):
        x = x.detach().cpu().numpy()
    x = np.asarray(x, dtype=np.float64)
    while x.ndim > 2 and x.shape[0] == 1:
        x = x[0]
    return np.ascontiguousarray(x)


def _pair(s, gt):
    s = _as_map(s)
    gt = _as_map(gt)
    if s.shape != gt.shape or s.ndim != 2:
        raise ShapeMismatchError(f"prediction {s.shape} vs ground truth {gt.shape}")
    return s, gt


def thresholds(n=NUM_THRESHOLDS):
    return np.linspace(0.0, 1.0, n)


def minmax_normalize(s):
    lo, hi = s.min(), s.max()
    if hi > lo:
        return (s - lo) / (hi - lo)
    return s


@dataclass
class PRCurve:
    """Precision and recall at thresholds listed from 1 down to 0."""

    thresholds: np.ndarray
    precision: np.ndarray
    recall: np.ndarray

    def __len__(self):
        return len(self.thresholds)

    @classmethod
    def mean(cls, curves):
        curves = list(curves)
        return cls(
            curves[0].thresholds.copy(),
            np.mean([c.precision for c in curves], axis=0),
            np.mean([c.recall for c in curves], axis=0),
        )


def pr_curve(s, gt, num_thresholds=NUM_THRESHOLDS, normalize=True, kernels=None) -> PRCurve:
    """Binarise ``s`` with ``s > t`` at evenly spaced thresholds.

    With ``normalize`` the map is first min-max rescaled (constant maps are
    left as they are). Precision is 1 where nothing is detected.
    """
    k = kernels or _kernels
    s, gt = _pair(s, gt)
    g = np.ascontiguousarray(gt > 0.5, dtype=np.uint8)
    fg = int(g.sum())
    if fg == 0:
        raise EmptyGroundTruthError("PR curve is undefined without foreground pixels")
    if normalize:
        s = np.ascontiguousarray(minmax_normalize(s))
    thr = thresholds(num_thresholds)
    tp, fp = k.threshold_counts(s, g, thr)
    detected = tp + fp
    precision = np.where(detected > 0, tp / np.maximum(detected, 1), 1.0)
    recall = tp / fg
    return PRCurve(thr[::-1].copy(), precision[::-1].copy(), recall[::-1].copy())


def f_beta_curve(pr: PRCurve, beta2=BETA2):
    p, r = pr.precision, pr.recall
    den = beta2 * p + r
    return np.where(den > 0, (1 + beta2) * p * r / np.where(den > 0, den, 1.0), 0.0)


def max_f_beta(pr: PRCurve, beta2=BETA2) -> float:
    return float(f_beta_curve(pr, beta2).max())


def mae(s, gt, kernels=None) -> float:
    k = kernels or _kernels
    s, gt = _pair(s, gt)
    return k.abs_error_sum(s, gt) / s.size


def _object_score(x, mask, k, lam=0.5):
    mean, std, n = k.masked_mean_std(x, mask)
    if n == 0:
        return 0.0
    return 2.0 * mean / (mean * mean + 1.0 + 2.0 * lam * std + EPS)


def s_object(s, gt, kernels=None):
    k = kernels or _kernels
    g = np.ascontiguousarray(gt > 0.5, dtype=np.uint8)
    fg = np.ascontiguousarray(s * g)
    bg = np.ascontiguousarray((1.0 - s) * (1 - g))
    m = g.mean()
    return m * _object_score(fg, g, k) + (1 - m) * _object_score(bg, np.ascontiguousarray(1 - g), k)


def centroid(gt):
    """(x, y) split point: one past the rounded foreground centroid."""
    h, w = gt.shape
    ys, xs = np.nonzero(gt > 0.5)
    if ys.size == 0:
        return int(np.round(w / 2)) + 1, int(np.round(h / 2)) + 1
    return int(np.round(xs.mean())) + 1, int(np.round(ys.mean())) + 1


def s_region(s, gt, kernels=None):
    k = kernels or _kernels
    h, w = gt.shape
    x, y = centroid(gt)
    x = min(x, w)
    y = min(y, h)
    area = h * w
    blocks = ((0, y, 0, x), (0, y, x, w), (y, h, 0, x), (y, h, x, w))
    score = 0.0
    for r0, r1, c0, c1 in blocks:
        n = (r1 - r0) * (c1 - c0)
        if n:
            score += n / area * k.block_ssim(s, gt, r0, r1, c0, c1)
    return score


def s_measure(s, gt, mu=0.5, kernels=None) -> float:
    s, gt = _pair(s, gt)
    gt = (gt > 0.5).astype(np.float64)
    y = gt.mean()
    if y == 0:
        return float(1.0 - s.mean())
    if y == 1:
        return float(s.mean())
    value = mu * s_object(s, gt, kernels) + (1 - mu) * s_region(s, gt, kernels)
    return float(min(1.0, max(0.0, value)))


# ---------------------------------------------------------------------------
# reports


@dataclass
class SequenceMetrics:
    f_beta_max: float
    s_measure: float
    mae: float


@dataclass
class MetricsReport:
    f_beta_max: float
    s_measure: float
    mae: float
    pr: PRCurve
    per_sequence: dict = field(default_factory=dict)

    AGGREGATE_ID = "__aggregate__"

    def write(self, report_dir):
        report_dir = Path(report_dir)
        report_dir.mkdir(parents=True, exist_ok=True)
        with open(report_dir / "metrics.csv", "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["sequence_id", "f_beta_max", "s_measure", "mae"])
            for seq_id, m in self.per_sequence.items():
                wr.writerow([seq_id, repr(m.f_beta_max), repr(m.s_measure), repr(m.mae)])
            wr.writerow([self.AGGREGATE_ID, repr(self.f_beta_max), repr(self.s_measure), repr(self.mae)])
        write_pr_csv(self.pr, report_dir / "pr_curve.csv")

    @classmethod
    def read(cls, report_dir):
        report_dir = Path(report_dir)
        per_seq = {}
        agg = None
        with open(report_dir / "metrics.csv", newline="") as fh:
            for row in csv.DictReader(fh):
                m = SequenceMetrics(float(row["f_beta_max"]), float(row["s_measure"]), float(row["mae"]))
                if row["sequence_id"] == cls.AGGREGATE_ID:
                    agg = m
                else:
                    per_seq[row["sequence_id"]] = m
        if agg is None:
            raise ValueError(f"{report_dir / 'metrics.csv'} has no aggregate row")
        return cls(agg.f_beta_max, agg.s_measure, agg.mae, read_pr_csv(report_dir / "pr_curve.csv"), per_seq)

    def same_as(self, other) -> bool:
        return (
            (self.f_beta_max, self.s_measure, self.mae) == (other.f_beta_max, other.s_measure, other.mae)
            and self.per_sequence == other.per_sequence
            and np.array_equal(self.pr.thresholds, other.pr.thresholds)
            and np.array_equal(self.pr.precision, other.pr.precision)
            and np.array_equal(self.pr.recall, other.pr.recall)
        )


def write_pr_csv(pr: PRCurve, path):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["threshold", "precision", "recall"])
        for t, p, r in zip(pr.thresholds, pr.precision, pr.recall):
            wr.writerow([repr(float(t)), repr(float(p)), repr(float(r))])


def read_pr_csv(path) -> PRCurve:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return PRCurve(
        np.array([float(r["threshold"]) for r in rows]),
        np.array([float(r["precision"]) for r in rows]),
        np.array([float(r["recall"]) for r in rows]),
    )


class MetricsAccumulator:
    """Collects per-frame scores; curves are averaged over frames before taking the max."""

    def __init__(self, beta2=BETA2, mu=0.5):
        self.beta2 = beta2
        self.mu = mu
        self._frames = {}

    def add(self, sequence_id, s, gt):
        s, gt = _pair(s, gt)
        curve = pr_curve(s, gt) if (gt > 0.5).any() else None
        self._frames.setdefault(sequence_id, []).append(
            (curve, s_measure(s, gt, self.mu), mae(s, gt))
        )

    def report(self) -> MetricsReport:
        per_seq = {}
        all_curves, all_s, all_mae = [], [], []
        for seq_id, frames in self._frames.items():
            curves = [c for c, _, _ in frames if c is not None]
            sm = [v for _, v, _ in frames]
            ma = [v for _, _, v in frames]
            f = max_f_beta(PRCurve.mean(curves), self.beta2) if curves else 0.0
            per_seq[seq_id] = SequenceMetrics(f, float(np.mean(sm)), float(np.mean(ma)))
            all_curves.extend(curves)
            all_s.extend(sm)
            all_mae.extend(ma)
        if not all_curves:
            raise EmptyGroundTruthError("no frame with foreground pixels to evaluate")
        pr = PRCurve.mean(all_curves)
        return MetricsReport(
            max_f_beta(pr, self.beta2), float(np.mean(all_s)), float(np.mean(all_mae)), pr, per_seq
        )
