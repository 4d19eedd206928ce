"""NumPy implementations with the same signatures as the compiled kernels."""

import numpy as np

EPS = np.finfo(np.float64).eps


def threshold_counts(s, gt, thresholds):
    counts = np.searchsorted(thresholds, s.ravel(), side="left")
    fg = gt.ravel().astype(bool)
    n = len(thresholds)
    fg_hist = np.bincount(counts[fg], minlength=n + 1)
    bg_hist = np.bincount(counts[~fg], minlength=n + 1)
    tp = np.cumsum(fg_hist[::-1])[::-1][1:]
    fp = np.cumsum(bg_hist[::-1])[::-1][1:]
    return tp.astype(np.int64), fp.astype(np.int64)


def abs_error_sum(s, gt):
    return float(np.abs(s - gt).sum())


def masked_mean_std(x, mask):
    vals = x[mask.astype(bool)]
    n = vals.size
    if n == 0:
        return 0.0, 0.0, 0
    if n == 1:
        return float(vals[0]), 0.0, 1
    return float(vals.mean()), float(vals.std(ddof=1)), n


def block_ssim(pred, gt, r0, r1, c0, c1):
    p = pred[r0:r1, c0:c1]
    g = gt[r0:r1, c0:c1]
    n = p.size
    if n == 0:
        return 0.0
    x = p.mean()
    y = g.mean()
    vx = ((p - x) ** 2).sum() / (n - 1 + EPS)
    vy = ((g - y) ** 2).sum() / (n - 1 + EPS)
    cxy = ((p - x) * (g - y)).sum() / (n - 1 + EPS)
    alpha = 4 * x * y * cxy
    beta = (x * x + y * y) * (vx + vy)
    if alpha != 0:
        return float(alpha / (beta + EPS))
    if beta == 0:
        return 1.0
    return 0.0
