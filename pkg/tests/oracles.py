"""Independent brute-force references used only by the tests."""

import math

import numpy as np
import torch


def naive_pr(s, gt, n=256, normalize=True):
    """Per-pixel double loop over thresholds listed 1 -> 0."""
    s = [[float(v) for v in row] for row in np.asarray(s)]
    g = [[int(v > 0.5) for v in row] for row in np.asarray(gt)]
    if normalize:
        lo = min(min(r) for r in s)
        hi = max(max(r) for r in s)
        if hi > lo:
            s = [[(v - lo) / (hi - lo) for v in row] for row in s]
    thr = np.linspace(0.0, 1.0, n)[::-1]
    fg = sum(sum(r) for r in g)
    precision, recall = [], []
    for t in thr:
        tp = fp = 0
        for i in range(len(s)):
            for j in range(len(s[0])):
                if s[i][j] > t:
                    if g[i][j]:
                        tp += 1
                    else:
                        fp += 1
        precision.append(1.0 if tp + fp == 0 else tp / (tp + fp))
        recall.append(tp / fg)
    return thr, np.array(precision), np.array(recall)


def naive_max_f(precision, recall, beta2=0.3):
    best = 0.0
    for p, r in zip(precision, recall):
        den = beta2 * p + r
        f = 0.0 if den == 0 else (1 + beta2) * p * r / den
        best = max(best, f)
    return best


def naive_mae(s, gt):
    s = np.asarray(s)
    gt = np.asarray(gt)
    total = 0.0
    for i in range(s.shape[0]):
        for j in range(s.shape[1]):
            total += abs(float(s[i, j]) - float(gt[i, j]))
    return total / s.size


def _ssim_loop(p, g):
    n = len(p)
    eps = np.finfo(np.float64).eps
    x = sum(p) / n
    y = sum(g) / n
    vx = sum((a - x) ** 2 for a in p) / (n - 1 + eps)
    vy = sum((b - y) ** 2 for b in g) / (n - 1 + eps)
    cxy = sum((a - x) * (b - y) for a, b in zip(p, g)) / (n - 1 + eps)
    alpha = 4 * x * y * cxy
    beta = (x * x + y * y) * (vx + vy)
    if alpha != 0:
        return alpha / (beta + eps)
    return 1.0 if beta == 0 else 0.0


def naive_s_measure(s, gt, mu=0.5, lam=0.5):
    """Loop-based structure measure (object + region terms)."""
    s = np.asarray(s, dtype=float)
    g = (np.asarray(gt) > 0.5).astype(int)
    h, w = g.shape
    eps = np.finfo(np.float64).eps
    y = g.mean()
    if y == 0:
        return 1 - s.mean()
    if y == 1:
        return s.mean()

    def obj(vals):
        n = len(vals)
        m = sum(vals) / n
        sd = math.sqrt(sum((v - m) ** 2 for v in vals) / (n - 1)) if n > 1 else 0.0
        return 2 * m / (m * m + 1 + 2 * lam * sd + eps)

    fg_vals = [s[i, j] for i in range(h) for j in range(w) if g[i, j]]
    bg_vals = [1 - s[i, j] for i in range(h) for j in range(w) if not g[i, j]]
    so = y * obj(fg_vals) + (1 - y) * obj(bg_vals)

    cols = [j for i in range(h) for j in range(w) if g[i, j]]
    rows = [i for i in range(h) for j in range(w) if g[i, j]]
    X = min(int(round(sum(cols) / len(cols))) + 1, w)
    Y = min(int(round(sum(rows) / len(rows))) + 1, h)
    sr = 0.0
    for r0, r1, c0, c1 in ((0, Y, 0, X), (0, Y, X, w), (Y, h, 0, X), (Y, h, X, w)):
        cells = [(i, j) for i in range(r0, r1) for j in range(c0, c1)]
        if cells:
            q = _ssim_loop([s[i, j] for i, j in cells], [float(g[i, j]) for i, j in cells])
            sr += len(cells) / (h * w) * q
    return min(1.0, max(0.0, mu * so + (1 - mu) * sr))


def central_difference(fn, tensors, h=1e-6):
    """Central finite-difference gradients of scalar ``fn()`` w.r.t. each tensor (in place perturbation)."""
    grads = []
    with torch.no_grad():
        for t in tensors:
            g = torch.zeros_like(t)
            flat = t.view(-1)
            gflat = g.view(-1)
            for i in range(flat.numel()):
                old = flat[i].item()
                flat[i] = old + h
                up = float(fn())
                flat[i] = old - h
                down = float(fn())
                flat[i] = old
                gflat[i] = (up - down) / (2 * h)
            grads.append(g)
    return grads


def relative_error(a, b):
    a = torch.cat([x.reshape(-1) for x in a])
    b = torch.cat([x.reshape(-1) for x in b])
    scale = max(a.norm().item(), b.norm().item(), 1e-12)
    return (a - b).norm().item() / scale


def analytic_vs_numeric(fn, tensors, h=1e-6):
    for t in tensors:
        if t.grad is not None:
            t.grad = None
    out = fn()
    grads = torch.autograd.grad(out, tensors, allow_unused=True)
    grads = [torch.zeros_like(t) if g is None else g for g, t in zip(grads, tensors)]
    numeric = central_difference(fn, tensors, h)
    return relative_error(grads, numeric)
