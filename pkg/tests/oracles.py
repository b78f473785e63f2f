"""Independent brute-force oracles used by the unit and acceptance tests.

These deliberately avoid the library's fast paths: convolution and pooling
walk output coordinates directly, rates and overlaps count frames in plain
python, and AUC comes from the pairwise-rank statistic.
"""

import numpy as np


def conv3d_oracle(x, kernel, bias, padding):
    """Direct-summation cross-correlation over every output coordinate."""
    pt, ph, pw = padding
    xp = np.pad(x, ((0, 0), (0, 0), (pt, pt), (ph, ph), (pw, pw)))
    n, _, t, h, w = x.shape
    o, _, kt, kh, kw = kernel.shape
    to, ho, wo = t + 2 * pt - kt + 1, h + 2 * ph - kh + 1, w + 2 * pw - kw + 1
    out = np.zeros((n, o, to, ho, wo))
    for ni in range(n):
        for oi in range(o):
            for ti in range(to):
                for hi in range(ho):
                    for wi in range(wo):
                        window = xp[ni, :, ti:ti + kt, hi:hi + kh, wi:wi + kw]
                        out[ni, oi, ti, hi, wi] = float(np.sum(window * kernel[oi])) + bias[oi]
    return out


def maxpool_oracle(x):
    """Spatial 1x2x2 max with first-in-scan-order argmax per window."""
    n, c, t, h, w = x.shape
    out = np.zeros((n, c, t, h // 2, w // 2))
    argmax = np.zeros((n, c, t, h // 2, w // 2, 2), dtype=np.int64)
    for ni in range(n):
        for ci in range(c):
            for ti in range(t):
                for hi in range(h // 2):
                    for wi in range(w // 2):
                        best = None
                        for dy in range(2):
                            for dx in range(2):
                                v = x[ni, ci, ti, 2 * hi + dy, 2 * wi + dx]
                                if best is None or v > best[0]:
                                    best = (v, dy, dx)
                        out[ni, ci, ti, hi, wi] = best[0]
                        argmax[ni, ci, ti, hi, wi] = (best[1], best[2])
    return out, argmax


def frame_rates_oracle(predicted, truth, background=0):
    """Counting loop for frame-level TPR and FPR."""
    tp = gesture = fp = bg = 0
    for p, t in zip(predicted, truth):
        if t != background:
            gesture += 1
            if p == t:
                tp += 1
        else:
            bg += 1
            if p != background:
                fp += 1
    tpr = tp / gesture if gesture else None
    fpr = fp / bg if bg else None
    return tpr, fpr


def jaccard_oracle(pred_segments, true_segments, class_id):
    """Set-based intersection over union for one class."""
    pred = set()
    for s in pred_segments:
        if s.class_id == class_id:
            pred |= set(range(s.start, s.end + 1))
    true = set()
    for s in true_segments:
        if s.class_id == class_id:
            true |= set(range(s.start, s.end + 1))
    if not pred and not true:
        return None
    return len(pred & true) / len(pred | true)


def auc_rank_oracle(scores, positive):
    """Mann-Whitney statistic: P(score_pos > score_neg) with ties at 1/2."""
    scores = np.asarray(scores, dtype=np.float64)
    positive = np.asarray(positive, dtype=bool)
    pos = scores[positive]
    neg = scores[~positive]
    if pos.size == 0 or neg.size == 0:
        return None
    wins = (pos[:, None] > neg[None, :]).sum()
    ties = (pos[:, None] == neg[None, :]).sum()
    return (wins + 0.5 * ties) / (pos.size * neg.size)


def nttd_oracle(trigger, start, end):
    """Inclusive-count observed fraction; None outside the segment."""
    if trigger < start or trigger > end:
        return None
    observed = 0
    for t in range(start, end + 1):
        if t <= trigger:
            observed += 1
    return observed / (end - start + 1)
