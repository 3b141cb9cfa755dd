"""Losses returning (scalar value, gradient w.r.t. the prediction)."""

from __future__ import annotations

import numpy as np

from .layers import sigmoid


def mse(pred, target):
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    diff = pred - target
    value = float(np.mean(diff ** 2))
    return value, (2.0 / diff.size) * diff


def mean_abs(pred, target):
    """Metric only; the subgradient at zero is taken as zero."""
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    diff = pred - target
    value = float(np.mean(np.abs(diff)))
    return value, np.sign(diff) / diff.size


def bce_with_logits(logits, labels):
    """Binary cross-entropy on raw scores, numerically stable in both
    tails: max(z,0) - z*y + log(1 + exp(-|z|))."""
    z = np.asarray(logits, dtype=float)
    y = np.asarray(labels, dtype=float)
    value = float(np.mean(np.maximum(z, 0.0) - z * y
                          + np.log1p(np.exp(-np.abs(z)))))
    return value, (sigmoid(z) - y) / z.size


def accel_penalty(a_max_g, limit_g=0.3):
    """Soft one-sided quadratic on the acceleration peak: zero at or
    below the limit, smooth growth above it. Returns value and gradient
    per sample (mean-reduced)."""
    a = np.asarray(a_max_g, dtype=float)
    excess = np.maximum(0.0, a - limit_g)
    value = float(np.mean(excess ** 2))
    return value, (2.0 / a.size) * excess
