"""Reconstruction quality metrics."""

import numpy as np

SUPPORT_THRESHOLD = 1e-4


def absolute_error(estimate, target) -> float:
    return float(np.sum(np.abs(np.asarray(estimate) - np.asarray(target))))


def squared_error(estimate, target) -> float:
    return float(np.sum((np.asarray(estimate) - np.asarray(target)) ** 2))


def tv_support_count(estimate, threshold: float = SUPPORT_THRESHOLD) -> int:
    """Number of jumps |x_(i+1) - x_i| above the threshold."""
    return int(np.count_nonzero(np.abs(np.diff(np.asarray(estimate, dtype=float))) > threshold))


def mean_squared_error(estimate, target) -> float:
    """||estimate - target||^2, the per-trial error averaged across trials."""
    return squared_error(estimate, target)
