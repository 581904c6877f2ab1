"""Distribution distances used to score sample quality on 2D point sets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MetricReport:
    sliced_w2: float
    mmd_rbf: float
    n_samples: int
    seed: int


def _sliced_w2_dirs(a, b, dirs):
    """Mean 1D transport distance (sorted-difference RMS) over given directions."""
    pa = np.sort(a @ dirs.T, axis=0)
    pb = np.sort(b @ dirs.T, axis=0)
    return float(np.mean(np.sqrt(np.mean((pa - pb) ** 2, axis=0))))


def sliced_w2(a, b, n_proj=64, seed=0):
    """Sliced 2-Wasserstein distance over random unit directions."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("batches must be nonempty")
    if len(a) != len(b):
        raise ValueError(f"batch sizes differ: {len(a)} vs {len(b)}")
    rng = np.random.default_rng(seed)
    theta = rng.uniform(0.0, 2 * np.pi, n_proj)
    dirs = np.column_stack([np.cos(theta), np.sin(theta)])
    return _sliced_w2_dirs(a, b, dirs)


def mmd_rbf(a, b, bandwidth=1.0):
    """Unbiased squared maximum mean discrepancy with an RBF kernel, clamped at 0."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("batches must be nonempty")

    def pair_sq(u, v):
        return ((u[:, None, :] - v[None, :, :]) ** 2).sum(-1)

    gamma = 1.0 / (2.0 * bandwidth ** 2)
    kaa = np.exp(-gamma * pair_sq(a, a))
    kbb = np.exp(-gamma * pair_sq(b, b))
    kab = np.exp(-gamma * pair_sq(a, b))
    na, nb = len(a), len(b)
    est = ((kaa.sum() - np.trace(kaa)) / (na * (na - 1))
           + (kbb.sum() - np.trace(kbb)) / (nb * (nb - 1))
           - 2.0 * kab.mean())
    return max(0.0, float(est))


def evaluate(samples, reference, n_proj=64, seed=0, bandwidth=1.0):
    """Bundle both metrics against a reference set of equal size."""
    n = min(len(samples), len(reference))
    return MetricReport(
        sliced_w2=sliced_w2(samples[:n], reference[:n], n_proj=n_proj, seed=seed),
        mmd_rbf=mmd_rbf(samples[:n], reference[:n], bandwidth=bandwidth),
        n_samples=n, seed=seed)
