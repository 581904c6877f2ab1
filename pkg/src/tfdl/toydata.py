"""2D synthetic conditional datasets with analytic structure.

Every dataset carries integer class labels (needed by the guidance machinery
even when there is a single class) and its pooled per-coordinate standard
deviation ``sigma_d``, the scalar data scale used throughout the pipeline.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, StateError

DATASET_NAMES = ("gauss-mix", "two-moons", "checkerboard")


@dataclass(frozen=True)
class Sample:
    """One clean point and its class condition."""

    x0: np.ndarray
    y: int


@dataclass(frozen=True)
class Dataset:
    name: str
    points: np.ndarray          # (n, 2)
    labels: np.ndarray          # (n,) ints in [0, n_classes)
    sigma_d: float
    n_classes: int = field(default=1)

    def __post_init__(self):
        if self.sigma_d <= 0:
            raise ValueError("sigma_d must be positive")

    def __len__(self):
        return len(self.points)


def _gauss_mix(rng, n, components, comp_std, radius):
    if components == 1:
        means = np.zeros((1, 2))
    else:
        ang = 2 * np.pi * np.arange(components) / components
        means = radius * np.column_stack([np.cos(ang), np.sin(ang)])
    labels = rng.integers(0, components, n)
    pts = means[labels] + comp_std * rng.standard_normal((n, 2))
    return pts, labels, components


def _two_moons(rng, n, noise):
    labels = rng.integers(0, 2, n)
    theta = rng.uniform(0.0, np.pi, n)
    pts = np.empty((n, 2))
    top = labels == 0
    pts[top, 0] = np.cos(theta[top])
    pts[top, 1] = np.sin(theta[top])
    pts[~top, 0] = 1.0 - np.cos(theta[~top])
    pts[~top, 1] = 0.5 - np.sin(theta[~top])
    pts += noise * rng.standard_normal((n, 2))
    pts -= np.array([0.5, 0.25])  # center the pair of arcs at the origin
    return pts, labels, 2


def _checkerboard(rng, n, extent=2.0, tiles=4):
    pts = rng.uniform(-extent, extent, (n, 2))
    ij = np.floor((pts + extent) / (2 * extent / tiles)).astype(int)
    ij = np.clip(ij, 0, tiles - 1)
    labels = (ij[:, 0] + ij[:, 1]) % 2
    return pts, labels, 2


def generate(name, n, seed, components=3, comp_std=0.3, radius=2.0,
             moon_noise=0.08):
    """Draw a named dataset deterministically from ``seed``."""
    if n < 2:
        raise ValueError("need at least 2 points to estimate sigma_d")
    rng = np.random.default_rng(seed)
    if name == "gauss-mix":
        pts, labels, k = _gauss_mix(rng, n, components, comp_std, radius)
    elif name == "two-moons":
        pts, labels, k = _two_moons(rng, n, moon_noise)
    elif name == "checkerboard":
        pts, labels, k = _checkerboard(rng, n)
    else:
        raise ConfigurationError(f"unknown dataset {name!r}; expected one of {DATASET_NAMES}")
    sigma_d = float(np.std(pts))
    return Dataset(name, pts, labels.astype(np.int64), sigma_d, k)


def minibatch(ds, b, rng):
    """Uniform with-replacement batch of ``Sample``s."""
    x0, y = minibatch_arrays(ds, b, rng)
    return [Sample(x0[i], int(y[i])) for i in range(b)]


def minibatch_arrays(ds, b, rng):
    """Array form of ``minibatch``: (x0 of shape (b, 2), labels of shape (b,))."""
    if b < 1:
        raise ValueError("batch size must be at least 1")
    if len(ds) == 0:
        raise StateError("cannot sample from an empty dataset")
    idx = rng.integers(0, len(ds), b)
    return ds.points[idx], ds.labels[idx]


def batch_arrays(batch):
    """Coerce either (x0, y) arrays or a list of Samples to array form."""
    if isinstance(batch, tuple):
        return np.asarray(batch[0], dtype=np.float64), np.asarray(batch[1], dtype=np.int64)
    x0 = np.stack([s.x0 for s in batch])
    y = np.asarray([s.y for s in batch], dtype=np.int64)
    return x0, y


def dump_csv(ds, path):
    """Write points as ``x,y,label`` rows."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "label"])
        for (px, py), lab in zip(ds.points, ds.labels):
            w.writerow([repr(float(px)), repr(float(py)), int(lab)])
