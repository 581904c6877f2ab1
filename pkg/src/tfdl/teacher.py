"""Flow-matching teacher: pretraining, guided velocity, and Euler sampling.

The teacher is trained on data standardized to unit scale (points divided by
the dataset's sigma_d); the TrigFlow-side bookkeeping lives in the adapter
that wraps it. Noise is standard Gaussian per the flow-matching convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .autodiff import vmean, vsum
from .errors import NumericsError, TrainingDivergence
from .optim import Adam
from .toydata import batch_arrays, minibatch_arrays


@dataclass
class TeacherConfig:
    lr: float = 8e-4
    lr_decay: str = "cosine"                   # "cosine" or "none"
    iters: int = 2000
    batch: int = 256
    weighting: Optional[Callable] = None       # w(t); None means constant 1
    cfg_scales: tuple = (4.0, 4.5, 5.0)
    uncond_drop_prob: float = 0.1
    log_every: int = 100

    def __post_init__(self):
        if not self.cfg_scales:
            raise ValueError("cfg_scales must be nonempty")
        if not 0.0 <= self.uncond_drop_prob <= 1.0:
            raise ValueError("uncond_drop_prob must lie in [0, 1]")


def _fm_objective(net, params, x0, y, t, z, weighting):
    """Mean of w(t) * ||v(x_t, t, y) - (z - x0)||^2 in any evaluation mode."""
    x_t = (1.0 - t)[:, None] * x0 + t[:, None] * z
    v = net.forward(x_t, t, y, cfg=0.0, params=params)
    target = z - x0
    sq = vsum((v - target) * (v - target), axis=1)
    if weighting is not None:
        sq = sq * weighting(t)
    return vmean(sq)


def _draw_fm_noise(n, n_classes, y, rng, uncond_drop_prob):
    t = rng.uniform(0.0, 1.0, n)
    z = rng.standard_normal((n, 2))
    y = y.copy()
    if uncond_drop_prob > 0:
        drop = rng.uniform(0.0, 1.0, n) < uncond_drop_prob
        y[drop] = n_classes  # null class
    return t, z, y


def fm_loss(net, batch, rng, uncond_drop_prob=0.1, weighting=None):
    """Flow-matching regression loss on one batch (fresh t, z draws)."""
    x0, y = batch_arrays(batch)
    t, z, y = _draw_fm_noise(len(x0), net.n_classes, y, rng, uncond_drop_prob)
    return float(np.asarray(_fm_objective(net, None, x0, y, t, z, weighting)))


def train_teacher(net, ds, cfg, rng):
    """Adam-train the net on standardized data; returns (net, loss curve)."""
    if cfg.iters < 1:
        raise ValueError("iters must be at least 1")
    pts = ds.points / ds.sigma_d
    std_ds = type(ds)(ds.name, pts, ds.labels, 1.0, ds.n_classes)
    opt = Adam(net.params.size, cfg.lr)
    curve = []
    for it in range(cfg.iters):
        if cfg.lr_decay == "cosine":
            opt.lr = cfg.lr * 0.5 * (1.0 + np.cos(np.pi * it / cfg.iters))
        x0, y = minibatch_arrays(std_ds, cfg.batch, rng)
        t, z, y = _draw_fm_noise(cfg.batch, net.n_classes, y, rng, cfg.uncond_drop_prob)
        try:
            val, grad = net.value_and_grad(
                lambda P: _fm_objective(net, P, x0, y, t, z, cfg.weighting))
            opt.step(net.params.flat, grad)
        except NumericsError as exc:
            raise TrainingDivergence(it, str(exc)) from exc
        if it % cfg.log_every == 0 or it == cfg.iters - 1:
            curve.append((it, val))
    return net, curve


def cfg_velocity(net, x, t, y, scale, params=None):
    """Guided velocity v_u + scale * (v_c - v_u); exact at scales 0 and 1."""
    y = np.asarray(y)
    if np.any(y >= net.n_classes):
        raise ValueError("cfg_velocity needs a real class condition, not the null class")
    if np.ndim(scale) == 0 and scale == 1.0:
        return net.forward(x, t, y, cfg=0.0, params=params)
    if np.ndim(scale) == 0 and scale == 0.0:
        return net.forward(x, t, np.full_like(y, net.n_classes), cfg=0.0, params=params)
    if isinstance(x, np.ndarray) and params is None and np.ndim(y) == 1:
        # plain mode: run both guidance branches as one doubled batch
        n = len(x)
        t = np.full(n, t) if np.ndim(t) == 0 else np.asarray(t)
        both = net.forward(np.concatenate([x, x]), np.concatenate([t, t]),
                           np.concatenate([y, np.full_like(y, net.n_classes)]),
                           cfg=0.0)
        v_c, v_u = both[:n], both[n:]
    else:
        null_y = np.full_like(y, net.n_classes)
        v_u = net.forward(x, t, null_y, cfg=0.0, params=params)
        v_c = net.forward(x, t, y, cfg=0.0, params=params)
    s = scale if np.ndim(scale) == 0 else np.asarray(scale)[:, None]
    return v_u + (v_c - v_u) * s


def euler_sample_fm(net, n, steps, y, scale, rng):
    """Euler-integrate the flow ODE from t=1 down to 0 on a uniform grid.

    Works in the teacher's standardized space: the initial state is standard
    Gaussian and outputs carry unit data scale.
    """
    if steps < 1:
        raise ValueError("steps must be at least 1")
    x = rng.standard_normal((n, 2))
    y = np.full(n, y, dtype=np.int64) if np.ndim(y) == 0 else np.asarray(y, dtype=np.int64)
    ts = np.linspace(1.0, 0.0, steps + 1)
    for i in range(steps):
        t = np.full(n, ts[i])
        v = cfg_velocity(net, x, t, y, scale)
        x = x + (ts[i + 1] - ts[i]) * np.asarray(v)
        if not np.all(np.isfinite(x)):
            raise NumericsError(f"non-finite state at Euler step {i}")
    return x
