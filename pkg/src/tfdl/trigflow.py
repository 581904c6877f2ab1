"""Training-free adaptation of a flow-matching net to the trigonometric schedule.

A flow-matching model cannot directly denoise cos/sin-scheduled data: the time
domains, data scales, and prediction targets all differ. The adapter fixes all
three with closed-form maps,

    t_fm     = sin(t) / (sin(t) + cos(t))
    lambda   = sqrt(t_fm^2 + (1 - t_fm)^2)
    x_fm     = (x / sigma_d) * lambda
    output   = [(1 - 2 t_fm) x_fm + (1 - 2 t_fm + 2 t_fm^2) v(x_fm, t_fm)] / lambda

which preserve the signal-to-noise ratio exactly and are differentiable, so
both forward-mode tangents and reverse-mode gradients flow through them.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import primal, reshape, sqrt
from .errors import DomainError, NumericsError
from .schedule import HALF_PI
from .teacher import cfg_velocity


def _check_trig_domain(t):
    tp = primal(t)
    if np.any(tp < 0) or np.any(tp > HALF_PI + 1e-12):
        raise DomainError("trig time outside [0, pi/2]")


def t_fm_of(t_trig):
    """Map a trig-schedule time to the flow-matching time of equal SNR."""
    _check_trig_domain(t_trig)
    s, c = ad.sin(t_trig), ad.cos(t_trig)
    return s / (s + c)


def scale_factor(t_fm):
    """Data-scale correction sqrt(t_fm^2 + (1 - t_fm)^2); minimum at 0.5."""
    omt = 1.0 - t_fm
    return sqrt(t_fm * t_fm + omt * omt)


class TrigFlowAdapter:
    """Wraps one flow-matching net as a trig-schedule velocity model.

    ``teacher_cfg=True`` evaluates the inner net with explicit two-branch
    guidance (the scale combines conditional and unconditional passes);
    otherwise the scale is consumed by the net's own guidance embedding.
    """

    def __init__(self, inner, sigma_d, teacher_cfg=False):
        if sigma_d <= 0:
            raise ValueError("sigma_d must be positive")
        self.inner = inner
        self.sigma_d = float(sigma_d)
        self.teacher_cfg = teacher_cfg

    def velocity(self, x, t, y, cfg=None, params=None, return_hidden=False):
        """Trig-schedule velocity estimate from raw-scale input x."""
        tf = t_fm_of(t)
        lam = scale_factor(tf)
        x_fm = (x * (1.0 / self.sigma_d)) * reshape(lam, (-1, 1))
        if self.teacher_cfg:
            scale = 1.0 if cfg is None else cfg
            if return_hidden:
                # feature taps come from the conditional branch only
                v_c, hidden = self.inner.forward(x_fm, tf, y, cfg=0.0,
                                                 params=params, return_hidden=True)
                v = v_c if np.ndim(scale) == 0 and scale == 1.0 else None
                if v is None:
                    null_y = np.full_like(np.asarray(y), self.inner.n_classes)
                    v_u = self.inner.forward(x_fm, tf, null_y, cfg=0.0, params=params)
                    v = v_u + (v_c - v_u) * scale
            else:
                v = cfg_velocity(self.inner, x_fm, tf, y, scale, params=params)
        else:
            out = self.inner.forward(x_fm, tf, y, cfg=cfg, params=params,
                                     return_hidden=return_hidden)
            if return_hidden:
                out, hidden = out
            v = out
        a = reshape(1.0 - tf * 2.0, (-1, 1))
        b = reshape(1.0 - tf * 2.0 + tf * tf * 2.0, (-1, 1))
        result = (a * x_fm + b * v) * reshape(lam ** -1.0, (-1, 1))
        return (result, hidden) if return_hidden else result

    def consistency(self, x, t, y, cfg=None, params=None):
        """Solution-point prediction cos(t) x - sin(t) sigma_d F(x/sigma_d, t)."""
        _check_trig_domain(t)
        ct = reshape(ad.cos(t), (-1, 1))
        st = reshape(ad.sin(t), (-1, 1))
        return ct * x - st * (self.velocity(x, t, y, cfg=cfg, params=params) * self.sigma_d)

    def features(self, x, t, y, params=None):
        """Hidden activations of the (conditional) inner pass at raw-scale x."""
        _, hidden = self.velocity(x, t, y, cfg=1.0 if self.teacher_cfg else 0.0,
                                  params=params, return_hidden=True)
        return hidden


def trig_velocity(adapter, x, t, y, cfg=None, params=None):
    return adapter.velocity(x, t, y, cfg=cfg, params=params)


def consistency_f(adapter, x, t, y, cfg=None, params=None):
    return adapter.consistency(x, t, y, cfg=cfg, params=params)


def euler_sample_trig(adapter, n, steps, y, cfg, rng):
    """Euler-integrate the trig-schedule ODE from t=pi/2 down to 0."""
    if steps < 1:
        raise ValueError("steps must be at least 1")
    x = adapter.sigma_d * rng.standard_normal((n, 2))
    y = np.full(n, y, dtype=np.int64) if np.ndim(y) == 0 else np.asarray(y, dtype=np.int64)
    ts = np.linspace(HALF_PI, 0.0, steps + 1)
    for i in range(steps):
        t = np.full(n, ts[i])
        v = adapter.velocity(x, t, y, cfg=cfg)
        x = x + (ts[i + 1] - ts[i]) * adapter.sigma_d * np.asarray(v)
        if not np.all(np.isfinite(x)):
            raise NumericsError(f"non-finite state at Euler step {i}")
    return x
