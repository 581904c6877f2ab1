"""Conditional velocity network for 2D points.

An MLP (width 128, depth 4, SiLU) with a single-head attention block over a
token reshaping of the hidden state. Time enters through a sinusoidal
embedding of ``c_noise_scale * t``; the guidance scale enters through an
embedding of ``0.1 * cfg`` added to the time embedding; class conditions come
from a learned table with one reserved null row for the unconditional branch.

The same forward code runs in three modes: plain ndarrays for inference,
``Dual`` arrays for exact forward-mode tangents (jvp), and tape ``Var`` leaves
for reverse-mode gradients (grad).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Dual, cat, primal, reshape, silu, sin, cos, softmax, swap_last, take_rows, vmean
from .errors import NumericsError
from .optim import ParamVector

_RMS_EPS = 1e-30  # keeps 0/0 finite without breaking positive-scale invariance


@dataclass
class DualBatch:
    """Carrier for forward-mode inputs: primal points/times and their tangents."""

    primal: np.ndarray
    tangent: np.ndarray
    t_primal: np.ndarray
    t_tangent: np.ndarray

    def __post_init__(self):
        if np.shape(self.primal) != np.shape(self.tangent):
            raise ValueError("primal and tangent shapes differ")


def _as_batch(x):
    x = np.asarray(x, dtype=np.float64)
    return x.reshape(1, -1) if x.ndim == 1 else x


def _as_vec(v, n, dtype=np.float64):
    v = np.asarray(v, dtype=dtype)
    if v.ndim == 0:
        v = np.full(n, v, dtype=dtype)
    return v


class VelocityNet:
    """F(x, t, y, cfg) with value, forward-mode JVP, and reverse-mode gradient."""

    def __init__(self, n_classes, width=128, depth=4, n_freq=64, n_tokens=8,
                 attention=True, qk_norm=True, c_noise_scale=1.0, seed=0,
                 zero_out=True):
        if width != 2 * n_freq:
            raise ValueError("width must equal 2*n_freq so the time embedding adds directly")
        if width % n_tokens:
            raise ValueError("width must be divisible by n_tokens")
        self.n_classes = n_classes
        self.width = width
        self.depth = depth
        self.n_freq = n_freq
        self.n_tokens = n_tokens
        self.d_token = width // n_tokens
        self.attention = attention
        self.qk_norm = qk_norm
        self.c_noise_scale = float(c_noise_scale)
        self.attn_at = depth // 2

        segs = [("time_freq", (n_freq,)),
                ("cls_table", (n_classes + 1, width)),
                ("cfg_proj", (width, width)),
                ("in_w", (2, width)), ("in_b", (width,))]
        for i in range(depth):
            segs += [(f"h{i}_w", (width, width)), (f"h{i}_b", (width,))]
        if attention:
            d = self.d_token
            segs += [("attn_wq", (d, d)), ("attn_wk", (d, d)),
                     ("attn_wv", (d, d)), ("attn_wo", (d, d))]
        segs += [("out_w", (width, 2)), ("out_b", (2,))]
        self.params = ParamVector(segs)
        self._init_params(seed, zero_out)

    def _init_params(self, seed, zero_out):
        rng = np.random.default_rng(seed)
        p = self.params
        # top frequency capped so central differences at h=1e-5 stay a valid
        # oracle for the tangents: truncation ~ (f*h*|tan|)^2/6 per dimension
        p["time_freq"] = np.geomspace(1.0, 300.0, self.n_freq)
        p["cls_table"] = 0.02 * rng.standard_normal(p.shapes["cls_table"])
        p["in_w"] = rng.standard_normal((2, self.width)) / np.sqrt(2.0)
        for i in range(self.depth):
            p[f"h{i}_w"] = rng.standard_normal((self.width, self.width)) * np.sqrt(2.0 / self.width)
        if self.attention:
            d = self.d_token
            for name in ("attn_wq", "attn_wk", "attn_wv"):
                p[name] = rng.standard_normal((d, d)) / np.sqrt(d)
            # attn_wo starts at zero: the block begins as an identity residual
        if not zero_out:
            p["out_w"] = rng.standard_normal((self.width, 2)) / np.sqrt(self.width)
            p["out_b"] = 0.01 * rng.standard_normal(2)

    # -- shared forward ------------------------------------------------------

    def _attn(self, P, h):
        tok = reshape(h, (-1, self.n_tokens, self.d_token))
        q = tok @ P["attn_wq"]
        k = tok @ P["attn_wk"]
        v = tok @ P["attn_wv"]
        if self.qk_norm:
            q = q * (vmean(q * q, axis=-1, keepdims=True) + _RMS_EPS) ** -0.5
            k = k * (vmean(k * k, axis=-1, keepdims=True) + _RMS_EPS) ** -0.5
        logits = (q @ swap_last(k)) * (1.0 / np.sqrt(self.d_token))
        o = softmax(logits, axis=-1) @ v
        return reshape(o @ P["attn_wo"], (-1, self.width))

    def _time_embed(self, P, t):
        args = reshape(t * self.c_noise_scale, (-1, 1)) * P["time_freq"]
        return cat([sin(args), cos(args)], axis=-1)

    def _core(self, P, x, t, y, cfg, collect_hidden=False):
        emb_t = self._time_embed(P, t)
        uarg = reshape(cfg * 0.1, (-1, 1)) * P["time_freq"]
        emb_c = cat([sin(uarg), cos(uarg)], axis=-1) @ P["cfg_proj"]
        cond = emb_t + take_rows(P["cls_table"], y) + emb_c
        h = x @ P["in_w"] + P["in_b"] + cond
        hidden = []
        for i in range(self.depth):
            if self.attention and i == self.attn_at:
                h = h + self._attn(P, h)
            h = silu(h @ P[f"h{i}_w"] + P[f"h{i}_b"])
            if collect_hidden:
                hidden.append(h)
        out = h @ P["out_w"] + P["out_b"]
        return (out, hidden) if collect_hidden else out

    def _prep(self, x, t, y, cfg):
        if not isinstance(x, (Dual, ad.Var)):
            x = _as_batch(x)
        n = primal(x).shape[0]
        if not isinstance(t, (Dual, ad.Var)):
            t = _as_vec(t, n)
        y = _as_vec(y, n, dtype=np.int64)
        if not isinstance(cfg, (Dual, ad.Var)):
            cfg = _as_vec(0.0 if cfg is None else cfg, n)
        if not (np.all(np.isfinite(primal(x))) and np.all(np.isfinite(primal(t)))
                and np.all(np.isfinite(primal(cfg)))):
            raise NumericsError("non-finite network input")
        if np.any(y < 0) or np.any(y > self.n_classes):
            raise ValueError("class index outside the embedding table")
        return x, t, y, cfg

    # -- public evaluation ----------------------------------------------------

    def forward(self, x, t, y, cfg=None, params=None, return_hidden=False):
        """Velocity prediction, shape (B, 2)."""
        x, t, y, cfg = self._prep(x, t, y, cfg)
        P = self.params if params is None else params
        return self._core(P, x, t, y, cfg, collect_hidden=return_hidden)

    def jvp(self, x, t, y, cfg, x_tan, t_tan):
        """Value and exact directional derivative along (x_tan, t_tan)."""
        x, t, y, cfg = self._prep(x, t, y, cfg)
        db = DualBatch(x, np.broadcast_to(np.asarray(x_tan, dtype=np.float64), x.shape),
                       t, np.broadcast_to(np.asarray(t_tan, dtype=np.float64), t.shape))
        out = self._core(self.params, Dual(db.primal, db.tangent), Dual(db.t_primal, db.t_tangent), y, cfg)
        if not np.all(np.isfinite(out.t)):
            raise NumericsError("non-finite JVP tangent")
        return out.p, out.t

    def value_and_grad(self, loss_fn):
        """Evaluate ``loss_fn(param_leaves)`` and return (value, flat gradient)."""
        leaves = self.params.as_vars()
        loss = loss_fn(leaves)
        if not np.all(np.isfinite(loss.v)):
            raise NumericsError("non-finite loss")
        loss.backward()
        return float(loss.v), self.params.gradient_from(leaves)

    def grad(self, loss_fn):
        """Flat reverse-mode gradient of a scalar loss over all parameters."""
        return self.value_and_grad(loss_fn)[1]

    def time_embed_sensitivity(self, t):
        """Norm of the time-embedding derivative d emb(c_noise(t))/dt."""
        td = Dual(np.asarray([t], dtype=np.float64), np.ones(1))
        emb = self._time_embed(self.params, td)
        return float(np.sqrt(np.sum(emb.t ** 2)))

    # -- construction helpers ---------------------------------------------

    def spawn(self, c_noise_scale=None, qk_norm=None):
        """Copy of this net, optionally with a different scale or QK-norm flag."""
        other = VelocityNet(self.n_classes, self.width, self.depth, self.n_freq,
                            self.n_tokens, self.attention,
                            self.qk_norm if qk_norm is None else qk_norm,
                            self.c_noise_scale if c_noise_scale is None else c_noise_scale)
        other.params.flat[:] = self.params.flat
        return other

    @property
    def null_class(self):
        return self.n_classes

    def meta(self):
        """Static hyperparameters needed to rebuild the net from a checkpoint."""
        return {"n_classes": self.n_classes, "width": self.width,
                "depth": self.depth, "n_freq": self.n_freq,
                "n_tokens": self.n_tokens, "attention": self.attention,
                "qk_norm": self.qk_norm, "c_noise_scale": self.c_noise_scale}

    @classmethod
    def from_meta(cls, meta):
        return cls(meta["n_classes"], meta["width"], meta["depth"],
                   meta["n_freq"], meta["n_tokens"], meta["attention"],
                   meta["qk_norm"], meta["c_noise_scale"])
