"""Hybrid consistency + adversarial distillation of a pretrained flow teacher.

One training step alternates a discriminator update and a generator update:

* discriminator — hinge loss on multiple small heads reading hidden features
  of the frozen teacher, evaluated on renoised real and generated points;
* generator — continuous-time consistency loss whose target tangent comes
  from one exact forward-mode JVP of the stop-gradient student (warmed up by
  a ramp r and normalized per sample to ||g||/(||g||+c)), plus an adaptive
  log-variance weight head on t, plus the hinge generator term.

Stop-gradient and frozen-module semantics are structural: those branches are
evaluated on plain arrays and never enter the reverse-mode tape.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .autodiff import Dual, exp as vexp, relu, reshape, silu, vmean, vsum
from .errors import DomainError, NumericsError, TrainingDivergence
from .optim import Adam, ParamVector
from .schedule import HALF_PI, TimestepDistribution, sample_t
from .toydata import batch_arrays, minibatch_arrays
from .trigflow import TrigFlowAdapter

DATA_DIM = 2


def primal_scalar(x):
    return x.v if hasattr(x, "v") else np.asarray(x)


@dataclass
class DistillConfig:
    lr: float = 1e-4
    iters: int = 4000
    batch: int = 96
    lambda_adv: float = 0.5
    warmup_H: int = 1000
    tangent_c: float = 0.1
    gen_tdist: TimestepDistribution = field(
        default_factory=lambda: TimestepDistribution(0.0, 1.6, None, 0.5))
    disc_tdist: TimestepDistribution = field(
        default_factory=lambda: TimestepDistribution(-0.6, 1.0, None, 0.0))
    cfg_scales: tuple = (4.0, 4.5, 5.0)
    use_scm: bool = True
    head_width: int = 64
    wphi_width: int = 32

    def __post_init__(self):
        if self.lambda_adv < 0:
            raise ValueError("lambda_adv must be non-negative")
        if self.warmup_H < 1:
            raise ValueError("warmup_H must be at least 1")
        if self.tangent_c <= 0:
            raise ValueError("tangent_c must be positive")
        if not self.use_scm and self.lambda_adv == 0:
            raise ValueError("at least one of the consistency and adversarial terms must be on")


class AdaptiveWeight:
    """Small MLP head w(t) on a sinusoidal embedding of the timestep."""

    def __init__(self, width=32, n_freq=64, seed=0):
        self.freqs = np.geomspace(1.0, 1e3, n_freq)
        d = 2 * n_freq
        self.params = ParamVector([("w1", (d, width)), ("b1", (width,)),
                                   ("w2", (width, 1)), ("b2", (1,))])
        rng = np.random.default_rng(seed)
        self.params["w1"] = rng.standard_normal((d, width)) / np.sqrt(d)
        self.params["w2"] = rng.standard_normal((width, 1)) / np.sqrt(width)

    def forward(self, t, params=None):
        P = self.params if params is None else params
        args = np.asarray(t, dtype=np.float64).reshape(-1, 1) * self.freqs
        emb = np.concatenate([np.sin(args), np.cos(args)], axis=1)
        h = silu(emb @ P["w1"] + P["b1"])
        return reshape(h @ P["w2"] + P["b2"], (-1,))


class DiscriminatorHeads:
    """One tiny MLP scorer per tapped feature depth of the frozen teacher."""

    def __init__(self, n_heads, feat_dim, width=64, seed=0):
        segs = []
        for k in range(n_heads):
            segs += [(f"h{k}_w1", (feat_dim, width)), (f"h{k}_b1", (width,)),
                     (f"h{k}_w2", (width, 1)), (f"h{k}_b2", (1,))]
        self.n_heads = n_heads
        self.params = ParamVector(segs)
        rng = np.random.default_rng(seed)
        for k in range(n_heads):
            self.params[f"h{k}_w1"] = rng.standard_normal((feat_dim, width)) / np.sqrt(feat_dim)
            self.params[f"h{k}_w2"] = rng.standard_normal((width, 1)) / np.sqrt(width)

    def scores(self, feats, params=None):
        """Per-head scalar scores, one (B,) array per tapped feature."""
        P = self.params if params is None else params
        out = []
        for k, f in enumerate(feats):
            h = silu(f @ P[f"h{k}_w1"] + P[f"h{k}_b1"])
            out.append(reshape(h @ P[f"h{k}_w2"] + P[f"h{k}_b2"], (-1,)))
        return out


@dataclass
class DistillState:
    """Everything the alternating loop updates or freezes.

    ``student_stopgrad`` is the same adapter evaluated outside the tape: it is
    numerically identical to the student at all times and contributes no
    gradient.
    """

    student: TrigFlowAdapter
    teacher: TrigFlowAdapter
    heads: DiscriminatorHeads
    wphi: AdaptiveWeight
    gen_tdist: TimestepDistribution
    disc_tdist: TimestepDistribution
    opt_student: Adam
    opt_wphi: Adam
    opt_heads: Adam
    iters_done: int = 0

    @property
    def student_stopgrad(self):
        return self.student


def init_distill(teacher_net, ds, config, seed=0):
    """Build the training state: student starts as a copy of the teacher."""
    student_net = teacher_net.spawn()
    teacher = TrigFlowAdapter(teacher_net, ds.sigma_d, teacher_cfg=True)
    student = TrigFlowAdapter(student_net, ds.sigma_d, teacher_cfg=False)
    heads = DiscriminatorHeads(teacher_net.depth, teacher_net.width,
                               width=config.head_width, seed=seed + 1)
    wphi = AdaptiveWeight(width=config.wphi_width, seed=seed + 2)
    return DistillState(
        student=student, teacher=teacher, heads=heads, wphi=wphi,
        gen_tdist=config.gen_tdist.with_sigma_d(ds.sigma_d),
        disc_tdist=config.disc_tdist.with_sigma_d(ds.sigma_d),
        opt_student=Adam(student_net.params.size, config.lr),
        opt_wphi=Adam(wphi.params.size, config.lr),
        opt_heads=Adam(heads.params.size, config.lr),
    )


# -- consistency branch ------------------------------------------------------

def _tangent_and_value(state, x_t, t, y, cfg, r, tangent_c):
    """Normalized target tangent g plus the stop-gradient student value."""
    sd = state.student.sigma_d
    dxdt = sd * np.asarray(state.teacher.velocity(x_t, t, y, cfg=cfg))
    out = state.student_stopgrad.velocity(Dual(x_t, dxdt), Dual(t, np.ones_like(t)), y, cfg=cfg)
    f_sg, df_dt = out.p, out.t
    if not np.all(np.isfinite(df_dt)):
        raise NumericsError("non-finite JVP in consistency tangent")
    ct, st = np.cos(t)[:, None], np.sin(t)[:, None]
    g = -ct * ct * (sd * f_sg - dxdt) - r * ct * st * (x_t + sd * df_dt)
    norm = np.linalg.norm(g, axis=1, keepdims=True)
    g = g / (norm + tangent_c)
    return g, f_sg


def scm_tangent(state, x_t, t, y, cfg, r, tangent_c=0.1):
    """Per-sample normalized tangent target for the consistency loss."""
    t = np.asarray(t, dtype=np.float64)
    return _tangent_and_value(state, np.asarray(x_t, dtype=np.float64), t,
                              np.asarray(y), cfg, r, tangent_c)[0]


def _scm_objective(state, x_t, t, y, cfg, g, f_sg, student_leaves, wphi_leaves):
    """Tape-mode consistency loss; g and f_sg enter as constants."""
    f_live = state.student.velocity(x_t, t, y, cfg=cfg, params=student_leaves)
    w = state.wphi.forward(t, params=wphi_leaves)
    resid = f_live - (f_sg + g)
    per = vexp(w) * (1.0 / DATA_DIM) * vsum(resid * resid, axis=1) - w
    return vmean(per)


def _draw_gen_batch(state, x0, rng, cfg_scales):
    b = len(x0)
    z = state.student.sigma_d * rng.standard_normal((b, 2))
    t = sample_t(replace(state.gen_tdist, max_time_prob=0.0), rng, b)
    cfg = float(rng.choice(cfg_scales))
    return z, t, cfg


def scm_loss(state, batch, rng, r=1.0, tangent_c=0.1, cfg_scales=(4.0, 4.5, 5.0)):
    """Value of the consistency loss on a fresh draw (no adversarial term)."""
    x0, y = batch_arrays(batch)
    z, t, cfg = _draw_gen_batch(state, x0, rng, cfg_scales)
    x_t = np.cos(t)[:, None] * x0 + np.sin(t)[:, None] * z
    g, f_sg = _tangent_and_value(state, x_t, t, y, cfg, r, tangent_c)
    f_live = np.asarray(state.student.velocity(x_t, t, y, cfg=cfg))
    w = np.asarray(state.wphi.forward(t))
    per = np.exp(w) / DATA_DIM * np.sum((f_live - f_sg - g) ** 2, axis=1) - w
    return float(np.mean(per))


def one_step_generate(state, x_t, t, y, cfg=None):
    """Student's solution-point prediction; t must lie in (0, pi/2]."""
    t = np.asarray(t, dtype=np.float64)
    if np.any(t <= 0) or np.any(t > HALF_PI):
        raise DomainError("one-step generation needs t in (0, pi/2]")
    return np.asarray(state.student.consistency(x_t, t, y, cfg=cfg))


# -- adversarial branch ------------------------------------------------------

def hinge_disc(real_scores, fake_scores):
    """Hinge discriminator objective summed over heads."""
    loss = 0.0
    for d_real, d_fake in zip(real_scores, fake_scores):
        loss = loss + vmean(relu(1.0 - d_real)) + vmean(relu(1.0 + d_fake))
    return loss


def hinge_gen(fake_scores):
    """Hinge generator objective: negative mean score summed over heads."""
    loss = 0.0
    for d_fake in fake_scores:
        loss = loss - vmean(d_fake)
    return loss


def _mix_max_time(t, p, rng):
    if p <= 0:
        return t
    xi = rng.uniform(0.0, 1.0, len(t))
    return np.where(xi < p, HALF_PI, t)


def _fake_clean(state, x0, y, z, t, cfg, student_leaves=None):
    """Generated clean points from renoised data; tape-mode iff leaves given."""
    x_t = np.cos(t)[:, None] * x0 + np.sin(t)[:, None] * z
    return state.student.consistency(x_t, t, y, cfg=cfg, params=student_leaves)


def _renoise(xhat0, s, z):
    cs, ss = np.cos(s)[:, None], np.sin(s)[:, None]
    return xhat0 * cs + ss * z


def disc_loss(state, batch, rng, cfg_scales=(4.0, 4.5, 5.0), head_leaves=None):
    """Hinge discriminator loss on frozen-teacher features (real vs fake)."""
    x0, y = batch_arrays(batch)
    z, t, cfg = _draw_gen_batch(state, x0, rng, cfg_scales)
    t = _mix_max_time(t, state.gen_tdist.max_time_prob, rng)
    xhat0 = np.asarray(_fake_clean(state, x0, y, z, t, cfg))
    s = sample_t(state.disc_tdist, rng, len(x0))
    x_s = np.cos(s)[:, None] * x0 + np.sin(s)[:, None] * z
    # one doubled teacher pass covers both the real and the generated batch
    both = state.teacher.features(np.concatenate([x_s, _renoise(xhat0, s, z)]),
                                  np.concatenate([s, s]), np.concatenate([y, y]))
    n = len(x0)
    real_feats = [f[:n] for f in both]
    fake_feats = [f[n:] for f in both]
    loss = hinge_disc(state.heads.scores(real_feats, params=head_leaves),
                      state.heads.scores(fake_feats, params=head_leaves))
    return loss if head_leaves is not None else float(np.asarray(loss))


def gen_adv_loss(state, batch, rng, cfg_scales=(4.0, 4.5, 5.0), student_leaves=None):
    """Generator hinge term: negative mean head score on generated points."""
    x0, y = batch_arrays(batch)
    z, t, cfg = _draw_gen_batch(state, x0, rng, cfg_scales)
    t = _mix_max_time(t, state.gen_tdist.max_time_prob, rng)
    xhat0 = _fake_clean(state, x0, y, z, t, cfg, student_leaves=student_leaves)
    s = sample_t(state.disc_tdist, rng, len(x0))
    fake_feats = state.teacher.features(_renoise(xhat0, s, z), s, y)
    loss = hinge_gen(state.heads.scores(fake_feats))
    return loss if student_leaves is not None else float(np.asarray(loss))


# -- alternating step --------------------------------------------------------

def _generator_objective(state, config, r, x0, y, z, t, t_gan, s, cfg,
                         student_leaves, wphi_leaves, g=None, f_sg=None):
    """Combined generator loss as a deterministic function of the draws.

    With Var leaves this builds the tape; with plain parameter views it
    evaluates the same number, which is how the finite-difference checks of
    the stop-gradient contract probe it. ``g``/``f_sg`` may be passed
    precomputed to hold the stop-gradient branch fixed.
    """
    total = 0.0
    scm_val = adv_val = 0.0
    if config.use_scm:
        x_t = np.cos(t)[:, None] * x0 + np.sin(t)[:, None] * z
        if g is None:
            g, f_sg = _tangent_and_value(state, x_t, t, y, cfg, r, config.tangent_c)
        total = _scm_objective(state, x_t, t, y, cfg, g, f_sg,
                               student_leaves, wphi_leaves)
        scm_val = float(primal_scalar(total))
    if config.lambda_adv > 0:
        xhat0 = _fake_clean(state, x0, y, z, t_gan, cfg, student_leaves=student_leaves)
        fake_feats = state.teacher.features(_renoise(xhat0, s, z), s, y)
        adv = hinge_gen(state.heads.scores(fake_feats))
        adv_val = float(primal_scalar(adv))
        total = total + config.lambda_adv * adv
    return total, scm_val, adv_val


def distill_step(state, config, ds, rng):
    """One discriminator update followed by one generator update."""
    metrics = {"iter": state.iters_done, "adv_d": 0.0}

    if config.lambda_adv > 0:
        batch = minibatch_arrays(ds, config.batch, rng)
        head_leaves = state.heads.params.as_vars()
        try:
            d_obj = disc_loss(state, batch, rng, config.cfg_scales, head_leaves=head_leaves)
            d_obj.backward()
            state.opt_heads.step(state.heads.params.flat,
                                 state.heads.params.gradient_from(head_leaves))
        except NumericsError as exc:
            raise TrainingDivergence(state.iters_done, str(exc)) from exc
        metrics["adv_d"] = float(d_obj.v)
    state.iters_done += 1

    r = min(1.0, state.iters_done / config.warmup_H)
    x0, y = minibatch_arrays(ds, config.batch, rng)
    z, t, cfg = _draw_gen_batch(state, x0, rng, config.cfg_scales)
    t_gan = s = None
    if config.lambda_adv > 0:
        t_gan = _mix_max_time(t, state.gen_tdist.max_time_prob, rng)
        s = sample_t(state.disc_tdist, rng, config.batch)

    student_leaves = state.student.inner.params.as_vars()
    wphi_leaves = state.wphi.params.as_vars()
    try:
        total, scm_val, adv_val = _generator_objective(
            state, config, r, x0, y, z, t, t_gan, s, cfg, student_leaves, wphi_leaves)
        total.backward()
        g_student = state.student.inner.params.gradient_from(student_leaves)
        state.opt_student.step(state.student.inner.params.flat, g_student)
        if config.use_scm:
            state.opt_wphi.step(state.wphi.params.flat,
                                state.wphi.params.gradient_from(wphi_leaves))
    except NumericsError as exc:
        raise TrainingDivergence(state.iters_done, str(exc)) from exc
    state.iters_done += 1

    metrics.update({"scm_loss": scm_val, "adv_g": adv_val,
                    "grad_norm": float(np.linalg.norm(g_student)),
                    "r": r, "t_mean": float(np.mean(t))})
    return metrics


def distill(teacher_net, ds, config, rng, seed=0, on_step=None):
    """Run the full alternating loop; returns (state, metric rows)."""
    state = init_distill(teacher_net, ds, config, seed=seed)
    rows = []
    for _ in range(config.iters):
        row = distill_step(state, config, ds, rng)
        rows.append(row)
        if on_step is not None:
            on_step(state, row)
    return state, rows
