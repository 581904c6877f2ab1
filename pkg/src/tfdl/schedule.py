"""Noise-schedule families and training-time distributions.

Three interpolation schemes between clean data and Gaussian noise:

* diffusion      — user-supplied (alpha, sigma) on [0, t_max]
* flow-matching  — alpha = 1 - t, sigma = t on [0, 1]
* trigflow       — alpha = cos t, sigma = sin t on [0, pi/2], noise scaled
                   by the data standard deviation sigma_d

Only flow-matching and trigflow are wired into training; the generic
diffusion constructor exists for completeness. All times are float64.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DomainError

HALF_PI = np.pi / 2


@dataclass(frozen=True)
class Schedule:
    family: str
    alpha: Callable
    sigma: Callable
    t_max: float
    sigma_d: Optional[float] = None


def flow_matching():
    return Schedule("flow-matching", lambda t: 1.0 - t, lambda t: np.asarray(t, dtype=np.float64), 1.0)


def trigflow(sigma_d):
    if sigma_d <= 0:
        raise ValueError("sigma_d must be positive")
    return Schedule("trigflow", np.cos, np.sin, HALF_PI, float(sigma_d))


def diffusion(alpha, sigma, t_max):
    return Schedule("diffusion", alpha, sigma, float(t_max))


def _check_domain(sched, t):
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0) or np.any(t > sched.t_max):
        raise DomainError(f"time outside [0, {sched.t_max}] for {sched.family}")
    return t


def perturb(sched, x0, z, t):
    """Noisy point alpha(t)*x0 + sigma(t)*z."""
    t = _check_domain(sched, t)
    x0 = np.asarray(x0, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if x0.shape != z.shape:
        raise ValueError("x0 and z shapes differ")
    a = np.asarray(sched.alpha(t))
    s = np.asarray(sched.sigma(t))
    if x0.ndim > a.ndim:
        a = a[..., None]
        s = s[..., None]
    return a * x0 + s * z


def snr(sched, t):
    """Signal-to-noise ratio alpha(t)^2 / sigma(t)^2."""
    t = _check_domain(sched, t)
    s = np.asarray(sched.sigma(t))
    if np.any(s <= 0):
        raise DomainError("SNR is infinite where sigma(t) = 0")
    a = np.asarray(sched.alpha(t))
    return a * a / (s * s)


@dataclass(frozen=True)
class TimestepDistribution:
    """t = arctan(exp(tau)/sigma_d), tau ~ N(p_mean, p_std^2), with an extra
    atom of mass ``max_time_prob`` at exactly t = pi/2."""

    p_mean: float
    p_std: float
    sigma_d: Optional[float] = None
    max_time_prob: float = 0.0

    def __post_init__(self):
        if self.p_std <= 0:
            raise ValueError("p_std must be positive")
        if not 0.0 <= self.max_time_prob <= 1.0:
            raise ValueError("max_time_prob must lie in [0, 1]")

    def with_sigma_d(self, sigma_d):
        return TimestepDistribution(self.p_mean, self.p_std, float(sigma_d),
                                    self.max_time_prob)


def sample_t(dist, rng, size=None):
    """Draw training timesteps in (0, pi/2]."""
    if dist.sigma_d is None:
        raise ValueError("timestep distribution needs sigma_d before sampling")
    n = 1 if size is None else size
    tau = rng.normal(dist.p_mean, dist.p_std, n)
    t = np.arctan(np.exp(tau) / dist.sigma_d)
    if dist.max_time_prob > 0:
        xi = rng.uniform(0.0, 1.0, n)
        t = np.where(xi < dist.max_time_prob, HALF_PI, t)
    return float(t[0]) if size is None else t
