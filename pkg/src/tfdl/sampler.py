"""Few-step sampling schedules and the sequential timestep search.

A ``StepSchedule`` lists strictly decreasing times ending at 0. Sampling
alternates solution-point prediction with renoising at the next time using
fresh noise. The search optimizes the maximum time first (as arctan(n/sigma_d)
over an n-grid), then each later timestep in order with earlier ones held
fixed, scoring every candidate with common random numbers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .schedule import HALF_PI

TMAX_N_GRID = (50.0, 100.0, 200.0, 400.0)


@dataclass(frozen=True)
class StepSchedule:
    times: tuple

    def __post_init__(self):
        ts = tuple(float(t) for t in self.times)
        object.__setattr__(self, "times", ts)
        if len(ts) < 2 or ts[-1] != 0.0:
            raise ValueError("schedule must end at 0.0")
        if any(b >= a for a, b in zip(ts, ts[1:])):
            raise ValueError("schedule times must be strictly decreasing")
        if ts[0] > HALF_PI or any(t < 0 for t in ts):
            raise ValueError("schedule times must lie in [0, pi/2]")

    @property
    def steps(self):
        return len(self.times) - 1


def default_schedule(steps, sigma_d):
    """Reference inference schedules for 1, 2, and 4 steps."""
    if steps == 1:
        return StepSchedule((HALF_PI, 0.0))
    t_max = float(np.arctan(200.0 / sigma_d))
    if steps == 2:
        return StepSchedule((t_max, 1.3, 0.0))
    if steps == 4:
        return StepSchedule((t_max, 1.3, 1.1, 0.6, 0.0))
    raise ConfigurationError(f"unsupported step count {steps}; expected 1, 2 or 4")


def multistep_sample(student, sched, n, y, cfg, rng):
    """Alternate solution prediction and renoising along the schedule."""
    sd = student.sigma_d
    y = np.full(n, y, dtype=np.int64) if np.ndim(y) == 0 else np.asarray(y, dtype=np.int64)
    x = sd * rng.standard_normal((n, 2))
    xhat0 = x
    for i, t_i in enumerate(sched.times[:-1]):
        t = np.full(n, t_i)
        xhat0 = np.asarray(student.consistency(x, t, y, cfg=cfg))
        t_next = sched.times[i + 1]
        if t_next > 0.0:
            z = sd * rng.standard_normal((n, 2))
            x = np.cos(t_next) * xhat0 + np.sin(t_next) * z
    return xhat0


def search_timesteps(student, metric_fn, steps, grid, n_eval, y, cfg,
                     eval_seed=0, tmax_grid=TMAX_N_GRID):
    """Greedy sequential schedule search minimizing ``metric_fn`` on samples.

    Every candidate is scored with the same random numbers (``eval_seed``), so
    score differences reflect the schedule alone. Returns the best schedule
    and the full score table as (step_index, candidate_t, metric) rows.
    """
    grid = sorted(float(g) for g in grid)
    if not grid:
        raise ValueError("candidate grid must be nonempty")

    def score(times):
        sched = StepSchedule(tuple(times) + (0.0,))
        rng = np.random.default_rng(eval_seed)
        return float(metric_fn(multistep_sample(student, sched, n_eval, y, cfg, rng)))

    def score_round(candidates):
        # grid points are independent reads of the student; TFDL_THREADS caps
        # how many evaluate concurrently
        from .runio import max_threads
        workers = min(max_threads(), len(candidates))
        if workers <= 1:
            return [score(c) for c in candidates]
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(score, candidates))

    table = []
    tmax_cands = [float(np.arctan(nn / student.sigma_d)) for nn in tmax_grid]
    vals = score_round([[tm] for tm in tmax_cands])
    table += [(0, tm, val) for tm, val in zip(tmax_cands, vals)]
    times = [tmax_cands[int(np.argmin(vals))]]
    for k in range(1, steps):
        cands = [c for c in grid if 0.0 < c < times[-1]]
        if not cands:
            raise ConfigurationError("no grid candidate fits below the previous timestep")
        vals = score_round([times + [c] for c in cands])
        table += [(k, c, val) for c, val in zip(cands, vals)]
        times.append(cands[int(np.argmin(vals))])
    return StepSchedule(tuple(times) + (0.0,)), table
