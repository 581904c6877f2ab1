"""Command-line driver: pretrain, distill, sample, search-steps, eval, plot.

Every subcommand reads a JSON run configuration and writes its artifacts into
the output directory. Exit codes: 0 success, 2 usage error, 3 unreadable
config or missing checkpoint, 1 anything else.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import runio
from .distill import distill
from .errors import ConfigurationError
from .metrics import evaluate
from .sampler import default_schedule, multistep_sample, search_timesteps
from .teacher import train_teacher
from .toydata import dump_csv
from .trigflow import TrigFlowAdapter


def _load_config(path):
    with open(path) as fh:
        return runio.RunConfig.from_json(fh.read())


def _adapter_from_ckpt(path):
    net, meta = runio.load_net(path)
    sigma_d = meta.get("sigma_d")
    if sigma_d is None:
        raise ValueError(f"checkpoint {path} lacks sigma_d metadata")
    teacher_cfg = meta.get("role") == "teacher"
    return TrigFlowAdapter(net, sigma_d, teacher_cfg=teacher_cfg), net, meta


def _eval_labels(ds, n, rng):
    return rng.integers(0, ds.n_classes, n)


def cmd_pretrain(cfg, args):
    ds = runio.build_dataset(cfg)
    net = runio.build_net(cfg, ds.n_classes, seed=cfg.teacher_seed)
    rng = np.random.default_rng(args.seed if args.seed is not None else cfg.teacher_seed)
    net, curve = train_teacher(net, ds, cfg.teacher, rng)
    out = args.out
    runio.save_net(os.path.join(out, "teacher.ckpt"), net,
                   {"sigma_d": ds.sigma_d, "role": "teacher"})
    runio.write_csv(os.path.join(out, "teacher_loss.csv"), ["iter", "loss"], curve)
    dump_csv(ds, os.path.join(out, "dataset.csv"))
    runio.scatter_svg(os.path.join(out, "dataset.svg"), ds.points, ds.labels,
                      title=f"{ds.name} (n={len(ds)})")
    print(f"teacher trained for {cfg.teacher.iters} iters; final loss {curve[-1][1]:.4f}")
    return 0


def cmd_distill(cfg, args):
    ds = runio.build_dataset(cfg)
    teacher_net, meta = runio.load_net(args.ckpt)
    rng = np.random.default_rng(args.seed if args.seed is not None else cfg.distill_seed)
    out = args.out
    every = max(1, cfg.distill.iters // 4)

    def on_step(state, row):
        k = state.iters_done // 2
        if k % every == 0:
            runio.save_net(os.path.join(out, f"student_{k:06d}.ckpt"),
                           state.student.inner,
                           {"sigma_d": ds.sigma_d, "role": "student"})

    state, rows = distill(teacher_net, ds, cfg.distill, rng,
                          seed=cfg.distill_seed, on_step=on_step)
    runio.save_net(os.path.join(out, "student.ckpt"), state.student.inner,
                   {"sigma_d": ds.sigma_d, "role": "student"})
    header = ["iter", "scm_loss", "adv_g", "adv_d", "grad_norm", "r", "t_mean"]
    runio.write_csv(os.path.join(out, "distill_metrics.csv"), header,
                    [[row[h] for h in header] for row in rows])
    print(f"distilled for {cfg.distill.iters} steps; final consistency loss "
          f"{rows[-1]['scm_loss']:.4f}")
    return 0


def cmd_sample(cfg, args):
    student, _, _ = _adapter_from_ckpt(args.ckpt)
    ds = runio.build_dataset(cfg)
    seed = args.seed if args.seed is not None else cfg.eval_seed
    rng = np.random.default_rng(seed)
    sched = default_schedule(args.steps, student.sigma_d)
    y = _eval_labels(ds, cfg.eval_samples, rng)
    pts = multistep_sample(student, sched, cfg.eval_samples, y, cfg.eval_cfg_scale, rng)
    runio.write_samples_csv(os.path.join(args.out, f"samples_{args.steps}step.csv"), pts, y)
    runio.scatter_svg(os.path.join(args.out, f"samples_{args.steps}step.svg"), pts, y,
                      title=f"{args.steps}-step samples")
    print(f"wrote {len(pts)} samples at {args.steps} step(s)")
    return 0


def cmd_search_steps(cfg, args):
    student, _, _ = _adapter_from_ckpt(args.ckpt)
    ds = runio.build_dataset(cfg)
    rng = np.random.default_rng(cfg.eval_seed)
    ref = ds.points[rng.integers(0, len(ds), cfg.eval_samples)]
    y = _eval_labels(ds, cfg.eval_samples, rng)

    def metric(samples):
        from .metrics import sliced_w2
        return sliced_w2(samples, ref, seed=cfg.eval_seed)

    grid = [0.05, 0.1, 0.15] + [round(t, 2) for t in np.arange(0.2, 1.55, 0.1)]
    seed = args.seed if args.seed is not None else cfg.eval_seed
    sched, table = search_timesteps(student, metric, args.steps, grid,
                                    cfg.eval_samples, y, cfg.eval_cfg_scale,
                                    eval_seed=seed)
    runio.write_csv(os.path.join(args.out, "search_table.csv"),
                    ["step_index", "candidate_t", "metric"], table)
    with open(os.path.join(args.out, "schedule.json"), "w") as fh:
        json.dump({"steps": args.steps, "times": list(sched.times)}, fh, indent=2)
    print(f"searched {args.steps}-step schedule: {[round(t, 4) for t in sched.times]}")
    return 0


def cmd_eval(cfg, args):
    student, _, _ = _adapter_from_ckpt(args.ckpt)
    ds = runio.build_dataset(cfg)
    seed = args.seed if args.seed is not None else cfg.eval_seed
    rng = np.random.default_rng(seed)
    y = _eval_labels(ds, cfg.eval_samples, rng)
    sched = default_schedule(args.steps, student.sigma_d)
    pts = multistep_sample(student, sched, cfg.eval_samples, y, cfg.eval_cfg_scale, rng)
    ref = ds.points[rng.integers(0, len(ds), cfg.eval_samples)]
    report = evaluate(pts, ref, seed=seed)
    path = os.path.join(args.out, f"eval_{args.steps}step.json")
    with open(path, "w") as fh:
        json.dump(report.__dict__, fh, indent=2, sort_keys=True)
    print(f"sliced_w2={report.sliced_w2:.4f} mmd_rbf={report.mmd_rbf:.5f} -> {path}")
    return 0


def cmd_plot(cfg, args):
    ds = runio.build_dataset(cfg)
    dump_csv(ds, os.path.join(args.out, "dataset.csv"))
    runio.scatter_svg(os.path.join(args.out, "dataset.svg"), ds.points, ds.labels,
                      title=f"{ds.name} (n={len(ds)})")
    print(f"plotted {ds.name} to {args.out}")
    return 0


COMMANDS = {"pretrain": cmd_pretrain, "distill": cmd_distill, "sample": cmd_sample,
            "search-steps": cmd_search_steps, "eval": cmd_eval, "plot": cmd_plot}


def _parser():
    p = argparse.ArgumentParser(prog="tfdl")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True)
        sp.add_argument("--out", default=None)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--steps", type=int, choices=(1, 2, 4), default=2)
        sp.add_argument("--ckpt", default=None)
    return p


def cli(argv):
    """Run one subcommand; returns the process exit code."""
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else 2
    try:
        cfg = _load_config(args.config)
    except (OSError, ValueError, TypeError, KeyError) as exc:
        print(f"error: cannot read config {args.config}: {exc}", file=sys.stderr)
        return 3
    args.out = args.out or cfg.out_dir
    os.makedirs(args.out, exist_ok=True)
    if args.command in ("distill", "sample", "search-steps", "eval") and not args.ckpt:
        print("error: this subcommand requires --ckpt", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](cfg, args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
