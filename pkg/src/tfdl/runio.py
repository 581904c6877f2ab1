"""Run configuration, checkpoint format, CSV writers, and SVG scatter plots.

Checkpoints are a single JSON header line (schema version, segment names and
shapes, time-embedding scale, QK-norm flag, plus rebuild metadata) followed by
the raw little-endian float64 parameter values in segment order.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .distill import DistillConfig
from .net import VelocityNet
from .schedule import TimestepDistribution
from .teacher import TeacherConfig

CKPT_SCHEMA = 1

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f")


def max_threads():
    """Parallelism cap from the TFDL_THREADS environment variable (>=1)."""
    try:
        return max(1, int(os.environ.get("TFDL_THREADS", "1")))
    except ValueError:
        return 1


# -- run configuration -------------------------------------------------------

@dataclass
class DatasetSpec:
    name: str = "gauss-mix"
    n: int = 20000
    seed: int = 0
    components: int = 3
    comp_std: float = 0.3
    radius: float = 2.0


@dataclass
class NetSpec:
    width: int = 128
    depth: int = 4
    n_freq: int = 64
    attention: bool = True
    qk_norm: bool = True
    c_noise_scale: float = 1.0


@dataclass
class RunConfig:
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    net: NetSpec = field(default_factory=NetSpec)
    teacher: TeacherConfig = field(default_factory=TeacherConfig)
    distill: DistillConfig = field(default_factory=DistillConfig)
    teacher_seed: int = 1
    distill_seed: int = 2
    eval_seed: int = 3
    eval_cfg_scale: float = 4.5
    eval_samples: int = 4096
    out_dir: str = "runs/default"

    def to_json(self):
        d = asdict(self)
        d["teacher"].pop("weighting", None)  # callables stay code-side
        return json.dumps(d, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        d["dataset"] = DatasetSpec(**d.get("dataset", {}))
        d["net"] = NetSpec(**d.get("net", {}))
        d["teacher"] = TeacherConfig(**d.get("teacher", {}))
        dd = d.get("distill", {})
        for key in ("gen_tdist", "disc_tdist"):
            if key in dd and isinstance(dd[key], dict):
                dd[key] = TimestepDistribution(**dd[key])
        if "cfg_scales" in dd:
            dd["cfg_scales"] = tuple(dd["cfg_scales"])
        d["distill"] = DistillConfig(**dd)
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})


def build_net(cfg, n_classes, seed=0):
    ns = cfg.net
    return VelocityNet(n_classes, width=ns.width, depth=ns.depth,
                       n_freq=ns.n_freq, attention=ns.attention,
                       qk_norm=ns.qk_norm, c_noise_scale=ns.c_noise_scale,
                       seed=seed)


def build_dataset(cfg):
    from .toydata import generate
    ds = cfg.dataset
    return generate(ds.name, ds.n, ds.seed, components=ds.components,
                    comp_std=ds.comp_std, radius=ds.radius)


# -- checkpoints -------------------------------------------------------------

def save_params(path, params, meta=None, c_noise_scale=None, qk_norm=None):
    """Write the checkpoint header line and the float64 segment bytes."""
    header = {"schema": CKPT_SCHEMA,
              "segments": list(params.names),
              "shapes": {n: list(params.shapes[n]) for n in params.names},
              "c_noise_scale": c_noise_scale,
              "qk_norm": qk_norm,
              "meta": meta or {}}
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(params.flat.astype("<f8").tobytes())


def load_checkpoint(path):
    """Return (header dict, flat float64 values)."""
    if not os.path.exists(path):
        raise FileNotFoundError(f"checkpoint not found: {path}")
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode())
        flat = np.frombuffer(fh.read(), dtype="<f8").astype(np.float64)
    return header, flat


def save_net(path, net, extra_meta=None):
    meta = net.meta()
    meta.update(extra_meta or {})
    save_params(path, net.params, meta=meta,
                c_noise_scale=net.c_noise_scale, qk_norm=net.qk_norm)


def load_net(path):
    """Rebuild a VelocityNet (and its sidecar metadata) from a checkpoint."""
    header, flat = load_checkpoint(path)
    net = VelocityNet.from_meta(header["meta"])
    if flat.size != net.params.size:
        raise ValueError(f"checkpoint size mismatch for {path}")
    net.params.flat[:] = flat
    return net, header["meta"]


# -- CSV / SVG artifacts -----------------------------------------------------

def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, quoting=csv.QUOTE_MINIMAL)
        w.writerow(header)
        w.writerows(rows)


def write_samples_csv(path, points, labels=None):
    labels = np.zeros(len(points), dtype=int) if labels is None else labels
    write_csv(path, ["x", "y", "label"],
              [[repr(float(p[0])), repr(float(p[1])), int(l)]
               for p, l in zip(points, labels)])


def scatter_svg(path, points, labels=None, title=""):
    """Self-contained 600x600 scatter with per-class colors and autoscaling."""
    pts = np.asarray(points, dtype=np.float64)
    labels = np.zeros(len(pts), dtype=int) if labels is None else np.asarray(labels)
    lo = pts.min(axis=0) if len(pts) else np.zeros(2)
    hi = pts.max(axis=0) if len(pts) else np.ones(2)
    span = np.maximum(hi - lo, 1e-9)
    margin = 0.05 * span
    lo, span = lo - margin, span + 2 * margin

    def sx(v):
        return 600.0 * (v - lo[0]) / span[0]

    def sy(v):
        return 600.0 * (1.0 - (v - lo[1]) / span[1])

    parts = ['<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 600 600">',
             '<rect width="600" height="600" fill="white"/>']
    if title:
        parts.append(f'<text x="10" y="20" font-size="14">{title}</text>')
    for p, lab in zip(pts, labels):
        c = PALETTE[int(lab) % len(PALETTE)]
        parts.append(f'<circle cx="{sx(p[0]):.2f}" cy="{sy(p[1]):.2f}" r="2" '
                     f'fill="{c}" fill-opacity="0.6"/>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))
