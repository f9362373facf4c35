"""Command-line surface.

Subcommands: ``gradcheck``, ``synth``, ``train``, ``eval``, ``encode``,
``loss``. Exit codes: 0 success, 1 check or assertion failure, 2 usage or
config error. All numeric output is printed with six decimal places so logs
can be diffed.
"""

from __future__ import annotations

import argparse
import ctypes
import sys
from pathlib import Path

import numpy as np


def _tune_allocator() -> None:
    # Large conv workspaces churn through mmap otherwise; keeping them on the
    # heap lets glibc hand back warm pages.
    try:
        libc = ctypes.CDLL("libc.so.6")
        libc.mallopt(-3, 1 << 30)  # M_MMAP_THRESHOLD
        libc.mallopt(-1, 1 << 30)  # M_TRIM_THRESHOLD
    except OSError:
        pass


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def cmd_gradcheck(args) -> int:
    from .checksuite import SCOPE_TOLERANCES, run_scope

    tol = SCOPE_TOLERANCES[args.scope]
    reports = run_scope(args.scope, n_seeds=args.seeds)
    failed = False
    for rep in reports:
        print(rep.describe(tol if rep.name != "ecr_loss" else 1e-8))
        failed = failed or not rep.ok(tol if rep.name != "ecr_loss" else 1e-8)
    return 1 if failed else 0


def cmd_synth(args) -> int:
    from .data import SyntheticSpec, ManifestEntry, synth_generate, write_image, write_manifest

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    spec = SyntheticSpec(resolution=args.resolution, a_min=args.age_min,
                         a_max=args.age_max, noise_sigma=args.noise,
                         seed=args.seed, counts=(args.count, 0, 0),
                         attr_correlation=args.correlation)
    entries = []
    for i in range(args.count):
        sample = synth_generate(spec, i)
        name = f"img_{i:05d}.im1"
        write_image(out / name, sample.image)
        entries.append(ManifestEntry(path=name, age=sample.age,
                                     gender=sample.gender, ethnicity=sample.ethnicity))
    write_manifest(out / "manifest.csv", entries)
    print(f"wrote {len(entries)} images and manifest.csv to {out}")
    return 0


def cmd_train(args) -> int:
    from .config import ConfigError, load_run_config
    from .trainer import TrainingDiverged, train
    import dataclasses

    try:
        cfg = load_run_config(args.config)
        if args.seed is not None:
            cfg = dataclasses.replace(cfg, seed=args.seed)
        if args.preset is not None:
            cfg = dataclasses.replace(cfg, preset=args.preset)
        if args.loss is not None:
            from .ranking import LossKind
            cfg = dataclasses.replace(cfg, loss_kind=LossKind(args.loss))
        if args.no_attribute_guidance:
            cfg = dataclasses.replace(cfg, attribute_guidance=False)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        result = train(cfg, out_dir=args.out)
    except TrainingDiverged as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return 1
    print(f"best val MAE {_fmt(result.best_val_mae)} at epoch {result.best_epoch}")
    if result.checkpoint_path:
        print(f"checkpoint: {result.checkpoint_path}")
        print(f"metrics:    {Path(args.out) / 'metrics.jsonl'}")
    return 0


def cmd_eval(args) -> int:
    from .trainer import (TrainConfig, build_model, evaluate_model,
                          load_checkpoint, load_dataset)
    import dataclasses

    try:
        state, meta = load_checkpoint(args.checkpoint)
        cfg = TrainConfig.from_dict(meta["config"])
        if args.manifest is not None:
            cfg = dataclasses.replace(cfg, manifest=args.manifest, synthetic=None)
        model = build_model(cfg)
        model.load_state(state)
        data = load_dataset(cfg)
        report = evaluate_model(model, data.split(args.split), cfg)
    except (ValueError, FileNotFoundError) as exc:
        print(f"eval error: {exc}", file=sys.stderr)
        return 2
    print(f"split {args.split}: n={report.count} MAE {_fmt(report.mae)} "
          f"(recorded best val MAE {_fmt(meta['best_val_mae'])}, epoch {meta['epoch']})")
    for g, gm in sorted(report.group_mae.items()):
        print(f"  age group {g}: MAE {_fmt(gm)}")
    for name, acc in (("gender", report.gender_acc), ("age group", report.agegroup_acc),
                      ("ethnicity", report.ethnicity_acc)):
        if acc is not None:
            print(f"  {name} accuracy {_fmt(acc)}")
    return 0


def cmd_encode(args) -> int:
    from .ranking import encode_ranking_label, make_interval_points

    try:
        points = make_interval_points(args.a_min, args.a_max)
        label = encode_ranking_label(args.age, points)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print("y =", "[" + ",".join(str(int(v)) for v in label.y) + "]")
    print("b =", "[" + ",".join(_fmt(v) for v in points.b) + "]")
    return 0


def cmd_loss(args) -> int:
    from .tensor import Tensor, backward
    from .ranking import ecr_loss, encode_ages, make_interval_points

    try:
        points = make_interval_points(args.age_min, args.age_max)
        y = encode_ages([args.age], points)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    h = Tensor(np.array([args.h]), requires_grad=True)
    loss = ecr_loss(h, y, points)
    backward(loss)
    print(f"loss   = {_fmt(float(loss.data))}")
    print(f"dL/dh  = {_fmt(float(h.grad[0]))}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="agenet",
                                description="age estimation micro-framework")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gradcheck", help="finite-difference gradient suites")
    g.add_argument("scope", choices=["ops", "block", "full"])
    g.add_argument("--seeds", type=int, default=100, help="seeds per op (ops scope)")
    g.set_defaults(fn=cmd_gradcheck)

    s = sub.add_parser("synth", help="generate a synthetic dataset + manifest")
    s.add_argument("--out", required=True)
    s.add_argument("--count", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--resolution", type=int, default=64)
    s.add_argument("--age-min", type=int, default=20)
    s.add_argument("--age-max", type=int, default=59)
    s.add_argument("--noise", type=float, default=0.02)
    s.add_argument("--correlation", type=float, default=0.0)
    s.set_defaults(fn=cmd_synth)

    t = sub.add_parser("train", help="train per a run-config file")
    t.add_argument("--config", required=True)
    t.add_argument("--seed", type=int, default=None)
    t.add_argument("--preset", choices=["paper", "desk"], default=None)
    t.add_argument("--loss", choices=["ecr", "l1", "ce"], default=None)
    t.add_argument("--no-attribute-guidance", action="store_true")
    t.add_argument("--out", default="runs/latest")
    t.set_defaults(fn=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint on a split")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--manifest", default=None,
                   help="override the dataset recorded in the checkpoint")
    e.add_argument("--split", choices=["train", "val", "test"], default="test")
    e.set_defaults(fn=cmd_eval)

    n = sub.add_parser("encode", help="print the ranking label and thresholds")
    n.add_argument("age", type=int)
    n.add_argument("a_min", type=int)
    n.add_argument("a_max", type=int)
    n.set_defaults(fn=cmd_encode)

    l = sub.add_parser("loss", help="print the ranking loss value and gradient")
    l.add_argument("--h", type=float, required=True)
    l.add_argument("--age", type=int, required=True)
    l.add_argument("--age-min", type=int, required=True)
    l.add_argument("--age-max", type=int, required=True)
    l.set_defaults(fn=cmd_loss)
    return p


def main(argv=None) -> int:
    _tune_allocator()
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
