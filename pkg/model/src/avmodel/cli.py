"""Command line front end: train a model, export probability files."""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from .avpm import read_avpm, read_fov_png
from .errors import AvmodelError
from .net import VesselNet
from .train import (
    TrainSpec,
    export_probabilities,
    load_model,
    load_pair,
    parse_train_config,
    save_model,
    train,
)


def _cmd_train(args) -> int:
    if len(args.channels) != len(args.truth):
        raise AvmodelError(
            f"{len(args.channels)} channel stacks but {len(args.truth)} label images"
        )
    spec = parse_train_config(args.config) if args.config else TrainSpec()
    pairs = [load_pair(c, t) for c, t in zip(args.channels, args.truth)]
    model = VesselNet()
    history = train(model, pairs, spec, max_steps=args.steps, loss_target=args.loss_target)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_model(model, out / "model.pt")
    with open(out / "loss.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["step", "loss"])
        writer.writerows((i, f"{v:.6f}") for i, v in enumerate(history))
    print(f"{out / 'model.pt'} after {len(history)} steps, final loss {history[-1]:.4f}")
    return 0


def _cmd_export(args) -> int:
    model = load_model(args.model) if args.model else VesselNet()
    image = read_avpm(args.channels)
    fov = read_fov_png(args.fov) if args.fov else None
    export_probabilities(model, image, args.out, fov)
    print(args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="avmodel", description="Vessel classifier training and export")
    sub = parser.add_subparsers(dest="command", required=True)

    tr = sub.add_parser("train", help="fit the classifier on channel stacks with label images")
    tr.add_argument("--channels", nargs="+", required=True, help="six-channel AVPM stacks")
    tr.add_argument("--truth", nargs="+", required=True, help="label PNGs, one per stack")
    tr.add_argument("--out-dir", required=True)
    tr.add_argument("--config", default=None)
    tr.add_argument("--steps", type=int, default=None, help="cap on optimizer steps")
    tr.add_argument("--loss-target", type=float, default=None, help="stop once loss falls below")
    tr.set_defaults(func=_cmd_train)

    ex = sub.add_parser("export", help="write per-pixel probabilities as an AVPM triplet")
    ex.add_argument("--channels", required=True)
    ex.add_argument("--model", default=None, help="checkpoint; untrained weights when omitted")
    ex.add_argument("--fov", default=None)
    ex.add_argument("--out", required=True)
    ex.set_defaults(func=_cmd_export)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except AvmodelError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
