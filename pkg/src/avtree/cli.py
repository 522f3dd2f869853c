"""Command line front end.

One subcommand per stage plus `run` for the whole pipeline; stages
communicate through files only, so any prefix of the pipeline can be
replayed or swapped out.
"""

from __future__ import annotations

import argparse
import json
import sys
from multiprocessing import Pool
from pathlib import Path

from .avr import OpticDiscSpec
from .errors import AvtreeError
from .phantom import PhantomSpec, make_bundle, save_bundle
from .pipeline import (
    PipelineConfig,
    avr_csv,
    classify_stage,
    metrics_csv,
    parse_config,
    roc_csv,
    run_pipeline,
)
from .preprocess import assemble_six_channel
from .raster import (
    ProbabilityTriplet,
    argmax_labels,
    read_avpm,
    read_fov_png,
    read_label_png,
    read_rgb_png,
    write_avpm,
    write_label_png,
)


def _load_config(args) -> PipelineConfig:
    config = parse_config(args.config) if getattr(args, "config", None) else PipelineConfig()
    overrides = {}
    if getattr(args, "iterations", None) is not None:
        overrides["iterations"] = args.iterations
    if getattr(args, "centerline_only", False):
        overrides["centerline_only"] = True
    if overrides:
        config = PipelineConfig(
            graph=config.graph,
            norm=config.norm,
            knudtson=config.knudtson,
            iterations=overrides.get("iterations", config.iterations),
            centerline_only=overrides.get("centerline_only", config.centerline_only),
        )
    return config


def _read_probs(path) -> ProbabilityTriplet:
    return ProbabilityTriplet.from_raster(read_avpm(path))


def _require(path, what: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise AvtreeError(f"{what} not found: {p}")
    return p


def _one_run(task) -> str:
    probs_path, fov_path, truth_path, od_path, out_dir, config = task
    probs = _read_probs(_require(probs_path, "probability file"))
    fov = read_fov_png(_require(fov_path, "FOV mask"))
    probs.check_simplex(fov)
    truth = read_label_png(_require(truth_path, "truth labels")) if truth_path else None
    od = OpticDiscSpec.from_json(_require(od_path, "optic disc spec")) if od_path else None
    result = run_pipeline(probs, fov, config, truth=truth, od=od)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_label_png(result.labels_post, out / "labels_lsp.png")
    write_label_png(result.labels_pre, out / "labels_argmax.png")
    name = str(probs_path)
    if truth is not None:
        (out / "metrics.csv").write_text(metrics_csv(name, result.metrics, result.strata))
        if result.roc is not None:
            (out / "roc.csv").write_text(roc_csv(result.roc))
    if od is not None:
        (out / "avr.csv").write_text(avr_csv(name, result.avr))
    trace = [
        {
            "iteration": st.iteration,
            "s_init": st.s_init.tolist(),
            "s_up": st.s_up.tolist(),
            "s_fin": st.s_fin.tolist(),
        }
        for st in result.trace
    ]
    (out / "trace.json").write_text(json.dumps(trace))
    return str(out)


def _cmd_run(args) -> int:
    config = _load_config(args)
    n = len(args.probs)
    if len(args.fov) != n:
        raise AvtreeError("--fov needs one value per --probs value")
    truths = args.truth or [None] * n
    ods = args.od or [None] * n
    if len(truths) != n or len(ods) != n:
        raise AvtreeError("--truth/--od need one value per --probs value when given")
    out_root = Path(args.out_dir)
    if n == 1:
        dirs = [out_root]
    else:
        dirs = [out_root / f"{i:03d}_{Path(p).parent.name or 'image'}" for i, p in enumerate(args.probs)]
    tasks = [
        (args.probs[i], args.fov[i], truths[i], ods[i], dirs[i], config) for i in range(n)
    ]
    if args.jobs > 1 and n > 1:
        with Pool(args.jobs) as pool:
            for done in pool.imap(_one_run, tasks):
                print(done)
    else:
        for t in tasks:
            print(_one_run(t))
    return 0


def _cmd_preprocess(args) -> int:
    image = read_rgb_png(_require(args.image, "image"))
    fov = read_fov_png(_require(args.fov, "FOV mask"))
    config = _load_config(args)
    six = assemble_six_channel(image, config.norm, fov)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_avpm(six, out / "six_channel.avpm")
    print(out / "six_channel.avpm")
    return 0


def _cmd_label(args) -> int:
    probs = _read_probs(_require(args.probs, "probability file"))
    fov = read_fov_png(_require(args.fov, "FOV mask"))
    probs.check_simplex(fov)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_label_png(argmax_labels(probs, fov), out / "labels_argmax.png")
    print(out / "labels_argmax.png")
    return 0


def _cmd_lsp(args) -> int:
    probs = _read_probs(_require(args.probs, "probability file"))
    fov = read_fov_png(_require(args.fov, "FOV mask"))
    probs.check_simplex(fov)
    config = _load_config(args)
    labels_pre, labels_post, _, s_init, s_fin, _, trace = classify_stage(probs, fov, config)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_label_png(labels_post, out / "labels_lsp.png")
    write_label_png(labels_pre, out / "labels_argmax.png")
    dump = [
        {
            "iteration": st.iteration,
            "s_init": st.s_init.tolist(),
            "s_up": st.s_up.tolist(),
            "s_fin": st.s_fin.tolist(),
        }
        for st in trace
    ]
    (out / "trace.json").write_text(json.dumps(dump))
    print(out / "labels_lsp.png")
    return 0


def _cmd_eval(args) -> int:
    from .pipeline import evaluate_stage

    pred = read_label_png(_require(args.pred, "predicted labels"))
    truth = read_label_png(_require(args.truth, "truth labels"))
    fov = read_fov_png(_require(args.fov, "FOV mask"))
    probs = _read_probs(_require(args.probs, "probability file")) if args.probs else None
    metrics, strata, roc = evaluate_stage(pred, pred, truth, fov, probs, args.centerline_only)
    # pre == post here: the subcommand evaluates one finished labeling
    metrics = {k: v for k, v in metrics.items() if k != "accuracy_pre"}
    metrics["accuracy"] = metrics.pop("accuracy_post")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.csv").write_text(metrics_csv(str(args.pred), metrics, strata))
    if roc is not None:
        (out / "roc.csv").write_text(roc_csv(roc))
    print(out / "metrics.csv")
    return 0


def _cmd_avr(args) -> int:
    from .avr import KnudtsonConstants
    from .pipeline import avr_stage
    from .skeleton import extract_branches, zhang_suen_thin
    import numpy as np

    pred = read_label_png(_require(args.pred, "predicted labels"))
    _ = read_fov_png(_require(args.fov, "FOV mask"))
    od = OpticDiscSpec.from_json(_require(args.od, "optic disc spec"))
    config = _load_config(args)
    vessel = pred.vessel_mask()
    branches = extract_branches(zhang_suen_thin(vessel))
    from .raster import ARTERY, VEIN

    branch_labels = np.zeros(len(branches), dtype=np.uint8)
    for b in branches:
        codes = pred.codes[b.pixels[:, 1], b.pixels[:, 0]]
        n_a = int((codes == ARTERY).sum())
        n_v = int((codes == VEIN).sum())
        branch_labels[b.id] = ARTERY if n_a >= n_v else VEIN
    avr, _ = avr_stage(pred, branches, branch_labels, od, config.knudtson)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "avr.csv").write_text(avr_csv(str(args.pred), avr))
    print(out / "avr.csv")
    return 0


def _cmd_phantom(args) -> int:
    spec = PhantomSpec(
        seed=args.seed,
        depth=args.depth,
        image_size=args.size,
        flip_fraction=args.flip,
        noise_sigma=args.noise,
        score_margin=args.margin,
        allow_crossings=args.crossings,
    )
    bundle = make_bundle(spec)
    save_bundle(bundle, args.out_dir)
    print(args.out_dir)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="avtree", description="Artery/vein labeling pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="full pipeline: probabilities to labels and reports")
    run.add_argument("--probs", nargs="+", required=True)
    run.add_argument("--fov", nargs="+", required=True)
    run.add_argument("--image", nargs="+", default=None, help="source photographs (recorded, not required)")
    run.add_argument("--truth", nargs="+", default=None)
    run.add_argument("--od", nargs="+", default=None)
    run.add_argument("--out-dir", required=True)
    run.add_argument("--config", default=None)
    run.add_argument("--iterations", type=int, default=None)
    run.add_argument("--centerline-only", action="store_true")
    run.add_argument("--jobs", type=int, default=1)
    run.set_defaults(fn=_cmd_run)

    pre = sub.add_parser("preprocess", help="six-channel illumination-normalized stack")
    pre.add_argument("--image", required=True)
    pre.add_argument("--fov", required=True)
    pre.add_argument("--out-dir", required=True)
    pre.add_argument("--config", default=None)
    pre.set_defaults(fn=_cmd_preprocess)

    lab = sub.add_parser("label", help="argmax class labels from probabilities")
    lab.add_argument("--probs", required=True)
    lab.add_argument("--fov", required=True)
    lab.add_argument("--out-dir", required=True)
    lab.set_defaults(fn=_cmd_label)

    lsp = sub.add_parser("lsp", help="score propagation relabeling")
    lsp.add_argument("--probs", required=True)
    lsp.add_argument("--fov", required=True)
    lsp.add_argument("--out-dir", required=True)
    lsp.add_argument("--config", default=None)
    lsp.add_argument("--iterations", type=int, default=None)
    lsp.set_defaults(fn=_cmd_lsp)

    ev = sub.add_parser("eval", help="accuracy / A-V rates / AUC against truth labels")
    ev.add_argument("--pred", required=True)
    ev.add_argument("--truth", required=True)
    ev.add_argument("--fov", required=True)
    ev.add_argument("--probs", default=None, help="enables the vessel ROC/AUC")
    ev.add_argument("--centerline-only", action="store_true")
    ev.add_argument("--out-dir", required=True)
    ev.set_defaults(fn=_cmd_eval)

    av = sub.add_parser("avr", help="arterio-venous ratio report")
    av.add_argument("--pred", required=True)
    av.add_argument("--fov", required=True)
    av.add_argument("--od", required=True)
    av.add_argument("--out-dir", required=True)
    av.add_argument("--config", default=None)
    av.set_defaults(fn=_cmd_avr)

    ph = sub.add_parser("phantom", help="write a synthetic ground-truth bundle")
    ph.add_argument("--seed", type=int, default=0)
    ph.add_argument("--depth", type=int, default=3)
    ph.add_argument("--size", type=int, default=600)
    ph.add_argument("--flip", type=float, default=0.0)
    ph.add_argument("--noise", type=float, default=0.0)
    ph.add_argument("--margin", type=float, default=0.3)
    ph.add_argument("--crossings", action="store_true")
    ph.add_argument("--out-dir", required=True)
    ph.set_defaults(fn=_cmd_phantom)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except AvtreeError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
