"""End-to-end orchestration: probabilities in, final labeling and reports out.

Each stage is a plain function over the core types so the CLI subcommands
and run_pipeline share one code path; stage failures are wrapped with the
stage name.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .avr import (
    KnudtsonConstants,
    OpticDiscSpec,
    VesselSegmentMeasure,
    annulus_select,
    diameter_map,
    global_avr,
    knudtson_equivalent,
    local_avr,
    measure_segments,
    spread_diameters,
)
from .errors import (
    ConfigError,
    DegenerateClass,
    MissingClass,
    MissingClassInAnnulus,
    StageError,
)
from .graph import GraphParams, ScoredBranch, branch_score, likelihood_map
from .metrics import (
    RocCurve,
    StratumMetrics,
    av_sensitivity_specificity,
    roc_auc,
    stratify_by_diameter,
    three_class_accuracy,
    vessel_probability,
)
from .preprocess import NormalizationParams
from .propagation import PropagationState, assign_vessel_pixels, propagate, relabel
from .raster import ARTERY, VEIN, FovMask, LabelMap, ProbabilityTriplet, argmax_labels
from .skeleton import Branch, extract_branches, zhang_suen_thin


@dataclass(frozen=True)
class PipelineConfig:
    graph: GraphParams = field(default_factory=GraphParams)
    norm: NormalizationParams = field(default_factory=NormalizationParams)
    knudtson: KnudtsonConstants = field(default_factory=KnudtsonConstants)
    iterations: int = 2
    centerline_only: bool = False

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")


_FLOAT_KEYS = {
    "sigma_pos": ("graph", "sigma_pos"),
    "sigma_lab": ("graph", "sigma_lab"),
    "lambda_angle": ("graph", "lambda_angle"),
    "sigma_prop": ("graph", "sigma_prop"),
    "max_link_distance": ("graph", "max_link_distance"),
    "sigma0": ("norm", "sigma0"),
    "kernel_fraction": ("norm", "kernel_fraction"),
    "epsilon": ("norm", "epsilon"),
    "c_artery": ("knudtson", "c_artery"),
    "c_vein": ("knudtson", "c_vein"),
}


def parse_config(path) -> PipelineConfig:
    """Flat `key = value` file; # starts a comment; unknown keys are errors."""
    values: dict[str, str] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value, got {raw!r}")
        key, _, val = line.partition("=")
        values[key.strip()] = val.strip()
    return config_from_values(values, where=str(path))


def config_from_values(values: dict[str, str], where: str = "config") -> PipelineConfig:
    group_kwargs: dict[str, dict[str, float]] = {"graph": {}, "norm": {}, "knudtson": {}}
    iterations = 2
    centerline_only = False
    for key, val in values.items():
        if key in _FLOAT_KEYS:
            group, name = _FLOAT_KEYS[key]
            try:
                group_kwargs[group][name] = float(val)
            except ValueError as e:
                raise ConfigError(f"{where}: {key} needs a number, got {val!r}") from e
        elif key == "iterations":
            try:
                iterations = int(val)
            except ValueError as e:
                raise ConfigError(f"{where}: iterations needs an integer, got {val!r}") from e
        elif key == "centerline_only":
            low = val.lower()
            if low not in ("true", "false", "1", "0"):
                raise ConfigError(f"{where}: centerline_only needs true/false, got {val!r}")
            centerline_only = low in ("true", "1")
        else:
            raise ConfigError(f"{where}: unknown key {key!r}")
    try:
        return PipelineConfig(
            graph=GraphParams(**group_kwargs["graph"]),
            norm=NormalizationParams(**group_kwargs["norm"]),
            knudtson=KnudtsonConstants(**group_kwargs["knudtson"]),
            iterations=iterations,
            centerline_only=centerline_only,
        )
    except ValueError as e:
        raise ConfigError(f"{where}: {e}") from e


@dataclass
class PipelineResult:
    labels_pre: LabelMap
    labels_post: LabelMap
    branches: list[Branch]
    branch_labels: np.ndarray  # per-branch ARTERY/VEIN from final scores
    s_init: np.ndarray
    s_fin: np.ndarray
    trace: list[PropagationState]
    metrics: dict[str, float]
    strata: list[StratumMetrics]
    roc: RocCurve | None
    avr: dict[str, float]
    measures: list[VesselSegmentMeasure]


def _stage(name: str):
    def wrap(fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except Exception as e:
            raise StageError(name, e) from e

    return wrap


def classify_stage(probs: ProbabilityTriplet, fov: FovMask, config: PipelineConfig):
    """Argmax labels, skeleton branches, and propagated scores."""
    labels_pre = _stage("argmax")(argmax_labels, probs, fov)
    vessel = labels_pre.vessel_mask()
    skel = _stage("skeletonize")(zhang_suen_thin, vessel)
    branches = _stage("branches")(extract_branches, skel)
    if not branches:
        n0 = np.zeros(0)
        return labels_pre, labels_pre, [], n0, n0, n0.astype(np.uint8), []
    s_map = likelihood_map(probs)
    scored = [ScoredBranch(b, branch_score(b, s_map)) for b in branches]
    s_init = np.array([sb.score for sb in scored])
    s_fin, trace = _stage("propagate")(propagate, scored, config.graph, config.iterations)
    assignment = _stage("assign")(assign_vessel_pixels, vessel, branches)
    labels_post = _stage("relabel")(relabel, labels_pre, branches, s_fin, assignment)
    branch_labels = np.where(s_fin > 0.0, ARTERY, VEIN).astype(np.uint8)
    return labels_pre, labels_post, branches, s_init, s_fin, branch_labels, trace


def evaluate_stage(
    pred_pre: LabelMap,
    pred_post: LabelMap,
    truth: LabelMap,
    fov: FovMask,
    probs: ProbabilityTriplet | None,
    centerline_only: bool,
) -> tuple[dict[str, float], list[StratumMetrics], RocCurve | None]:
    metrics: dict[str, float] = {}
    metrics["accuracy_pre"] = three_class_accuracy(pred_pre, truth, fov)
    metrics["accuracy_post"] = three_class_accuracy(pred_post, truth, fov)
    try:
        sens, spec = av_sensitivity_specificity(pred_post, truth, fov, centerline_only)
        metrics["av_sensitivity"] = sens
        metrics["av_specificity"] = spec
    except DegenerateClass:
        metrics["av_sensitivity"] = float("nan")
        metrics["av_specificity"] = float("nan")
    roc = None
    if probs is not None:
        try:
            curve, auc = roc_auc(vessel_probability(probs), truth.vessel_mask(), fov)
            metrics["auc_vessel"] = auc
            roc = curve
        except DegenerateClass:
            metrics["auc_vessel"] = float("nan")
    truth_vessel = truth.vessel_mask()
    truth_skel = zhang_suen_thin(truth_vessel)
    diam = spread_diameters(truth_vessel, truth_skel, diameter_map(truth_vessel, truth_skel))
    strata = stratify_by_diameter(diam, pred_post, truth, fov)
    return metrics, strata, roc


def avr_stage(
    labels_post: LabelMap,
    branches: list[Branch],
    branch_labels: np.ndarray,
    od: OpticDiscSpec,
    k: KnudtsonConstants,
) -> tuple[dict[str, float], list[VesselSegmentMeasure]]:
    vessel = labels_post.vessel_mask()
    skel = zhang_suen_thin(vessel)
    diam = diameter_map(vessel, skel)
    measures = measure_segments(branches, branch_labels, diam)
    out: dict[str, float] = {}
    arteries, veins = annulus_select(
        measure_segments(branches, branch_labels, diam, od), od
    )
    out["n_arteries"] = float(len(arteries))
    out["n_veins"] = float(len(veins))
    try:
        out["local_avr"] = local_avr(arteries, veins, k)
        out["crae"] = knudtson_equivalent([m.mean_diameter for m in arteries], k.c_artery)
        out["crve"] = knudtson_equivalent([m.mean_diameter for m in veins], k.c_vein)
    except MissingClassInAnnulus:
        out["local_avr"] = float("nan")
        out["crae"] = float("nan")
        out["crve"] = float("nan")
    try:
        out["global_avr"] = global_avr(measures)
    except MissingClass:
        out["global_avr"] = float("nan")
    for label, name in ((ARTERY, "mean_artery_diameter"), (VEIN, "mean_vein_diameter")):
        ws = [(m.mean_diameter, m.n_pixels) for m in measures if m.label == label]
        total = sum(n for _, n in ws)
        out[name] = sum(d * n for d, n in ws) / total if total else float("nan")
    return out, measures


def run_pipeline(
    probs: ProbabilityTriplet,
    fov: FovMask,
    config: PipelineConfig,
    truth: LabelMap | None = None,
    od: OpticDiscSpec | None = None,
) -> PipelineResult:
    labels_pre, labels_post, branches, s_init, s_fin, branch_labels, trace = classify_stage(
        probs, fov, config
    )
    metrics: dict[str, float] = {}
    strata: list[StratumMetrics] = []
    roc = None
    if truth is not None:
        metrics, strata, roc = _stage("evaluate")(
            evaluate_stage, labels_pre, labels_post, truth, fov, probs, config.centerline_only
        )
    avr: dict[str, float] = {}
    measures: list[VesselSegmentMeasure] = []
    if od is not None and branches:
        avr, measures = _stage("avr")(
            avr_stage, labels_post, branches, branch_labels, od, config.knudtson
        )
    return PipelineResult(
        labels_pre=labels_pre,
        labels_post=labels_post,
        branches=branches,
        branch_labels=branch_labels,
        s_init=s_init,
        s_fin=s_fin,
        trace=trace,
        metrics=metrics,
        strata=strata,
        roc=roc,
        avr=avr,
        measures=measures,
    )


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def metrics_csv(image: str, metrics: dict[str, float], strata: list[StratumMetrics]) -> str:
    """One row per (image, stratum, metric); global metrics use stratum 'all'."""
    lines = ["image,stratum,metric,value"]
    for key in sorted(metrics):
        lines.append(f"{image},all,{key},{_fmt(metrics[key])}")
    for s in strata:
        hi = "inf" if not np.isfinite(s.hi) else _fmt(s.hi)
        name = f"d{_fmt(s.lo)}to{hi}"
        lines.append(f"{image},{name},n_pixels,{s.n_pixels}")
        lines.append(f"{image},{name},fraction,{_fmt(s.fraction)}")
        lines.append(f"{image},{name},sensitivity,{_fmt(s.sensitivity)}")
        lines.append(f"{image},{name},specificity,{_fmt(s.specificity)}")
        lines.append(f"{image},{name},accuracy,{_fmt(s.accuracy)}")
    return "\n".join(lines) + "\n"


def avr_csv(image: str, avr: dict[str, float]) -> str:
    cols = [
        "local_avr",
        "global_avr",
        "n_arteries",
        "n_veins",
        "crae",
        "crve",
        "mean_artery_diameter",
        "mean_vein_diameter",
    ]
    lines = ["image," + ",".join(cols)]
    lines.append(image + "," + ",".join(_fmt(avr.get(c, float("nan"))) for c in cols))
    return "\n".join(lines) + "\n"


def roc_csv(curve: RocCurve) -> str:
    lines = ["threshold,tpr,tnr"]
    for z, tpr, tnr in zip(curve.thresholds, curve.tpr, curve.tnr):
        lines.append(f"{_fmt(z)},{_fmt(tpr)},{_fmt(tnr)}")
    return "\n".join(lines) + "\n"
