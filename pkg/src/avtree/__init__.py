"""Retinal artery/vein labeling by score propagation over the vessel tree."""

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
)
from .errors import AvtreeError
from .graph import (
    GraphParams,
    ScoredBranch,
    SpanningTree,
    VesselGraph,
    WeightedEdge,
    branch_score,
    build_graph,
    label_cost,
    likelihood_map,
    position_cost,
    prim_mst,
)
from .metrics import (
    RocCurve,
    av_sensitivity_specificity,
    roc_auc,
    stratify_by_diameter,
    three_class_accuracy,
    vessel_probability,
)
from .phantom import PhantomBundle, PhantomSpec, branch_accuracy, corrupt, generate, make_bundle
from .pipeline import PipelineConfig, PipelineResult, parse_config, run_pipeline
from .preprocess import NormalizationParams, assemble_six_channel, illumination_normalize
from .propagation import attenuation, downward_pass, propagate, relabel, upward_pass
from .raster import (
    ARTERY,
    BACKGROUND,
    OUTSIDE,
    VEIN,
    FovMask,
    LabelMap,
    ProbabilityTriplet,
    Raster2D,
    argmax_labels,
    read_avpm,
    write_avpm,
)
from .skeleton import Branch, Skeleton, detect_junctions, extract_branches, zhang_suen_thin

__version__ = "0.1.0"

__all__ = [
    "ARTERY",
    "BACKGROUND",
    "OUTSIDE",
    "VEIN",
    "AvtreeError",
    "Branch",
    "FovMask",
    "GraphParams",
    "KnudtsonConstants",
    "LabelMap",
    "NormalizationParams",
    "OpticDiscSpec",
    "PhantomBundle",
    "PhantomSpec",
    "PipelineConfig",
    "PipelineResult",
    "ProbabilityTriplet",
    "Raster2D",
    "RocCurve",
    "ScoredBranch",
    "Skeleton",
    "SpanningTree",
    "VesselGraph",
    "VesselSegmentMeasure",
    "WeightedEdge",
    "annulus_select",
    "argmax_labels",
    "assemble_six_channel",
    "attenuation",
    "av_sensitivity_specificity",
    "branch_accuracy",
    "branch_score",
    "build_graph",
    "corrupt",
    "detect_junctions",
    "diameter_map",
    "downward_pass",
    "extract_branches",
    "generate",
    "global_avr",
    "illumination_normalize",
    "knudtson_equivalent",
    "label_cost",
    "likelihood_map",
    "local_avr",
    "make_bundle",
    "measure_segments",
    "parse_config",
    "position_cost",
    "prim_mst",
    "propagate",
    "read_avpm",
    "relabel",
    "roc_auc",
    "run_pipeline",
    "stratify_by_diameter",
    "three_class_accuracy",
    "upward_pass",
    "vessel_probability",
    "write_avpm",
    "zhang_suen_thin",
]
