"""Encoder-decoder classifier labeling fundus pixels as background, artery, or vein."""

from .augment import patch_eigenvectors, pca_augment, rotate_patch
from .avpm import (
    ARTERY,
    BACKGROUND,
    OUTSIDE,
    VEIN,
    read_avpm,
    read_fov_png,
    read_label_png,
    write_avpm,
)
from .errors import AvmodelError, ConfigError, FormatError, IoFailure, ShapeError
from .net import CLASSES, DECODE_WIDTHS, ENCODE_WIDTHS, IN_CHANNELS, VesselNet
from .patches import PatchSet, sample_patches
from .train import (
    TrainSpec,
    build_pool,
    export_probabilities,
    format_train_config,
    load_model,
    load_pair,
    parse_train_config,
    save_model,
    spec_from_values,
    train,
)
