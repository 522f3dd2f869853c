"""Training loop, flat key=value configuration, and probability export."""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .augment import patch_eigenvectors, pca_augment, rotate_patch
from .avpm import OUTSIDE, read_avpm, read_label_png, write_avpm
from .errors import ConfigError, ShapeError
from .net import CLASSES, IN_CHANNELS, VesselNet
from .patches import PatchSet, sample_patches


@dataclass(frozen=True)
class TrainSpec:
    """Knobs of one training run; every field is a config key."""

    patch: int = 128
    batch: int = 128
    epochs: int = 50
    learning_rate: float = 1e-3
    patches_per_image: int = 200
    near_distance: float = 20.0
    augment_magnitude: float = 0.0
    rotate: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.patch < 1 or self.batch < 1 or self.epochs < 1 or self.patches_per_image < 1:
            raise ConfigError("patch, batch, epochs, patches_per_image must be positive")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.near_distance <= 0:
            raise ConfigError(f"near_distance must be positive, got {self.near_distance}")
        if self.augment_magnitude < 0:
            raise ConfigError(f"augment_magnitude must be >= 0, got {self.augment_magnitude}")


_INT_KEYS = {"patch", "batch", "epochs", "patches_per_image", "seed"}
_FLOAT_KEYS = {"learning_rate", "near_distance", "augment_magnitude"}
_BOOL_KEYS = {"rotate"}


def spec_from_values(values: dict[str, str], where: str = "config") -> TrainSpec:
    kwargs: dict[str, object] = {}
    for key, val in values.items():
        if key in _INT_KEYS:
            try:
                kwargs[key] = int(val)
            except ValueError as e:
                raise ConfigError(f"{where}: {key} needs an integer, got {val!r}") from e
        elif key in _FLOAT_KEYS:
            try:
                kwargs[key] = float(val)
            except ValueError as e:
                raise ConfigError(f"{where}: {key} needs a number, got {val!r}") from e
        elif key in _BOOL_KEYS:
            low = val.lower()
            if low not in ("true", "false", "0", "1"):
                raise ConfigError(f"{where}: {key} needs true/false, got {val!r}")
            kwargs[key] = low in ("true", "1")
        else:
            raise ConfigError(f"{where}: unknown key {key!r}")
    return TrainSpec(**kwargs)


def parse_train_config(path) -> TrainSpec:
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
    return spec_from_values(values, where=str(path))


def format_train_config(spec: TrainSpec) -> str:
    return "".join(f"{f.name} = {getattr(spec, f.name)}\n" for f in fields(spec))


def load_pair(channels_path, truth_path) -> tuple[np.ndarray, np.ndarray]:
    """One training example: a six-channel stack and its label image."""
    image = read_avpm(channels_path)
    truth = read_label_png(truth_path)
    if image.shape[0] != IN_CHANNELS:
        raise ShapeError(f"{channels_path}: expected {IN_CHANNELS} channels, got {image.shape[0]}")
    if image.shape[1:] != truth.shape:
        raise ShapeError(f"stack {image.shape} does not cover labels {truth.shape}")
    return image, truth


def build_pool(pairs, spec: TrainSpec, rng: np.random.Generator) -> PatchSet:
    """Pool sampled patches of every image into one set."""
    parts = [
        sample_patches(image, truth, spec.patches_per_image, spec.patch, rng, spec.near_distance)
        for image, truth in pairs
    ]
    parts = [p for p in parts if len(p)]
    if not parts:
        raise ShapeError("no image contributed any vessel-bearing patch")
    return PatchSet(
        images=np.concatenate([p.images for p in parts]),
        labels=np.concatenate([p.labels for p in parts]),
        centers=np.concatenate([p.centers for p in parts]),
    )


def train(
    model: VesselNet,
    pairs,
    spec: TrainSpec,
    max_steps: int | None = None,
    loss_target: float | None = None,
) -> list[float]:
    """Minimize per-pixel cross-entropy with Adam; returns the loss per step.

    Runs epochs over the sampled pool (or until `max_steps`), stopping
    early once the loss falls below `loss_target`.
    """
    rng = np.random.default_rng(spec.seed)
    torch.manual_seed(spec.seed)
    pool = build_pool(pairs, spec, rng)
    eigvecs = None
    if spec.augment_magnitude > 0:
        eigvecs = patch_eigenvectors(pool.images)

    # outside-FOV pixels train as background
    targets = np.where(pool.labels == OUTSIDE, 0, pool.labels).astype(np.int64)
    optimizer = torch.optim.Adam(model.parameters(), lr=spec.learning_rate)
    criterion = nn.CrossEntropyLoss()
    steps_per_epoch = max(1, len(pool) // spec.batch)
    total = spec.epochs * steps_per_epoch if max_steps is None else max_steps

    model.train()
    history: list[float] = []
    for _ in range(total):
        idx = rng.choice(len(pool), size=min(spec.batch, len(pool)), replace=False)
        batch = pool.images[idx]
        if eigvecs is not None:
            batch = np.stack([pca_augment(p, eigvecs, spec.augment_magnitude, rng) for p in batch])
        if spec.rotate:
            batch = np.stack([rotate_patch(p, float(rng.uniform(0, 360))) for p in batch])
        x = torch.from_numpy(np.ascontiguousarray(batch, dtype=np.float32))
        y = torch.from_numpy(targets[idx])
        optimizer.zero_grad()
        loss = criterion(model(x), y)
        loss.backward()
        optimizer.step()
        history.append(float(loss.detach()))
        if loss_target is not None and history[-1] < loss_target:
            break
    return history


def export_probabilities(model: VesselNet, image6: np.ndarray, path, fov: np.ndarray | None = None) -> None:
    """Write the model's per-pixel probabilities as an AVPM triplet.

    With a FOV mask, pixels outside it are exactly (1, 0, 0).
    """
    probs = model.predict(image6)
    if fov is not None:
        if fov.shape != probs.shape[1:]:
            raise ShapeError(f"FOV {fov.shape} does not cover image {probs.shape[1:]}")
        outside = ~fov.astype(bool)
        probs[0, outside] = 1.0
        probs[1:, outside] = 0.0
    assert probs.shape[0] == CLASSES
    write_avpm(probs, path)


def save_model(model: VesselNet, path) -> None:
    torch.save(model.state_dict(), path)


def load_model(path) -> VesselNet:
    model = VesselNet()
    model.load_state_dict(torch.load(path, map_location="cpu", weights_only=True))
    model.eval()
    return model
