"""Encoder-decoder network classifying each pixel as background, artery, or vein.

Five encoding stages of three stacked 3x3 convolutions (the first conv
of each stage doubles the feature count) each followed by 2x2 max
pooling; five decoding stages of nearest-neighbor upscaling, bypass
concatenation (doubling the feature count), and one 3x3 convolution
reducing it by four.  A final 3x3 convolution maps 16 features to the
3 classes, normalized to a per-pixel simplex by softmax.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from .errors import ShapeError

IN_CHANNELS = 6
CLASSES = 3
ENCODE_WIDTHS = (32, 64, 128, 256, 512)
DECODE_WIDTHS = (256, 128, 64, 32, 16)
POOLINGS = len(ENCODE_WIDTHS)


class _EncodeStage(nn.Module):
    def __init__(self, cin: int, cout: int):
        super().__init__()
        self.convs = nn.Sequential(
            nn.Conv2d(cin, cout, 3, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(cout, cout, 3, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(cout, cout, 3, padding=1),
            nn.ReLU(inplace=True),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.convs(x)


class VesselNet(nn.Module):
    """Maps a six-channel stack to three per-pixel class logits of the same size."""

    def __init__(self):
        super().__init__()
        ins = (IN_CHANNELS,) + ENCODE_WIDTHS[:-1]
        self.encode = nn.ModuleList(_EncodeStage(i, o) for i, o in zip(ins, ENCODE_WIDTHS))
        self.pool = nn.MaxPool2d(2)
        self.up = nn.Upsample(scale_factor=2, mode="nearest")
        self.decode = nn.ModuleList(
            nn.Conv2d(2 * bypass, out, 3, padding=1)
            for bypass, out in zip(reversed(ENCODE_WIDTHS), DECODE_WIDTHS)
        )
        self.head = nn.Conv2d(DECODE_WIDTHS[-1], CLASSES, 3, padding=1)
        for m in self.modules():
            if isinstance(m, nn.Conv2d):
                nn.init.xavier_uniform_(m.weight)
                nn.init.zeros_(m.bias)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.ndim != 4 or x.shape[1] != IN_CHANNELS:
            raise ShapeError(f"expected (batch, {IN_CHANNELS}, height, width), got {tuple(x.shape)}")
        h, w = x.shape[2], x.shape[3]
        if h < 1 or w < 1:
            raise ShapeError(f"degenerate image {h}x{w}")
        # channels arrive in photo units; centering keeps early activations O(1)
        x = (x - 128.0) / 50.0
        step = 2**POOLINGS
        pad_h = (step - h % step) % step
        pad_w = (step - w % step) % step
        if pad_h or pad_w:
            x = F.pad(x, (0, pad_w, 0, pad_h))
        skips = []
        for stage in self.encode:
            x = stage(x)
            skips.append(x)
            x = self.pool(x)
        for conv, skip in zip(self.decode, reversed(skips)):
            x = torch.relu(conv(torch.cat([self.up(x), skip], dim=1)))
        x = self.head(x)
        return x[:, :, :h, :w]

    @torch.no_grad()
    def predict(self, image6: np.ndarray) -> np.ndarray:
        """Per-pixel class probabilities (3, height, width) for one stack."""
        if image6.ndim != 3 or image6.shape[0] != IN_CHANNELS:
            raise ShapeError(f"expected a ({IN_CHANNELS}, height, width) stack, got {image6.shape}")
        t = torch.from_numpy(np.ascontiguousarray(image6, dtype=np.float32)).unsqueeze(0)
        was_training = self.training
        self.eval()
        probs = torch.softmax(self.forward(t), dim=1).squeeze(0)
        if was_training:
            self.train()
        return probs.numpy().astype(np.float32)
