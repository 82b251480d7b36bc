"""Small convolutional classifier for 6-class grayscale inputs."""

from __future__ import annotations

import torch
from torch import nn


class SmallConvNet(nn.Module):
    """Three slim conv blocks, dropout before the final fully-connected layer.

    Sized for CPU training at desk scale; the wide first FC layer is what
    lets the network memorize a small unaugmented training set (the
    overfitting control needs that capacity).
    """

    def __init__(self, n_classes: int = 6, input_size: int = 80, dropout: float = 0.5):
        super().__init__()
        self.features = nn.Sequential(
            nn.Conv2d(1, 8, 3, padding=1),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(2),
            nn.Conv2d(8, 16, 3, padding=1),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(2),
            nn.Conv2d(16, 32, 3, padding=1),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(2),
        )
        feat = input_size // 8
        self.classifier = nn.Sequential(
            nn.Flatten(),
            nn.Linear(32 * feat * feat, 128),
            nn.ReLU(inplace=True),
            nn.Dropout(dropout),
            nn.Linear(128, n_classes),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.classifier(self.features(x))
