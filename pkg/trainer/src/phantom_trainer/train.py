"""Training loop over the batch stream, with LR reduction and early stopping.

Epoch boundaries come from the stream's frame epoch field. After each
epoch the validation loss drives two counters: the learning rate halves
after `lr_patience` epochs without improvement > `min_delta`, training
stops after `early_stop_patience` such epochs. Loss and prediction CSVs
are written in the shapes the pipeline CLI consumes (`plot-loss`,
`evaluate`).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO

import numpy as np
import torch
from torch import nn

from .data import load_validation
from .model import SmallConvNet
from .protocol import StreamReader


INPUT_MEAN = 0.45
INPUT_SCALE = 0.3


@dataclass
class TrainConfig:
    learning_rate: float = 0.0005
    batch_size: int = 32
    max_epochs: int = 40  # desk scale; the full-scale setting is 250
    lr_reduce_factor: float = 0.5
    lr_patience: int = 5
    lr_min_delta: float = 0.001
    early_stop_patience: int = 15
    early_stop_min_delta: float = 0.001
    dropout: float = 0.5
    input_size: int = 80


def _normalize(x: torch.Tensor) -> torch.Tensor:
    return (x - INPUT_MEAN) / INPUT_SCALE


@dataclass
class LossCurve:
    strategy: str
    seed: int
    epochs: list[int] = field(default_factory=list)
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["series", "epoch", "loss"])
            for e, loss in zip(self.epochs, self.train_loss):
                writer.writerow([f"{self.strategy}-train", e, f"{loss:.6f}"])
            for e, loss in zip(self.epochs, self.val_loss):
                writer.writerow([f"{self.strategy}-val", e, f"{loss:.6f}"])


@dataclass
class TrainResult:
    curve: LossCurve
    loss_csv: Path
    preds_csv: Path
    accuracy: float  # plain validation accuracy, percent


def _evaluate(
    model: nn.Module,
    images: torch.Tensor,
    targets: torch.Tensor,
    criterion,
    batch_size: int,
):
    model.eval()
    losses = []
    preds = []
    with torch.no_grad():
        for i in range(0, images.shape[0], batch_size):
            xb = images[i : i + batch_size]
            yb = targets[i : i + batch_size]
            logits = model(xb)
            losses.append(float(criterion(logits, yb)) * xb.shape[0])
            preds.extend(int(p) for p in logits.argmax(dim=1))
    return sum(losses) / images.shape[0], preds


def train(
    stream: BinaryIO,
    val_manifest: str | Path,
    cfg: TrainConfig,
    replicate_seed: int,
    out_dir: str | Path,
) -> TrainResult:
    """Consume one stream end-to-end and train a classifier on it.

    Returns the loss curve plus the paths of the emitted CSVs:
    loss_<strategy>_<seed>.csv and preds_<strategy>_<seed>.csv.
    """
    torch.manual_seed(replicate_seed)

    reader = StreamReader(stream)
    header = reader.header
    class_index = {lbl: i for i, lbl in enumerate(header.classes)}

    val = load_validation(val_manifest, cfg.input_size)
    val_images = _normalize(torch.from_numpy(val.images).unsqueeze(1))
    val_targets = torch.tensor(
        [class_index[lbl] for lbl in val.labels], dtype=torch.long
    )

    model = SmallConvNet(
        n_classes=len(header.classes), input_size=cfg.input_size, dropout=cfg.dropout
    )
    criterion = nn.CrossEntropyLoss()
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)

    curve = LossCurve(strategy=header.strategy, seed=replicate_seed)
    best_val = float("inf")
    lr_wait = 0
    stop_wait = 0
    stopped = False

    current_epoch = None
    batch_losses: list[float] = []

    def finish_epoch(epoch: int) -> bool:
        """Close out one epoch; returns True when training should stop."""
        nonlocal best_val, lr_wait, stop_wait
        train_loss = float(np.mean(batch_losses)) if batch_losses else float("nan")
        val_loss, _ = _evaluate(model, val_images, val_targets, criterion, cfg.batch_size)
        curve.epochs.append(epoch)
        curve.train_loss.append(train_loss)
        curve.val_loss.append(val_loss)

        if val_loss < best_val - cfg.early_stop_min_delta:
            stop_wait = 0
        else:
            stop_wait += 1
        if val_loss < best_val - cfg.lr_min_delta:
            lr_wait = 0
        else:
            lr_wait += 1
        if val_loss < best_val:
            best_val = val_loss
        if lr_wait >= cfg.lr_patience:
            lr_wait = 0
            for group in optimizer.param_groups:
                group["lr"] *= cfg.lr_reduce_factor
        return stop_wait >= cfg.early_stop_patience

    for frame in reader.frames():
        if frame.epoch != current_epoch:
            if current_epoch is not None:
                if finish_epoch(current_epoch):
                    stopped = True
                    break
            if frame.epoch >= cfg.max_epochs:
                stopped = True
                break
            current_epoch = frame.epoch
            batch_losses = []

        model.train()
        xb = _normalize(
            torch.from_numpy(frame.images.astype(np.float32) / 255.0).unsqueeze(1)
        )
        yb = torch.from_numpy(frame.labels.astype(np.int64))
        optimizer.zero_grad()
        loss = criterion(model(xb), yb)
        loss.backward()
        optimizer.step()
        batch_losses.append(float(loss.detach()))

    if stopped:
        reader.drain()
    elif current_epoch is not None:
        finish_epoch(current_epoch)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tag = f"{header.strategy}_{replicate_seed}"
    loss_csv = out / f"loss_{tag}.csv"
    curve.write_csv(loss_csv)

    _, pred_idx = _evaluate(model, val_images, val_targets, criterion, cfg.batch_size)
    preds_csv = out / f"preds_{tag}.csv"
    with open(preds_csv, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "true", "pred"])
        for rid, true, p in zip(val.ids, val.labels, pred_idx):
            writer.writerow([rid, true, header.classes[p]])
    correct = sum(1 for t, p in zip(val.labels, pred_idx) if header.classes[p] == t)
    accuracy = 100.0 * correct / len(val.labels)
    return TrainResult(
        curve=curve, loss_csv=loss_csv, preds_csv=preds_csv, accuracy=accuracy
    )
