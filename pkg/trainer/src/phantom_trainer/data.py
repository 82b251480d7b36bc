"""Validation-set loading: manifest JSONL plus 8-bit grayscale PNGs.

Training data never comes through here — the trainer consumes training
batches exclusively from the stream protocol. Validation images are
original, unchanged files resized to the network input size.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image


@dataclass
class ValSet:
    ids: list[str]
    labels: list[str]
    images: np.ndarray  # (n, size, size) float32 in [0, 1]


def load_validation(manifest_path: str | Path, input_size: int) -> ValSet:
    ids: list[str] = []
    labels: list[str] = []
    arrays: list[np.ndarray] = []
    root = Path(manifest_path).parent
    with open(manifest_path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            path = Path(rec["path"])
            if not path.is_absolute():
                path = root / path
            with Image.open(path) as im:
                if im.mode != "L":
                    raise ValueError(f"{path}: expected 8-bit grayscale PNG")
                im = im.resize((input_size, input_size), Image.BILINEAR)
                arrays.append(np.asarray(im, dtype=np.float32) / 255.0)
            ids.append(str(rec["id"]))
            labels.append(str(rec["label"]))
    if not arrays:
        raise ValueError(f"{manifest_path}: no records")
    return ValSet(ids=ids, labels=labels, images=np.stack(arrays))
