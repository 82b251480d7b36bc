"""Synthetic ultrasound-like corpus with ground-truth masks and eligibility.

Target classes render a bright ring (the "thorax") whose interior holds a
class-specific count and angular layout of dark blobs, so the class
signal lives inside the circle and survives cut-paste. NT images either
carry a blob-free thorax or, with configurable probability, no thorax at
all. A configurable fraction of thorax draws is made highly eccentric so
the QC gate has something to reject. Masks can carry small holes and
far-away speckles to exercise cleanup; the ground-truth region is what
cleanup should recover.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from .corpus import (
    CLASS_LABELS,
    ImageRecord,
    Manifest,
    NT_LABEL,
    TARGET_LABELS,
    label_index,
    normalize_label,
    save_manifest,
)
from .errors import DataError
from .geometry import CircleFit
from .imageio import save_gray, save_mask
from .seeding import derived_rng


@dataclass
class PhantomConfig:
    counts: dict[str, int] = field(default_factory=dict)
    image_size: int = 160
    nt_thoraxless_fraction: float = 0.59
    eccentric_fraction: float = 0.05
    eccentricity_when_eccentric: float = 0.85
    noise_level: float = 6.0
    # Random global rotation of the interior blob layout, in radians.
    # Small by default (layouts nearly aligned across images); set to pi
    # for fully random orientations, which makes rotation augmentation
    # genuinely informative at training time.
    blob_phase_jitter: float = 0.12
    # Per-image blob-vs-interior contrast, drawn uniformly from this
    # range. A weak low end yields faint, genuinely ambiguous interiors
    # (the phantom analog of poor image quality).
    blob_contrast_range: tuple[float, float] = (95.0, 95.0)
    mask_artifacts: bool = True
    frames_per_patient: int = 4
    split_tag: str = "phantom"
    seed: int = 0

    def __post_init__(self):
        for name in ("nt_thoraxless_fraction", "eccentric_fraction"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise DataError(f"{name} must be in [0, 1], got {p}")
        if not 0.75 < self.eccentricity_when_eccentric < 1.0:
            raise DataError("eccentricity_when_eccentric must exceed the 0.75 gate")
        if self.image_size < 32:
            raise DataError("image_size must be >= 32")
        for lbl, n in self.counts.items():
            normalize_label(lbl)
            if n < 0:
                raise DataError(f"count for {lbl} must be >= 0")

    @classmethod
    def with_counts(cls, per_target: int, nt: int, **kwargs) -> "PhantomConfig":
        counts = {lbl: per_target for lbl in TARGET_LABELS}
        counts[NT_LABEL] = nt
        return cls(counts=counts, **kwargs)


@dataclass
class PhantomRecord:
    label: str
    circle: CircleFit | None
    eligible: bool
    class_signature: str
    record: ImageRecord | None = None


# Interior blob counts per target class: index in TARGET_LABELS plus two,
# so every class has a distinct count; phases separate layouts further.
_BLOBS = {lbl: i + 2 for i, lbl in enumerate(TARGET_LABELS)}
_PHASE = {lbl: i * (2.0 * math.pi / 12.0) for i, lbl in enumerate(TARGET_LABELS)}


def _segment_distance(gx, gy, p0, p1):
    vx, vy = p1[0] - p0[0], p1[1] - p0[1]
    length2 = vx * vx + vy * vy
    if length2 == 0:
        return np.hypot(gx - p0[0], gy - p0[1])
    t = ((gx - p0[0]) * vx + (gy - p0[1]) * vy) / length2
    t = np.clip(t, 0.0, 1.0)
    return np.hypot(gx - (p0[0] + t * vx), gy - (p0[1] + t * vy))


def render_phantom(
    label: str, config: PhantomConfig, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, PhantomRecord]:
    """Render one phantom image, its mask, and the ground-truth record."""
    label = normalize_label(label)
    size = config.image_size
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    field_img = np.full((size, size), float(rng.uniform(12.0, 24.0)))

    # Limb-like background streaks.
    for _ in range(int(rng.integers(2, 5))):
        p0 = rng.uniform(0, size, 2)
        p1 = rng.uniform(0, size, 2)
        width = float(rng.uniform(2.0, 5.0))
        gain = float(rng.uniform(20.0, 50.0))
        d = _segment_distance(xs, ys, p0, p1)
        field_img += gain * np.exp(-((d / width) ** 2))

    thorax_present = True
    if label == NT_LABEL:
        thorax_present = rng.random() >= config.nt_thoraxless_fraction

    mask = np.zeros((size, size), dtype=bool)
    circle: CircleFit | None = None
    eligible = False
    signature = "thoraxless"

    if thorax_present:
        eccentric = rng.random() < config.eccentric_fraction
        cx = size / 2.0 + float(rng.uniform(-0.02, 0.02)) * size
        cy = size / 2.0 + float(rng.uniform(-0.02, 0.02)) * size
        r = float(rng.uniform(0.23, 0.26)) * size
        phi = float(rng.uniform(0.0, math.pi))

        if eccentric:
            ecc = config.eccentricity_when_eccentric
            a, b = r, r * math.sqrt(1.0 - ecc * ecc)
        else:
            a = b = r
        cphi, sphi = math.cos(phi), math.sin(phi)
        u = (xs - cx) * cphi + (ys - cy) * sphi
        v = -(xs - cx) * sphi + (ys - cy) * cphi
        q = np.sqrt((u / a) ** 2 + (v / b) ** 2)

        ring_frac = max(2.0, 0.10 * r) / r
        region = q <= 1.0
        ring = region & (q >= 1.0 - ring_frac)
        interior = q < 1.0 - ring_frac
        field_img[interior] = 105.0
        field_img[ring] = 205.0

        if label != NT_LABEL:
            nblobs = _BLOBS[label]
            jit = config.blob_phase_jitter
            phase = _PHASE[label] + float(rng.uniform(-jit, jit))
            lo, hi = config.blob_contrast_range
            contrast = float(rng.uniform(lo, hi))
            blob_r = 0.24 * r
            ring_radius = 0.52 * min(a, b)  # stays inside the interior
            for k in range(nblobs):
                ang = phase + k * (2.0 * math.pi / nblobs)
                bx = cx + ring_radius * math.cos(ang)
                by = cy + ring_radius * math.sin(ang)
                blob = (xs - bx) ** 2 + (ys - by) ** 2 <= blob_r * blob_r
                field_img[blob & interior] = 105.0 - contrast
            signature = f"blobs={nblobs};phase={phase:.3f}"
        else:
            signature = "plain-thorax"

        mask = region
        circle = CircleFit(cx=cx, cy=cy, r=r)
        in_bounds = (
            cx - r >= 0 and cy - r >= 0 and cx + r <= size - 1 and cy + r <= size - 1
        )
        eligible = bool((not eccentric) and in_bounds)

        if config.mask_artifacts:
            mask = mask.copy()
            inner = min(a, b) * (1.0 - ring_frac)
            for _ in range(int(rng.integers(1, 4))):
                hole_r = float(rng.uniform(1.5, 3.0))
                reach = inner - hole_r - 2.0
                ang = float(rng.uniform(0.0, 2.0 * math.pi))
                dist = float(rng.uniform(0.0, 1.0))
                if reach <= 0:
                    continue
                hx = cx + dist * reach * math.cos(ang)
                hy = cy + dist * reach * math.sin(ang)
                mask &= (xs - hx) ** 2 + (ys - hy) ** 2 > hole_r * hole_r
            for _ in range(int(rng.integers(1, 3))):
                sx = float(rng.uniform(2.0, 12.0))
                sy = float(rng.uniform(2.0, 12.0))
                spec_r = float(rng.uniform(1.0, 2.5))
                mask |= (xs - sx) ** 2 + (ys - sy) ** 2 <= spec_r * spec_r

    field_img += rng.normal(0.0, config.noise_level, (size, size))
    image = np.clip(np.rint(field_img), 0, 255).astype(np.uint8)
    return image, mask, PhantomRecord(
        label=label, circle=circle, eligible=eligible, class_signature=signature
    )


def iter_phantoms(
    config: PhantomConfig,
) -> Iterator[tuple[str, int, np.ndarray, np.ndarray, PhantomRecord]]:
    """Yield (label, index, image, mask, truth) with per-record derived rngs."""
    for lbl in CLASS_LABELS:
        n = config.counts.get(lbl, 0)
        for i in range(n):
            rng = derived_rng(config.seed, "phantom", label_index(lbl), i)
            image, mask, truth = render_phantom(lbl, config, rng)
            yield lbl, i, image, mask, truth


def generate_corpus(
    config: PhantomConfig, out_dir: str | Path
) -> tuple[Manifest, list[PhantomRecord]]:
    """Write PNGs, mask PNGs, the manifest, and a ground-truth sidecar.

    The sidecar is JSON Lines: {"id", "cx", "cy", "r", "eligible", "label"}
    (circle fields null for thoraxless records).
    """
    out = Path(out_dir)
    img_dir = out / "images"
    mask_dir = out / "masks"
    img_dir.mkdir(parents=True, exist_ok=True)
    mask_dir.mkdir(parents=True, exist_ok=True)

    records: list[ImageRecord] = []
    truths: list[PhantomRecord] = []
    gt_lines: list[str] = []
    for lbl, i, image, mask, truth in iter_phantoms(config):
        rid = f"ph-{lbl.lower()}-{i:05d}"
        img_path = img_dir / f"{rid}.png"
        mask_path = mask_dir / f"{rid}.png"
        save_gray(img_path, image)
        save_mask(mask_path, mask)
        rec = ImageRecord(
            id=rid,
            path=str(img_path),
            label=lbl,
            patient_id=f"{lbl.lower()}-p{i // config.frames_per_patient:04d}",
            frame_index=i % config.frames_per_patient,
            mask_path=str(mask_path),
        )
        truth.record = rec
        records.append(rec)
        truths.append(truth)
        gt_lines.append(
            json.dumps(
                {
                    "id": rid,
                    "cx": truth.circle.cx if truth.circle else None,
                    "cy": truth.circle.cy if truth.circle else None,
                    "r": truth.circle.r if truth.circle else None,
                    "eligible": truth.eligible,
                    "label": lbl,
                },
                sort_keys=True,
            )
        )

    manifest = Manifest(records=records, split_tag=config.split_tag)
    save_manifest(manifest, out / "manifest.jsonl")
    (out / "ground_truth.jsonl").write_text("\n".join(gt_lines) + "\n" if gt_lines else "")
    return manifest, truths


def load_ground_truth(path: str | Path) -> dict[str, dict]:
    """Read a ground-truth sidecar back as {id: row}."""
    rows = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                row = json.loads(line)
                rows[row["id"]] = row
    return rows
