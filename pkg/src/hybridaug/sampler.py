"""Offline dataset planning/materialization and online epoch scheduling.

Offline: each class gets enough hybrids that the hybrid fraction reaches
the target (donors are reused `multiplicity` times, ceiling rounding).

Online: four strategies build an entry multiset per epoch.
  NoAug              every record once, unchanged.
  CutPasteNaive      every eligible record once as a hybrid, the rest
                     unchanged (this is the probability-1 variant whose
                     non-target skew motivates the balanced strategy).
  CutPasteBalanced   eligible target records twice (hybrid + unchanged);
                     eligible NT records once, hybrid only; ineligible
                     records once, unchanged.
  TraditionalBalanced same multiset shape with traditional augmentation
                     in place of hybrids, for a like-for-like comparison.
Entries are shuffled with a per-epoch derived seed and chunked into
batches; the final short batch is kept.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from .corpus import (
    ImageRecord,
    Manifest,
    NT_LABEL,
    label_index,
    normalize_label,
    save_manifest,
)
from .errors import DataError, MissingEligibilityError, PoolMismatchError
from .imageio import save_gray
from .seeding import derived_rng
from .synthesis import ROTATION_RANGE, TemplatePool, synthesize
from .tradaug import TradAugConfig, apply_traditional
from .warp import resize_bilinear

DEFAULT_BATCH_SIZE = 32
DEFAULT_IMAGE_SIZE = 80


class Strategy(enum.Enum):
    NO_AUG = "none"
    TRADITIONAL_BALANCED = "traditional-balanced"
    CUT_PASTE_NAIVE = "cutpaste-naive"
    CUT_PASTE_BALANCED = "cutpaste-balanced"

    @classmethod
    def parse(cls, name: str) -> "Strategy":
        for strat in cls:
            if strat.value == name or strat.name == name:
                return strat
        raise DataError(f"unknown strategy {name!r}")


class Form(enum.Enum):
    UNCHANGED = "unchanged"
    HYBRID = "hybrid"
    TRADITIONAL = "traditional"


@dataclass(frozen=True)
class BatchEntry:
    record_id: str
    form: Form


@dataclass
class EpochSchedule:
    epoch: int
    batches: list[list[BatchEntry]]

    def entries(self) -> list[BatchEntry]:
        return [e for batch in self.batches for e in batch]

    def to_jsonl(self, path: str | Path) -> None:
        """One batch per line, for audit."""
        with open(path, "w", encoding="utf-8") as fh:
            for i, batch in enumerate(self.batches):
                fh.write(
                    json.dumps(
                        {
                            "epoch": self.epoch,
                            "batch": i,
                            "entries": [
                                {"id": e.record_id, "form": e.form.value}
                                for e in batch
                            ],
                        },
                        sort_keys=True,
                    )
                    + "\n"
                )


@dataclass(frozen=True)
class PlanRow:
    label: str
    donors: int
    originals_sampled: int
    multiplicity: int

    @property
    def hybrids(self) -> int:
        return self.donors * self.multiplicity

    @property
    def total(self) -> int:
        return self.hybrids + self.originals_sampled

    @property
    def hybrid_fraction(self) -> float:
        """Percent of hybrids in the class total."""
        return 100.0 * self.hybrids / self.total if self.total else 0.0


@dataclass
class OfflinePlan:
    rows: list[PlanRow]
    fraction_target: float

    @property
    def hybrids(self) -> int:
        return sum(r.hybrids for r in self.rows)

    @property
    def originals_sampled(self) -> int:
        return sum(r.originals_sampled for r in self.rows)

    @property
    def total(self) -> int:
        return sum(r.total for r in self.rows)

    @property
    def hybrid_fraction(self) -> float:
        return 100.0 * self.hybrids / self.total if self.total else 0.0

    def to_tsv(self) -> str:
        lines = [
            "view\tdonors\ttimes_sampled\thybrids\toriginals_sampled\ttotal\thybrid_pct"
        ]
        for r in self.rows:
            lines.append(
                f"{r.label}\t{r.donors}\t{r.multiplicity}\t{r.hybrids}"
                f"\t{r.originals_sampled}\t{r.total}\t{format_percent(r.hybrid_fraction)}"
            )
        lines.append(
            f"TOTAL\t{sum(r.donors for r in self.rows)}\tN/A\t{self.hybrids}"
            f"\t{self.originals_sampled}\t{self.total}\t{format_percent(self.hybrid_fraction)}"
        )
        return "\n".join(lines) + "\n"


def format_percent(pct: float) -> str:
    """Percent to one decimal, via an intermediate 2-decimal rounding.

    The source table's per-class fractions follow plain rounding while its
    total row only matches when 90.25 rounds down, i.e. when the value is
    first taken to two decimals and then re-rounded half-to-even.
    """
    return f"{round(round(pct, 2), 1):.1f}"


def plan_offline(
    classes: list[tuple[str, int, int]], hybrid_fraction_target: float = 0.9
) -> OfflinePlan:
    """Plan per-class hybrid counts for an offline dataset.

    `classes` rows are (label, donors, originals_sampled). For target
    fraction f, a class needs originals * f / (1 - f) hybrids; donors are
    reused ceil(needed / donors) times each.
    """
    if not 0.0 <= hybrid_fraction_target < 1.0:
        raise DataError(
            f"hybrid fraction target must be in [0, 1), got {hybrid_fraction_target}"
        )
    f = Fraction(str(hybrid_fraction_target))
    rows = []
    for label, donors, originals in classes:
        if donors < 1:
            raise DataError(f"{label}: donor count must be >= 1")
        if originals < 0:
            raise DataError(f"{label}: originals_sampled must be >= 0")
        needed = Fraction(originals) * f / (1 - f)
        multiplicity = int(math.ceil(needed / donors)) if needed > 0 else 0
        rows.append(
            PlanRow(
                label=normalize_label(label),
                donors=donors,
                originals_sampled=originals,
                multiplicity=multiplicity,
            )
        )
    return OfflinePlan(rows=rows, fraction_target=hybrid_fraction_target)


def build_epoch_schedule(
    manifest: Manifest,
    eligibility: Mapping[str, bool],
    strategy: Strategy,
    seed: int,
    epoch: int,
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> EpochSchedule:
    """Entry multiset for one epoch, shuffled and chunked into batches."""
    if batch_size < 1:
        raise DataError(f"batch_size must be >= 1, got {batch_size}")
    entries: list[BatchEntry] = []
    aug_form = (
        Form.TRADITIONAL
        if strategy is Strategy.TRADITIONAL_BALANCED
        else Form.HYBRID
    )
    for rec in manifest.records:
        if rec.id not in eligibility:
            raise MissingEligibilityError(rec.id)
        eligible = bool(eligibility[rec.id])
        if strategy is Strategy.NO_AUG or not eligible:
            entries.append(BatchEntry(rec.id, Form.UNCHANGED))
        elif strategy is Strategy.CUT_PASTE_NAIVE:
            entries.append(BatchEntry(rec.id, Form.HYBRID))
        elif rec.label == NT_LABEL:
            entries.append(BatchEntry(rec.id, aug_form))
        else:
            entries.append(BatchEntry(rec.id, aug_form))
            entries.append(BatchEntry(rec.id, Form.UNCHANGED))

    rng = derived_rng(seed, "epoch-schedule", epoch)
    order = rng.permutation(len(entries))
    shuffled = [entries[int(i)] for i in order]
    batches = [
        shuffled[i : i + batch_size] for i in range(0, len(shuffled), batch_size)
    ]
    return EpochSchedule(epoch=epoch, batches=batches)


def realize_entry(
    entry: BatchEntry,
    record: ImageRecord,
    image_loader: Callable[[ImageRecord], np.ndarray],
    pools: TemplatePool,
    tradaug_cfg: TradAugConfig,
    rng: np.random.Generator,
    image_size: int = DEFAULT_IMAGE_SIZE,
) -> tuple[np.ndarray, str, dict | None]:
    """Realize one schedule entry; returns (image, label, provenance)."""
    if entry.form is Form.UNCHANGED:
        img = image_loader(record)
        return resize_bilinear(img, image_size, image_size), record.label, None
    if entry.form is Form.HYBRID:
        donor = pools.donors_by_id.get(entry.record_id)
        if donor is None:
            raise DataError(f"record {entry.record_id!r} not in donor pool")
        if not pools.acceptors:
            raise DataError("acceptor pool is empty")
        acceptor = pools.acceptors[int(rng.integers(0, len(pools.acceptors)))]
        rotation = float(rng.uniform(*ROTATION_RANGE))
        hybrid = synthesize(donor, acceptor, rotation)
        img = resize_bilinear(hybrid.image, image_size, image_size)
        return img, hybrid.label, hybrid.provenance()
    img = image_loader(record)
    augmented, rec = apply_traditional(img, tradaug_cfg, rng)
    return (
        resize_bilinear(augmented, image_size, image_size),
        record.label,
        {"traditional": rec.applied_ops()},
    )


def realize_batch(
    batch: list[BatchEntry],
    records_by_id: Mapping[str, ImageRecord],
    image_loader: Callable[[ImageRecord], np.ndarray],
    pools: TemplatePool,
    tradaug_cfg: TradAugConfig,
    seed: int,
    epoch: int,
    batch_index: int,
    image_size: int = DEFAULT_IMAGE_SIZE,
) -> list[tuple[np.ndarray, str]]:
    """Realize a batch deterministically.

    Each position derives its own generator from (seed, epoch,
    batch_index, position), so realization is independent of evaluation
    order and worker count.
    """
    out = []
    for pos, entry in enumerate(batch):
        rec = records_by_id.get(entry.record_id)
        if rec is None:
            raise DataError(f"record {entry.record_id!r} missing from manifest")
        rng = derived_rng(seed, "realize", epoch, batch_index, pos)
        img, label, _ = realize_entry(
            entry, rec, image_loader, pools, tradaug_cfg, rng, image_size
        )
        out.append((img, label))
    return out


@dataclass
class MaterializedDataset:
    manifest: Manifest
    donor_usage: dict[str, int] = field(default_factory=dict)


def materialize_offline(
    plan: OfflinePlan,
    pools: TemplatePool,
    originals: Manifest,
    seed: int,
    out_dir: str | Path,
) -> MaterializedDataset:
    """Write the offline hybrid dataset an OfflinePlan describes.

    Every donor of a class is used exactly `multiplicity` times with a
    fresh random acceptor and rotation per use. Sampled originals pass
    through by reference. Hybrid PNGs are written together with a
    provenance sidecar {donor_id, acceptor_id, rotation_deg, scale}.
    """
    out = Path(out_dir)
    img_dir = out / "images"
    img_dir.mkdir(parents=True, exist_ok=True)

    records: list[ImageRecord] = []
    usage: dict[str, int] = {}
    for row in plan.rows:
        donors = pools.donors_with_label(row.label)
        if len(donors) != row.donors:
            raise PoolMismatchError(
                f"{row.label}: plan expects {row.donors} donors, pool has {len(donors)}"
            )
        donors = sorted(donors, key=lambda d: d.source_id)

        class_originals = originals.with_label(row.label)
        if len(class_originals) < row.originals_sampled:
            raise PoolMismatchError(
                f"{row.label}: plan samples {row.originals_sampled} originals, "
                f"manifest has {len(class_originals)}"
            )
        pick_rng = derived_rng(seed, "offline-originals", label_index(row.label))
        order = pick_rng.permutation(len(class_originals))[: row.originals_sampled]
        records.extend(class_originals[int(i)] for i in sorted(order))

        for donor_idx, donor in enumerate(donors):
            usage[donor.source_id] = 0
            for k in range(row.multiplicity):
                rng = derived_rng(
                    seed, "offline-hybrid", label_index(row.label), donor_idx, k
                )
                acceptor = pools.acceptors[int(rng.integers(0, len(pools.acceptors)))]
                rotation = float(rng.uniform(*ROTATION_RANGE))
                hybrid = synthesize(donor, acceptor, rotation)
                usage[donor.source_id] += 1

                hid = f"hyb-{donor.source_id}-{k:04d}"
                png = img_dir / f"{hid}.png"
                save_gray(png, hybrid.image)
                (img_dir / f"{hid}.json").write_text(
                    json.dumps(hybrid.provenance(), sort_keys=True) + "\n"
                )
                records.append(
                    ImageRecord(
                        id=hid,
                        path=str(png),
                        label=hybrid.label,
                        patient_id=f"hybrid-{donor.source_id}",
                        frame_index=k,
                        mask_path=None,
                    )
                )

    manifest = Manifest(records=records, split_tag="offline-hybrid")
    save_manifest(manifest, out / "manifest.jsonl")
    return MaterializedDataset(manifest=manifest, donor_usage=usage)
