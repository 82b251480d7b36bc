"""Manifest loading, validation, class accounting and subsampling.

A manifest is a JSON Lines file, one record per line:

    {"id": str, "path": str, "label": str, "patient_id": str,
     "frame_index": int, "mask_path": str | null}

The six view classes are fixed; NT is the non-target class.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    DuplicateIdError,
    InsufficientClassError,
    ManifestError,
    UnknownLabelError,
)
from .seeding import derived_rng

CLASS_LABELS = ("3VT", "3VV", "LVOT", "A4C", "ABDO", "NT")
NT_LABEL = "NT"
TARGET_LABELS = tuple(lbl for lbl in CLASS_LABELS if lbl != NT_LABEL)

# Row order used by the paper-style summary tables.
TABLE_ORDER = ("3VT", "3VV", "A4C", "LVOT", "ABDO", "NT")

_LABEL_INDEX = {lbl: i for i, lbl in enumerate(CLASS_LABELS)}


def normalize_label(label: str, line: int | None = None) -> str:
    """Canonicalize a class label (case-insensitive); reject unknown ones."""
    canon = str(label).upper()
    if canon not in _LABEL_INDEX:
        raise UnknownLabelError(f"unknown label {label!r}", line)
    return canon


def label_index(label: str) -> int:
    return _LABEL_INDEX[normalize_label(label)]


def is_target(label: str) -> bool:
    return normalize_label(label) != NT_LABEL


@dataclass(frozen=True)
class ImageRecord:
    id: str
    path: str
    label: str
    patient_id: str
    frame_index: int
    mask_path: str | None = None

    def to_json(self) -> str:
        return json.dumps(
            {
                "id": self.id,
                "path": self.path,
                "label": self.label,
                "patient_id": self.patient_id,
                "frame_index": self.frame_index,
                "mask_path": self.mask_path,
            },
            sort_keys=True,
        )


@dataclass
class Manifest:
    records: list[ImageRecord] = field(default_factory=list)
    split_tag: str = ""

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def by_id(self) -> dict[str, ImageRecord]:
        return {r.id: r for r in self.records}

    def with_label(self, label: str) -> list[ImageRecord]:
        canon = normalize_label(label)
        return [r for r in self.records if r.label == canon]

    def ids(self) -> set[str]:
        return {r.id for r in self.records}


def _parse_record(obj: dict, line: int) -> ImageRecord:
    try:
        rid = str(obj["id"])
        path = str(obj["path"])
        label = normalize_label(obj["label"], line)
        patient_id = str(obj["patient_id"])
        frame_index = int(obj["frame_index"])
        mask_path = obj.get("mask_path")
    except KeyError as exc:
        raise ManifestError(f"missing field {exc.args[0]!r}", line) from None
    if not path:
        raise ManifestError("empty path", line)
    if frame_index < 0:
        raise ManifestError(f"negative frame_index {frame_index}", line)
    if mask_path is not None:
        mask_path = str(mask_path)
    return ImageRecord(rid, path, label, patient_id, frame_index, mask_path)


def load_manifest(path: str | Path, split_tag: str | None = None) -> Manifest:
    """Parse and validate a JSON Lines manifest; record order is preserved."""
    path = Path(path)
    records: list[ImageRecord] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"invalid JSON: {exc.msg}", line_no) from None
            if not isinstance(obj, dict):
                raise ManifestError("record is not a JSON object", line_no)
            rec = _parse_record(obj, line_no)
            if rec.id in seen:
                raise DuplicateIdError(f"duplicate id {rec.id!r}", line_no)
            seen.add(rec.id)
            records.append(rec)
    if split_tag is None:
        split_tag = path.stem
    return Manifest(records=records, split_tag=split_tag)


def save_manifest(manifest: Manifest, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in manifest.records:
            fh.write(rec.to_json() + "\n")


def class_histogram(manifest: Manifest) -> dict[str, tuple[int, float]]:
    """Per-class (count, fraction of total). Fractions are 0 when empty."""
    counts = {lbl: 0 for lbl in CLASS_LABELS}
    for rec in manifest.records:
        counts[rec.label] += 1
    total = len(manifest.records)
    return {
        lbl: (n, (n / total) if total else 0.0) for lbl, n in counts.items()
    }


def _pick(records: list[ImageRecord], k: int, rng) -> list[ImageRecord]:
    # Without replacement; taking the whole list when k >= len keeps the
    # samplers idempotent on their own output.
    if k >= len(records):
        return list(records)
    idx = rng.permutation(len(records))[:k]
    chosen = set(int(i) for i in idx)
    return [r for i, r in enumerate(records) if i in chosen]


def balanced_subsample(
    manifest: Manifest, per_target: int, nt_count: int, seed: int
) -> Manifest:
    """Sample per_target records from each target class and nt_count NT records.

    Sampling is without replacement and deterministic for a fixed seed.
    Raises InsufficientClassError when any class is too small.
    """
    wanted = {lbl: per_target for lbl in TARGET_LABELS}
    wanted[NT_LABEL] = nt_count
    keep_ids: set[str] = set()
    for lbl in CLASS_LABELS:
        recs = manifest.with_label(lbl)
        k = wanted[lbl]
        if len(recs) < k:
            raise InsufficientClassError(lbl, k, len(recs))
        rng = derived_rng(seed, "balanced-subsample", label_index(lbl))
        keep_ids.update(r.id for r in _pick(recs, k, rng))
    records = [r for r in manifest.records if r.id in keep_ids]
    return Manifest(records=records, split_tag=manifest.split_tag)


def per_patient_sample(
    manifest: Manifest, frames_per_target: int, frames_per_nt: int, seed: int
) -> Manifest:
    """Keep at most N frames per (patient, label) pair, seeded per group.

    Patients with fewer frames contribute all of them. The per-group
    generator is derived from (seed, patient_id, label) so the selection
    is independent of manifest iteration order.
    """
    groups: dict[tuple[str, str], list[ImageRecord]] = {}
    for rec in manifest.records:
        groups.setdefault((rec.patient_id, rec.label), []).append(rec)

    keep_ids: set[str] = set()
    for (patient_id, label), recs in groups.items():
        k = frames_per_nt if label == NT_LABEL else frames_per_target
        recs = sorted(recs, key=lambda r: (r.frame_index, r.id))
        rng = derived_rng(
            seed,
            "per-patient",
            zlib.crc32(patient_id.encode("utf-8")),
            label_index(label),
        )
        keep_ids.update(r.id for r in _pick(recs, k, rng))
    records = [r for r in manifest.records if r.id in keep_ids]
    return Manifest(records=records, split_tag=manifest.split_tag)
