"""Donor/acceptor template extraction, hybrid synthesis and eligibility audit.

An image is cut-paste eligible iff `extract_templates` accepts it: the
mask survives cleanup, the filled hull passes the eccentricity gate, and
the equal-area circle lies fully inside the image. The donor is the
circular patch cut from the image; the acceptor is the image with that
circle zeroed out. Synthesis resizes a donor to the acceptor cavity,
rotates it, and hard-pastes it; the hybrid carries the donor's label.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import geometry
from .corpus import Manifest, normalize_label
from .errors import (
    DataError,
    DegenerateMaskError,
    EmptyMaskError,
    EmptyPoolError,
    Rejection,
)
from .geometry import CircleFit
from .imageio import load_gray, load_mask, quantize, save_gray
from .warp import bilinear_sample


@dataclass(frozen=True)
class QCConfig:
    max_eccentricity: float = 0.75
    min_area: int = 64
    require_circle_in_bounds: bool = True

    def __post_init__(self):
        if not 0.0 < self.max_eccentricity < 1.0:
            raise DataError(
                f"max_eccentricity must be in (0, 1), got {self.max_eccentricity}"
            )
        if self.min_area < 1:
            raise DataError(f"min_area must be >= 1, got {self.min_area}")


@dataclass
class DonorTemplate:
    source_id: str
    label: str
    patch: np.ndarray  # bounding square of the circle, zeros outside it
    circle: CircleFit  # in patch coordinates


@dataclass
class AcceptorTemplate:
    source_id: str
    source_label: str
    background: np.ndarray  # source image with the circle interior zeroed
    cavity: CircleFit  # in background coordinates


@dataclass
class HybridImage:
    image: np.ndarray
    label: str
    donor_id: str
    acceptor_id: str
    rotation_deg: float
    scale: float

    def provenance(self) -> dict:
        return {
            "donor_id": self.donor_id,
            "acceptor_id": self.acceptor_id,
            "rotation_deg": self.rotation_deg,
            "scale": self.scale,
        }


def extract_templates(
    image: np.ndarray,
    mask: np.ndarray,
    qc: QCConfig = QCConfig(),
    source_id: str = "",
    label: str = "NT",
) -> tuple[DonorTemplate, AcceptorTemplate]:
    """Split an image into donor and acceptor templates, or raise Rejection.

    The mask is cleaned (holes filled, largest component kept), its filled
    hull measured, and the equal-area circle fitted. Rejection reasons:
    empty-mask, degenerate-mask, eccentric, circle-out-of-bounds.
    """
    image = np.asarray(image)
    mask = np.asarray(mask, dtype=bool)
    if image.shape != mask.shape:
        raise DataError(
            f"image {image.shape} and mask {mask.shape} dimensions differ"
        )
    if not mask.any():
        raise Rejection(Rejection.EMPTY_MASK)

    cleaned = geometry.largest_component(geometry.fill_holes(mask))
    try:
        if int(cleaned.sum()) < qc.min_area:
            raise DegenerateMaskError("below min_area")
        region = geometry.filled_hull(cleaned)
        stats = geometry.region_stats(region)
    except (DegenerateMaskError, EmptyMaskError):
        raise Rejection(Rejection.DEGENERATE_MASK) from None
    if stats.eccentricity > qc.max_eccentricity:
        raise Rejection(Rejection.ECCENTRIC, stats.eccentricity)

    circle = geometry.region_circle(region)
    h, w = image.shape
    if qc.require_circle_in_bounds and not geometry.circle_in_bounds(circle, w, h):
        raise Rejection(Rejection.CIRCLE_OUT_OF_BOUNDS)

    circle_mask = geometry.rasterize_circle(circle, w, h)
    x0 = max(0, int(math.floor(circle.cx - circle.r)))
    x1 = min(w - 1, int(math.ceil(circle.cx + circle.r)))
    y0 = max(0, int(math.floor(circle.cy - circle.r)))
    y1 = min(h - 1, int(math.ceil(circle.cy + circle.r)))

    patch = np.where(circle_mask, image, 0)[y0 : y1 + 1, x0 : x1 + 1]
    donor = DonorTemplate(
        source_id=source_id,
        label=normalize_label(label),
        patch=patch.astype(np.uint8),
        circle=CircleFit(circle.cx - x0, circle.cy - y0, circle.r),
    )
    acceptor = AcceptorTemplate(
        source_id=source_id,
        source_label=normalize_label(label),
        background=np.where(circle_mask, 0, image).astype(np.uint8),
        cavity=circle,
    )
    return donor, acceptor


def synthesize(
    donor: DonorTemplate, acceptor: AcceptorTemplate, rotation_deg: float
) -> HybridImage:
    """Paste the donor into the acceptor cavity.

    The donor patch is scaled by cavity_r/donor_r about the donor circle
    center and rotated counterclockwise by rotation_deg about the cavity
    center, in one inverse-mapped bilinear pass. Pixels outside the cavity
    disk are bit-identical to the acceptor background.
    """
    cav = acceptor.cavity
    scale = cav.r / donor.circle.r
    out = acceptor.background.copy()
    h, w = out.shape

    region = geometry.rasterize_circle(cav, w, h)
    ys, xs = np.nonzero(region)
    if xs.size:
        u = xs - cav.cx
        v = ys - cav.cy
        theta = math.radians(rotation_deg)
        c, s = math.cos(theta), math.sin(theta)
        # Inverse of a visually-counterclockwise rotation (y axis points down).
        px = (c * u - s * v) / scale + donor.circle.cx
        py = (s * u + c * v) / scale + donor.circle.cy
        out[ys, xs] = quantize(bilinear_sample(donor.patch, px, py, cval=0.0))

    return HybridImage(
        image=out,
        label=donor.label,
        donor_id=donor.source_id,
        acceptor_id=acceptor.source_id,
        rotation_deg=float(rotation_deg),
        scale=float(scale),
    )


ROTATION_RANGE = (10.0, 350.0)


def random_hybrid(
    donors: list[DonorTemplate],
    acceptors: list[AcceptorTemplate],
    rng: np.random.Generator,
) -> HybridImage:
    """Uniform independent donor/acceptor choice (self-pairing allowed),
    rotation uniform on [10, 350] degrees."""
    if not donors:
        raise EmptyPoolError("donor pool is empty")
    if not acceptors:
        raise EmptyPoolError("acceptor pool is empty")
    donor = donors[int(rng.integers(0, len(donors)))]
    acceptor = acceptors[int(rng.integers(0, len(acceptors)))]
    rotation = float(rng.uniform(*ROTATION_RANGE))
    return synthesize(donor, acceptor, rotation)


def unique_pair_count(eligible_total: int) -> int:
    """Ordered donor x acceptor pair count (self-pairs included).

    Python integers are arbitrary precision, so the square cannot wrap.
    """
    n = int(eligible_total)
    if n < 0:
        raise DataError(f"eligible_total must be >= 0, got {eligible_total}")
    return n * n


@dataclass
class EligibilityReport:
    """Per-class eligible/total accounting (the Table-3-style audit)."""

    rows: dict[str, tuple[int, int]]  # label -> (total, eligible)
    overall: tuple[int, int]
    verdicts: dict[str, str | None] = field(default_factory=dict)

    @classmethod
    def from_counts(
        cls,
        per_class: dict[str, tuple[int, int]],
        overall: tuple[int, int] | None = None,
    ) -> "EligibilityReport":
        rows = {normalize_label(k): (int(t), int(e)) for k, (t, e) in per_class.items()}
        if overall is None:
            overall = (
                sum(t for t, _ in rows.values()),
                sum(e for _, e in rows.values()),
            )
        return cls(rows=rows, overall=(int(overall[0]), int(overall[1])))

    @staticmethod
    def _percent(total: int, eligible: int) -> float:
        return 100.0 * eligible / total if total else 0.0

    def percent(self, label: str) -> float:
        total, eligible = self.rows[normalize_label(label)]
        return self._percent(total, eligible)

    def overall_percent(self) -> float:
        return self._percent(*self.overall)

    def eligible_ids(self) -> set[str]:
        return {rid for rid, reason in self.verdicts.items() if reason is None}

    def flags(self) -> dict[str, bool]:
        return {rid: reason is None for rid, reason in self.verdicts.items()}

    def to_tsv(self, order: tuple[str, ...] | None = None) -> str:
        from .corpus import TABLE_ORDER

        order = order or TABLE_ORDER
        lines = ["view\ttotal\teligible\tpercent"]
        for lbl in order:
            if lbl not in self.rows:
                continue
            total, eligible = self.rows[lbl]
            lines.append(
                f"{lbl}\t{total}\t{eligible}\t{self._percent(total, eligible):.2f}"
            )
        lines.append(
            f"TOTAL\t{self.overall[0]}\t{self.overall[1]}\t{self.overall_percent():.2f}"
        )
        return "\n".join(lines) + "\n"


def eligibility_report(
    manifest: Manifest,
    qc: QCConfig = QCConfig(),
    root: str | Path | None = None,
) -> EligibilityReport:
    """Run template extraction over a manifest and tally eligibility.

    Image and mask paths resolve relative to `root` when given. Records
    without a mask path count as ineligible (no thorax was detected).
    I/O failures are re-raised with the offending record id.
    """
    _, report = _audit(manifest, qc, root, keep_templates=False)
    return report


@dataclass
class TemplatePool:
    """In-memory donor/acceptor pools, usually loaded from a template store."""

    donors: list[DonorTemplate] = field(default_factory=list)
    acceptors: list[AcceptorTemplate] = field(default_factory=list)

    def __post_init__(self):
        self.donors_by_id = {d.source_id: d for d in self.donors}
        self.acceptors_by_id = {a.source_id: a for a in self.acceptors}

    def donors_with_label(self, label: str) -> list[DonorTemplate]:
        canon = normalize_label(label)
        return [d for d in self.donors if d.label == canon]


def _circle_json(source_id: str, label: str, circle: CircleFit) -> str:
    return json.dumps(
        {
            "source_id": source_id,
            "label": label,
            "cx": circle.cx,
            "cy": circle.cy,
            "r": circle.r,
        },
        sort_keys=True,
    )


def save_template_store(
    store_dir: str | Path, donors: list[DonorTemplate], acceptors: list[AcceptorTemplate]
) -> None:
    """Write `<store>/donors/<id>.png|.json` and the same for acceptors."""
    store = Path(store_dir)
    donor_dir = store / "donors"
    acceptor_dir = store / "acceptors"
    donor_dir.mkdir(parents=True, exist_ok=True)
    acceptor_dir.mkdir(parents=True, exist_ok=True)
    for d in donors:
        save_gray(donor_dir / f"{d.source_id}.png", d.patch)
        (donor_dir / f"{d.source_id}.json").write_text(
            _circle_json(d.source_id, d.label, d.circle) + "\n"
        )
    for a in acceptors:
        save_gray(acceptor_dir / f"{a.source_id}.png", a.background)
        (acceptor_dir / f"{a.source_id}.json").write_text(
            _circle_json(a.source_id, a.source_label, a.cavity) + "\n"
        )


def load_template_store(store_dir: str | Path) -> TemplatePool:
    store = Path(store_dir)
    donors: list[DonorTemplate] = []
    acceptors: list[AcceptorTemplate] = []
    for meta_path in sorted((store / "donors").glob("*.json")):
        meta = json.loads(meta_path.read_text())
        patch = load_gray(meta_path.with_suffix(".png"))
        donors.append(
            DonorTemplate(
                source_id=meta["source_id"],
                label=normalize_label(meta["label"]),
                patch=patch,
                circle=CircleFit(meta["cx"], meta["cy"], meta["r"]),
            )
        )
    for meta_path in sorted((store / "acceptors").glob("*.json")):
        meta = json.loads(meta_path.read_text())
        background = load_gray(meta_path.with_suffix(".png"))
        acceptors.append(
            AcceptorTemplate(
                source_id=meta["source_id"],
                source_label=normalize_label(meta["label"]),
                background=background,
                cavity=CircleFit(meta["cx"], meta["cy"], meta["r"]),
            )
        )
    return TemplatePool(donors=donors, acceptors=acceptors)


def extract_manifest_templates(
    manifest: Manifest,
    qc: QCConfig = QCConfig(),
    root: str | Path | None = None,
) -> tuple[TemplatePool, EligibilityReport]:
    """Extract templates for every eligible record of a manifest."""
    return _audit(manifest, qc, root, keep_templates=True)


def _audit(
    manifest: Manifest,
    qc: QCConfig,
    root: str | Path | None,
    keep_templates: bool,
) -> tuple[TemplatePool, EligibilityReport]:
    donors: list[DonorTemplate] = []
    acceptors: list[AcceptorTemplate] = []
    rows: dict[str, list[int]] = {}
    verdicts: dict[str, str | None] = {}
    for rec in manifest.records:
        rows.setdefault(rec.label, [0, 0])
        rows[rec.label][0] += 1
        if rec.mask_path is None:
            verdicts[rec.id] = Rejection.EMPTY_MASK
            continue
        img_path = Path(root, rec.path) if root else Path(rec.path)
        mask_path = Path(root, rec.mask_path) if root else Path(rec.mask_path)
        try:
            image = load_gray(img_path)
            mask = load_mask(mask_path)
        except OSError as exc:
            raise OSError(f"record {rec.id!r}: {exc}") from exc
        try:
            donor, acceptor = extract_templates(
                image, mask, qc, source_id=rec.id, label=rec.label
            )
        except Rejection as rej:
            verdicts[rec.id] = rej.reason
            continue
        verdicts[rec.id] = None
        rows[rec.label][1] += 1
        if keep_templates:
            donors.append(donor)
            acceptors.append(acceptor)
    report = EligibilityReport.from_counts(
        {lbl: (t, e) for lbl, (t, e) in rows.items()}
    )
    report.verdicts = verdicts
    return TemplatePool(donors=donors, acceptors=acceptors), report
