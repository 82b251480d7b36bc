"""Deterministic SVG loss plots from `series,epoch,loss` CSV files.

One polyline per series; when a (series, epoch) pair has replicate rows,
a shaded band shows mean +/- sample standard deviation. SVG is plain
text, so plots diff cleanly in tests.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

from .errors import DataError

WIDTH, HEIGHT = 640, 400
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 60, 150, 20, 45

_PALETTE = (
    "#1f77b4",
    "#d62728",
    "#2ca02c",
    "#ff7f0e",
    "#9467bd",
    "#8c564b",
    "#17becf",
    "#7f7f7f",
)


@dataclass
class SeriesData:
    name: str
    epochs: list[int]
    means: list[float]
    sds: list[float]  # 0.0 where a point has a single replicate
    has_band: bool


def read_loss_csv(path: str | Path) -> list[SeriesData]:
    """Parse and aggregate a loss CSV; malformed rows report line numbers."""
    groups: dict[str, dict[int, list[float]]] = {}
    order: list[str] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: empty input")
        if [h.strip().lower() for h in header[:3]] != ["series", "epoch", "loss"]:
            raise DataError(f"{path}: expected header series,epoch,loss")
        n_rows = 0
        for line_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) < 3:
                raise DataError(f"{path}: line {line_no}: short row")
            name = row[0].strip()
            try:
                epoch = int(row[1])
                loss = float(row[2])
            except ValueError:
                raise DataError(f"{path}: line {line_no}: malformed row") from None
            if not math.isfinite(loss):
                raise DataError(f"{path}: line {line_no}: non-finite loss")
            if name not in groups:
                groups[name] = {}
                order.append(name)
            groups[name].setdefault(epoch, []).append(loss)
            n_rows += 1
    if n_rows == 0:
        raise DataError(f"{path}: no data rows")

    out = []
    for name in order:
        per_epoch = groups[name]
        epochs = sorted(per_epoch)
        means, sds = [], []
        has_band = False
        for e in epochs:
            vals = per_epoch[e]
            m = sum(vals) / len(vals)
            if len(vals) > 1:
                var = sum((v - m) ** 2 for v in vals) / (len(vals) - 1)
                sds.append(math.sqrt(var))
                has_band = True
            else:
                sds.append(0.0)
            means.append(m)
        out.append(SeriesData(name, epochs, means, sds, has_band))
    return out


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    for step in (1, 2, 2.5, 5, 10):
        if raw <= step * mag:
            step = step * mag
            break
    else:
        step = 10 * mag
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-12:
        ticks.append(round(t, 10))
        t += step
    return ticks


def render_svg(series: list[SeriesData]) -> str:
    """Render aggregated series into an SVG document string."""
    all_epochs = [e for s in series for e in s.epochs]
    all_lo = [m - sd for s in series for m, sd in zip(s.means, s.sds)]
    all_hi = [m + sd for s in series for m, sd in zip(s.means, s.sds)]
    x_lo, x_hi = min(all_epochs), max(all_epochs)
    y_lo, y_hi = min(all_lo), max(all_hi)
    if x_hi == x_lo:
        x_hi = x_lo + 1
    if y_hi - y_lo < 1e-12:
        pad = max(0.5, abs(y_lo) * 0.1)
        y_lo, y_hi = y_lo - pad, y_hi + pad

    plot_w = WIDTH - MARGIN_L - MARGIN_R
    plot_h = HEIGHT - MARGIN_T - MARGIN_B

    def sx(x: float) -> float:
        return MARGIN_L + (x - x_lo) / (x_hi - x_lo) * plot_w

    def sy(y: float) -> float:
        return MARGIN_T + (y_hi - y) / (y_hi - y_lo) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{plot_w}" height="{plot_h}" '
        f'fill="none" stroke="#333" stroke-width="1"/>',
    ]
    for t in _ticks(x_lo, x_hi):
        x = sx(t)
        parts.append(
            f'<line class="tick" x1="{x:.2f}" y1="{MARGIN_T + plot_h}" '
            f'x2="{x:.2f}" y2="{MARGIN_T + plot_h + 5}" stroke="#333"/>'
        )
        parts.append(
            f'<text x="{x:.2f}" y="{MARGIN_T + plot_h + 18}" font-size="11" '
            f'text-anchor="middle">{t:g}</text>'
        )
    for t in _ticks(y_lo, y_hi):
        y = sy(t)
        parts.append(
            f'<line class="tick" x1="{MARGIN_L - 5}" y1="{y:.2f}" '
            f'x2="{MARGIN_L}" y2="{y:.2f}" stroke="#333"/>'
        )
        parts.append(
            f'<text x="{MARGIN_L - 8}" y="{y + 4:.2f}" font-size="11" '
            f'text-anchor="end">{t:g}</text>'
        )
    parts.append(
        f'<text x="{MARGIN_L + plot_w / 2:.2f}" y="{HEIGHT - 8}" font-size="12" '
        f'text-anchor="middle">epoch</text>'
    )
    parts.append(
        f'<text x="16" y="{MARGIN_T + plot_h / 2:.2f}" font-size="12" '
        f'text-anchor="middle" transform="rotate(-90 16 {MARGIN_T + plot_h / 2:.2f})">'
        f"loss</text>"
    )

    for idx, s in enumerate(series):
        color = _PALETTE[idx % len(_PALETTE)]
        if s.has_band:
            upper = [
                f"{sx(e):.2f},{sy(m + sd):.2f}"
                for e, m, sd in zip(s.epochs, s.means, s.sds)
            ]
            lower = [
                f"{sx(e):.2f},{sy(m - sd):.2f}"
                for e, m, sd in zip(reversed(s.epochs), reversed(s.means), reversed(s.sds))
            ]
            parts.append(
                f'<polygon class="band" fill="{color}" fill-opacity="0.18" '
                f'stroke="none" points="{" ".join(upper + lower)}"/>'
            )
        points = " ".join(
            f"{sx(e):.2f},{sy(m):.2f}" for e, m in zip(s.epochs, s.means)
        )
        parts.append(
            f'<polyline class="series" fill="none" stroke="{color}" '
            f'stroke-width="1.5" points="{points}"/>'
        )
        ly = MARGIN_T + 14 + 16 * idx
        lx = MARGIN_L + plot_w + 10
        parts.append(
            f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 18}" y2="{ly - 4}" '
            f'stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text class="legend" x="{lx + 23}" y="{ly}" font-size="11">{s.name}</text>'
        )

    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def plot_loss(csv_path: str | Path, out_path: str | Path) -> None:
    """CSV in, SVG out."""
    series = read_loss_csv(csv_path)
    Path(out_path).write_text(render_svg(series), encoding="utf-8")
