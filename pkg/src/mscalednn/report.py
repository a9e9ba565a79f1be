"""Per-epoch metric records, CSV files and SVG loss plots."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from xml.sax.saxutils import escape

CSV_HEADER = ("epoch", "lr", "train_loss", "test_loss", "mse_true", "wall_ms")


@dataclass
class Row:
    epoch: int
    lr: float
    train_loss: float | None = None
    test_loss: float | None = None
    mse_true: float | None = None
    wall_ms: float | None = None


@dataclass
class RunRecord:
    label: str
    rows: list[Row] = field(default_factory=list)

    def column(self, name: str) -> tuple[list[int], list[float]]:
        xs, ys = [], []
        for r in self.rows:
            v = getattr(r, name)
            if v is not None:
                xs.append(r.epoch)
                ys.append(v)
        return xs, ys

    def last(self, name: str) -> float | None:
        for r in reversed(self.rows):
            v = getattr(r, name)
            if v is not None:
                return v
        return None


def _fmt(v) -> str:
    if v is None:
        return ""
    return format(float(v), ".9g")


def format_csv(record: RunRecord) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in record.rows:
        w.writerow([str(r.epoch)] + [_fmt(getattr(r, k)) for k in CSV_HEADER[1:]])
    return buf.getvalue()


def emit_csv(record: RunRecord, path) -> None:
    """Write ``record`` with 9 significant digits, LF line endings, blanks for n/a."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_csv(record))


def parse_csv(text: str, label: str = "") -> RunRecord:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != CSV_HEADER:
        raise ValueError(f"unexpected CSV header {header!r}")
    rows = []
    for cells in reader:
        if not cells:
            continue
        vals = [float(c) if c != "" else None for c in cells[1:]]
        rows.append(Row(int(cells[0]), *vals))
    return RunRecord(label, rows)


def read_csv(path) -> RunRecord:
    p = Path(path)
    return parse_csv(p.read_text(encoding="utf-8"), label=p.stem)


# -- SVG -----------------------------------------------------------------------

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf")
_W, _H = 720, 460
_L, _R, _T, _B = 80, 170, 30, 55


def _series(record: RunRecord):
    """(suffix, xs, ys, dashed) for every metric present in the record."""
    out = []
    for name, suffix, dashed in (("train_loss", "train", False), ("test_loss", "test", True), ("mse_true", "", False)):
        xs, ys = record.column(name)
        pts = [(x, y) for x, y in zip(xs, ys) if y > 0 and math.isfinite(y)]
        if pts:
            out.append((suffix, pts, dashed))
    # a PDE record plots its error against the truth, not the raw loss
    if any(s[0] == "" for s in out):
        out = [s for s in out if s[0] == ""]
    return out


def emit_svg_plot(records: list[RunRecord], path, title: str = "", ylabel: str = "loss") -> None:
    """Loss-vs-epoch line plot with a log ordinate.

    One polyline per plotted metric; training curves are solid and test
    curves dashed, one color per record.
    """
    if not records or not any(r.rows for r in records):
        raise ValueError("nothing to plot")
    curves = []
    for i, rec in enumerate(records):
        color = _COLORS[i % len(_COLORS)]
        for suffix, pts, dashed in _series(rec):
            label = f"{rec.label} {suffix}".strip()
            curves.append((label, pts, dashed, color))
    if not curves:
        raise ValueError("records contain no positive finite values to plot")

    xs = [x for _, pts, _, _ in curves for x, _ in pts]
    ys = [y for _, pts, _, _ in curves for _, y in pts]
    x0, x1 = min(xs), max(xs)
    if x1 == x0:
        x1 = x0 + 1
    e0 = math.floor(math.log10(min(ys)))
    e1 = math.ceil(math.log10(max(ys)))
    if e1 == e0:
        e1 = e0 + 1
    pw, ph = _W - _L - _R, _H - _T - _B

    def px(x):
        return _L + (x - x0) / (x1 - x0) * pw

    def py(y):
        return _T + (e1 - math.log10(y)) / (e1 - e0) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">',
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
    ]
    if title:
        parts.append(f'<text x="{_L + pw / 2:.1f}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>')
    for e in range(e0, e1 + 1):
        y = py(10.0**e)
        parts.append(f'<line x1="{_L}" y1="{y:.2f}" x2="{_L + pw}" y2="{y:.2f}" stroke="#ddd"/>')
        parts.append(f'<text x="{_L - 6}" y="{y + 4:.2f}" text-anchor="end" font-size="11">1e{e}</text>')
    for k in range(6):
        xv = x0 + (x1 - x0) * k / 5
        parts.append(f'<text x="{px(xv):.2f}" y="{_T + ph + 18}" text-anchor="middle" font-size="11">{xv:.0f}</text>')
    parts.append(f'<rect x="{_L}" y="{_T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    parts.append(f'<text x="{_L + pw / 2:.1f}" y="{_H - 12}" text-anchor="middle" font-size="12">epoch</text>')
    parts.append(
        f'<text x="18" y="{_T + ph / 2:.1f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 18 {_T + ph / 2:.1f})">{escape(ylabel)}</text>'
    )

    for i, (label, pts, dashed, color) in enumerate(curves):
        coords = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in pts)
        dash = ' stroke-dasharray="6,4"' if dashed else ""
        parts.append(
            f'<polyline data-label="{escape(label)}" fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{coords}"/>'
        )
        ly = _T + 14 + 18 * i
        lx = _L + pw + 12
        parts.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 24}" y2="{ly}" stroke="{color}" stroke-width="1.5"{dash}/>')
        parts.append(f'<text class="legend" x="{lx + 30}" y="{ly + 4}" font-size="12">{escape(label)}</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(parts) + "\n")
