"""CSV and SVG artifacts for sweep results."""

from __future__ import annotations

import csv
import dataclasses
import io
import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from ..errors import FrlabError
from .sweep import BoundRow, SweepResult, SweepRow

CSV_HEADER = (
    "design,gamma,K,n,p,replicate,estimator,risk,excess_vs_oracle,excess_vs_star,"
    "null_risk,interp_residual,coef_norm_sq,converged"
)
BOUNDS_HEADER = "gamma,K,n,p,bound_name,value,conditions_json"


def format_real(x: float) -> str:
    """17 significant digits: enough to round-trip any double exactly."""
    return format(float(x), ".17g")


def _cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format_real(value)
    return str(value)


def _render(header: str, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header.split(","))
    for row in rows:
        writer.writerow([_cell(v) for v in dataclasses.astuple(row)])
    return buf.getvalue()


def _write(path, text: str) -> None:
    path = Path(path)
    try:
        path.write_text(text, encoding="utf-8", newline="")
    except OSError as exc:
        raise FrlabError(f"cannot write {path}: {exc.strerror}") from exc


def emit_csv(result: SweepResult, path) -> None:
    _write(path, _render(CSV_HEADER, sorted(result.rows, key=SweepRow.sort_key)))


def emit_bounds_csv(rows: list[BoundRow], path) -> None:
    _write(path, _render(BOUNDS_HEADER, sorted(rows, key=BoundRow.sort_key)))


def read_csv(path) -> list[SweepRow]:
    """Parse a file written by :func:`emit_csv` back into rows."""
    kinds = {f.name: f.type for f in dataclasses.fields(SweepRow)}
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        for rec in csv.DictReader(fh):
            vals = {}
            for name, kind in kinds.items():
                raw = rec[name]
                if kind in ("float", float):
                    vals[name] = float(raw)
                elif kind in ("int", int):
                    vals[name] = int(raw)
                elif kind in ("bool", bool):
                    vals[name] = raw == "true"
                else:
                    vals[name] = raw
            out.append(SweepRow(**vals))
    return out


# --------------------------------------------------------------------------
# SVG
# --------------------------------------------------------------------------

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")
LOG_FLOOR = 1e-12


@dataclasses.dataclass(frozen=True)
class PlotOptions:
    log_y: bool = True
    per_estimator_series: bool = True
    gamma_axis: str = "log"  # "log" or "linear"
    column: str = "excess_vs_oracle"
    title: str = ""
    width: int = 720
    height: int = 480


def series_stats(result: SweepResult, column: str = "excess_vs_oracle") -> dict[str, list[tuple[float, float, float]]]:
    """Per estimator: sorted ``(gamma, mean, standard error)`` over finite rows."""
    groups: dict[str, dict[float, list[float]]] = {}
    for r in result.rows:
        v = getattr(r, column)
        if math.isfinite(v):
            groups.setdefault(r.estimator, {}).setdefault(r.gamma, []).append(v)
    out = {}
    for est in sorted(groups):
        pts = []
        for g in sorted(groups[est]):
            vals = np.asarray(groups[est][g])
            se = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else 0.0
            pts.append((g, float(vals.mean()), se))
        out[est] = pts
    return out


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def emit_svg_plot(result: SweepResult, path, options: PlotOptions = PlotOptions()) -> None:
    """Mean excess risk against gamma with +-1 SE whiskers, one series per estimator."""
    stats = series_stats(result, options.column)
    if not stats:
        raise FrlabError("cannot plot an empty result")
    if not options.per_estimator_series:
        pooled: dict[float, list[float]] = {}
        for pts in stats.values():
            for g, m, _ in pts:
                pooled.setdefault(g, []).append(m)
        stats = {"all": [(g, float(np.mean(v)), 0.0) for g, v in sorted(pooled.items())]}

    clamped = False

    def ty(v: float) -> float:
        nonlocal clamped
        if not options.log_y:
            return v
        if v <= LOG_FLOOR:
            clamped = True
            return math.log10(LOG_FLOOR)
        return math.log10(v)

    def tx(g: float) -> float:
        return math.log10(g) if options.gamma_axis == "log" else g

    xs = [tx(g) for pts in stats.values() for g, _, _ in pts]
    ys = [ty(v) for pts in stats.values() for _, m, se in pts for v in (m - se, m, m + se)]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5

    w, h = options.width, options.height
    left, right, top, bottom = 70, 150, 30, 50
    pw, ph = w - left - right, h - top - bottom

    def px(x):
        return left + (x - x0) / (x1 - x0) * pw

    def py(y):
        return top + (1 - (y - y0) / (y1 - y0)) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">',
        f'<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    if options.title:
        parts.append(f'<text x="{w / 2:.2f}" y="18" text-anchor="middle" font-size="14">{escape(options.title)}</text>')
    for t in np.linspace(x0, x1, 5):
        label = f"{10 ** t:.3g}" if options.gamma_axis == "log" else f"{t:.3g}"
        parts.append(f'<text x="{_fmt(px(t))}" y="{h - bottom + 18}" text-anchor="middle" font-size="11">{label}</text>')
    for t in np.linspace(y0, y1, 5):
        label = f"{10 ** t:.3g}" if options.log_y else f"{t:.3g}"
        parts.append(f'<text x="{left - 6}" y="{_fmt(py(t) + 4)}" text-anchor="end" font-size="11">{label}</text>')
    parts.append(f'<text x="{left + pw / 2:.2f}" y="{h - 10}" text-anchor="middle" font-size="12">gamma = p/n</text>')
    y_label = escape(options.column) + (" (log scale)" if options.log_y else "")
    parts.append(
        f'<text x="16" y="{top + ph / 2:.2f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 16 {top + ph / 2:.2f})">{y_label}</text>'
    )

    for idx, (est, pts) in enumerate(stats.items()):
        color = PALETTE[idx % len(PALETTE)]
        coords = [(px(tx(g)), py(ty(m))) for g, m, _ in pts]
        if len(coords) > 1:
            path_d = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in coords)
            parts.append(f'<polyline points="{path_d}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        for (g, m, se), (cx, cy) in zip(pts, coords):
            if se > 0:
                lo, hi = py(ty(m - se)), py(ty(m + se))
                parts.append(f'<line x1="{_fmt(cx)}" y1="{_fmt(lo)}" x2="{_fmt(cx)}" y2="{_fmt(hi)}" stroke="{color}"/>')
            parts.append(f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="3" fill="{color}"/>')
        ly = top + 16 + 18 * idx
        parts.append(f'<line x1="{w - right + 10}" y1="{ly}" x2="{w - right + 30}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{w - right + 35}" y="{ly + 4}" font-size="12">{escape(est)}</text>')
    if clamped:
        parts.append(
            f'<text x="{left + 6}" y="{top + ph - 6}" font-size="11" fill="#555">'
            f"values at or below {LOG_FLOOR:g} clamped to {LOG_FLOOR:g}</text>"
        )
    parts.append("</svg>")
    _write(path, "\n".join(parts) + "\n")
