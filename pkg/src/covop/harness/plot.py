"""Static SVG error-curve plots, written by hand (no plotting backend).

One panel per (kernel family, alpha). Each estimator/policy pair is a mean
polyline over log10(lambda) with a shaded 95% band; the sample size N is a
dotted series against a right-hand axis. Coordinates are printed with fixed
precision so equal inputs give equal bytes.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

from .results import AggregateRow

__all__ = ["emit_plot", "render_svg"]

PANEL_W, PANEL_H = 420, 360
PLOT_H = 200
MARGIN_L, MARGIN_R, MARGIN_T = 60, 60, 40

STYLES = {
    ("Sample", "None"): ("#1f4fd6", "6,4"),
    ("Universal", "Theory"): ("#d62728", None),
    ("Universal", "GridBest"): ("#e377c2", None),
    ("AdaptiveSample", "Theory"): ("#000000", None),
    ("AdaptiveSample", "GridBest"): ("#000000", "2,2"),
    ("AdaptiveWick", "Theory"): ("#7b2fa8", None),
    ("AdaptiveWick", "GridBest"): ("#7b2fa8", "2,2"),
}
N_COLOR = "#2ca02c"


def _f(v: float) -> str:
    return f"{v:.2f}"


def _nice_max(v: float) -> float:
    if not v > 0 or not math.isfinite(v):
        return 1.0
    mag = 10 ** math.floor(math.log10(v))
    for step in (1, 2, 2.5, 5, 10):
        if step * mag >= v:
            return step * mag
    return 10 * mag


def _panel(rows: list[AggregateRow], title: str, ox: float) -> list[str]:
    xs = [math.log10(r.lambda_) for r in rows]
    x0, x1 = min(xs), max(xs)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    finite = [r.ci_high for r in rows if math.isfinite(r.ci_high)]
    ymax = _nice_max(max(finite) if finite else 1.0)
    nmax = _nice_max(max(r.N for r in rows))
    w = PANEL_W - MARGIN_L - MARGIN_R
    h = PLOT_H

    def px(x):
        return ox + MARGIN_L + (x - x0) / (x1 - x0) * w

    def py(y, top=ymax):
        return MARGIN_T + h - min(y, top) / top * h

    out = ['<g class="panel">']
    out.append(f'<text x="{_f(ox + MARGIN_L + w / 2)}" y="20" text-anchor="middle" font-size="13">{escape(title)}</text>')
    out.append(
        f'<rect x="{_f(ox + MARGIN_L)}" y="{MARGIN_T}" width="{_f(w)}" height="{_f(h)}" '
        'fill="none" stroke="#444" stroke-width="1"/>'
    )
    for k in range(5):
        y = ymax * k / 4
        out.append(f'<text x="{_f(ox + MARGIN_L - 6)}" y="{_f(py(y) + 4)}" text-anchor="end" font-size="10">{y:.3g}</text>')
        n = nmax * k / 4
        out.append(f'<text x="{_f(ox + MARGIN_L + w + 6)}" y="{_f(py(y) + 4)}" font-size="10" fill="{N_COLOR}">{n:.3g}</text>')
    for e in range(math.ceil(x0 - 1e-9), math.floor(x1 + 1e-9) + 1):
        out.append(
            f'<text x="{_f(px(e))}" y="{_f(MARGIN_T + h + 14)}" text-anchor="middle" font-size="10">1e{e}</text>'
        )
    out.append(
        f'<text x="{_f(ox + MARGIN_L + w / 2)}" y="{_f(MARGIN_T + h + 30)}" text-anchor="middle" font-size="11">'
        "lengthscale (log scale)</text>"
    )

    series: dict[tuple[str, str], list[AggregateRow]] = {}
    for r in rows:
        series.setdefault((r.estimator, r.radius_policy), []).append(r)
    legend_y = MARGIN_T + h + 46
    for i, (key, rs) in enumerate(sorted(series.items())):
        rs = sorted(rs, key=lambda r: r.lambda_)
        rs = [r for r in rs if all(math.isfinite(v) for v in (r.mean_rel_error, r.ci_low, r.ci_high))]
        color, dash = STYLES.get(key, ("#888888", None))
        label = f"{key[0]} ({key[1]})" if key[1] != "None" else key[0]
        if not rs:
            continue
        upper = [f"{_f(px(math.log10(r.lambda_)))},{_f(py(r.ci_high))}" for r in rs]
        lower = [f"{_f(px(math.log10(r.lambda_)))},{_f(py(r.ci_low))}" for r in reversed(rs)]
        out.append(f'<polygon class="ci" points="{" ".join(upper + lower)}" fill="{color}" fill-opacity="0.15" stroke="none"/>')
        pts = " ".join(f"{_f(px(math.log10(r.lambda_)))},{_f(py(r.mean_rel_error))}" for r in rs)
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        out.append(
            f'<polyline class="mean" data-series="{escape(label)}" points="{pts}" fill="none" '
            f'stroke="{color}" stroke-width="1.5"{dash_attr}/>'
        )
        lx = ox + MARGIN_L + (i % 2) * (w / 2)
        ly = legend_y + (i // 2) * 14
        out.append(f'<line x1="{_f(lx)}" y1="{_f(ly)}" x2="{_f(lx + 18)}" y2="{_f(ly)}" stroke="{color}" stroke-width="2"{dash_attr}/>')
        out.append(f'<text x="{_f(lx + 22)}" y="{_f(ly + 4)}" font-size="10">{escape(label)}</text>')

    by_lam = sorted({(r.lambda_, r.N) for r in rows})
    npts = " ".join(f"{_f(px(math.log10(lam)))},{_f(py(n, nmax))}" for lam, n in by_lam)
    out.append(
        f'<polyline class="n-series" points="{npts}" fill="none" stroke="{N_COLOR}" '
        'stroke-width="1.2" stroke-dasharray="1,3"/>'
    )
    out.append("</g>")
    return out


def render_svg(aggregates: Sequence[AggregateRow]) -> str:
    if not aggregates:
        raise ValueError("nothing to plot: no aggregate rows")
    panels: dict[tuple[str, float], list[AggregateRow]] = {}
    for r in aggregates:
        panels.setdefault((r.kernel_family, r.alpha), []).append(r)
    width = PANEL_W * len(panels)
    height = PANEL_H
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif">',
        f'<rect width="{width}" height="{height}" fill="#ffffff"/>',
    ]
    for i, ((family, alpha), rows) in enumerate(sorted(panels.items())):
        title = f"{family}, unweighted" if alpha == 0 else f"{family}, alpha={alpha:g}"
        parts.extend(_panel(rows, title, i * PANEL_W))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_plot(aggregates: Sequence[AggregateRow], path) -> Path:
    path = Path(path)
    try:
        path.write_text(render_svg(aggregates))
    except OSError as exc:
        raise OSError(f"cannot write SVG to {path}: {exc}") from exc
    return path
