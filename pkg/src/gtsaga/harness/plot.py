"""Semilog convergence plots written as plain SVG.

Each (trace, metric, x-axis) combination becomes exactly one ``<polyline>``,
which keeps the output easy to check without rasterising it.
"""

from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from ..errors import PlotError
from ..trace import Trace

DEFAULT_SERIES = ("opt_gap_sq", "consensus_sq")
DEFAULT_X = ("k", "grad_evals")
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")

PANEL_W, PANEL_H = 420, 300
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 20, 30, 50


def _log_range(values: np.ndarray) -> tuple[float, float]:
    pos = values[values > 0]
    if pos.size == 0:
        return -1.0, 1.0
    lo, hi = math.floor(math.log10(pos.min())), math.ceil(math.log10(pos.max()))
    return (lo - 1.0, hi + 1.0) if lo == hi else (float(lo), float(hi))


def _panel(x_name: str, curves: list, ox: float) -> list[str]:
    """``curves``: (label, colour, dash, x array, y array)."""
    xs = np.concatenate([c[3] for c in curves])
    ys = np.concatenate([c[4] for c in curves])
    x_lo, x_hi = float(xs.min()), float(xs.max())
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    y_lo, y_hi = _log_range(ys)
    w = PANEL_W - MARGIN_L - MARGIN_R
    h = PANEL_H - MARGIN_T - MARGIN_B
    left, top = ox + MARGIN_L, MARGIN_T

    def px(x):
        return left + (x - x_lo) / (x_hi - x_lo) * w

    def py(y):
        return top + h - (math.log10(y) - y_lo) / (y_hi - y_lo) * h

    out = [f'<rect x="{left}" y="{top}" width="{w}" height="{h}" fill="none" stroke="#444"/>']
    for e in range(int(y_lo), int(y_hi) + 1):
        yy = py(10.0**e)
        out.append(f'<line x1="{left}" y1="{yy:.2f}" x2="{left + w}" y2="{yy:.2f}" stroke="#ddd"/>')
        out.append(f'<text x="{left - 6}" y="{yy + 4:.2f}" font-size="10" text-anchor="end">1e{e}</text>')
    for frac in (0.0, 0.5, 1.0):
        xv = x_lo + frac * (x_hi - x_lo)
        out.append(f'<text x="{px(xv):.2f}" y="{top + h + 16}" font-size="10" text-anchor="middle">{xv:.4g}</text>')
    out.append(f'<text x="{left + w / 2}" y="{PANEL_H - 12}" font-size="12" text-anchor="middle">{escape(x_name)}</text>')
    for label, colour, dash, x, y in curves:
        keep = y > 0
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x[keep], y[keep]))
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        out.append(
            f'<polyline data-series="{escape(label)}" fill="none" stroke="{colour}" stroke-width="1.5"{dash_attr} points="{pts}"/>'
        )
    return out


def render_svg(traces: list, series=DEFAULT_SERIES, x_axes=DEFAULT_X) -> str:
    """``traces`` is a list of ``(label, Trace)``; returns the SVG document."""
    if not traces:
        raise PlotError("no traces to plot")
    for label, tr in traces:
        if len(tr) == 0:
            raise PlotError(f"trace {label!r} has no rows")
    for name in (*series, *x_axes):
        if name not in ("k", "consensus_sq", "opt_gap_sq", "staleness", "tracking_sq", "grad_evals"):
            raise PlotError(f"unknown trace column {name!r}")
    width = PANEL_W * len(x_axes)
    body = []
    for p_idx, x_name in enumerate(x_axes):
        curves = []
        for t_idx, (label, tr) in enumerate(traces):
            x = tr.column(x_name).astype(float)
            order = np.argsort(x, kind="stable")
            for s_idx, name in enumerate(series):
                y = tr.column(name).astype(float)
                colour = PALETTE[t_idx % len(PALETTE)]
                dash = "" if s_idx == 0 else "5,3" if s_idx == 1 else "1,3"
                curves.append((f"{label}:{name}", colour, dash, x[order], y[order]))
        body += _panel(x_name, curves, p_idx * PANEL_W)
    legend_y = PANEL_H + 14
    legend = []
    for i, (label, _) in enumerate(traces):
        legend.append(
            f'<text x="{10 + 160 * (i % max(1, width // 160))}" y="{legend_y + 14 * (i // max(1, width // 160))}" '
            f'font-size="10" fill="{PALETTE[i % len(PALETTE)]}">{escape(label)}</text>'
        )
    styles = ", ".join(f"{name} ({'solid' if i == 0 else 'dashed' if i == 1 else 'dotted'})" for i, name in enumerate(series))
    height = legend_y + 14 * (1 + (len(traces) - 1) // max(1, width // 160)) + 16
    return "\n".join(
        [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
            '<rect width="100%" height="100%" fill="white"/>',
            f'<text x="10" y="18" font-size="12">{escape(styles)}; log scale</text>',
            *body,
            *legend,
            "</svg>",
            "",
        ]
    )


def emit_plot(trace_files, out_path, series=DEFAULT_SERIES, x_axes=DEFAULT_X) -> Path:
    paths = sorted(str(p) for p in trace_files)
    if not paths:
        raise PlotError("no trace files matched")
    traces = []
    for p in paths:
        try:
            traces.append((Path(p).stem, Trace.read_csv(p)))
        except (OSError, ValueError) as exc:
            raise PlotError(f"cannot read trace {p}: {exc}") from exc
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(render_svg(traces, series, x_axes))
    return out
