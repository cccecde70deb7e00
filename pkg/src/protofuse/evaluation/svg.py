"""A tiny SVG writer for grouped histograms, enough to inspect gate
distributions without a plotting dependency."""

from __future__ import annotations

from html import escape
from pathlib import Path

import numpy as np

PALETTE = ("#d1495b", "#00798c", "#edae49", "#30638e")


def histogram_panel_svg(panels, bins=20, value_range=(0.0, 1.0), width=320, height=180,
                        title="") -> str:
    """``panels`` is a list of (panel title, {series name: values}). Each
    panel draws normalized histograms of its series as overlaid step lines."""
    pad, gap = 34, 16
    cols = len(panels)
    total_w = cols * width + (cols + 1) * gap
    total_h = height + 2 * gap + 24
    edges = np.linspace(value_range[0], value_range[1], bins + 1)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{total_w}" height="{total_h}" '
        f'font-family="sans-serif" font-size="11">',
        f'<text x="{gap}" y="16" font-size="13">{escape(title)}</text>',
    ]
    for col, (name, series) in enumerate(panels):
        x0 = gap + col * (width + gap)
        y0 = 24 + gap
        pw, ph = width - pad, height - pad
        out.append(f'<g transform="translate({x0},{y0})">')
        out.append(f'<text x="{pad}" y="-4">{escape(name)}</text>')
        out.append(f'<rect x="{pad}" y="0" width="{pw}" height="{ph}" fill="none" stroke="#888"/>')
        hists = {}
        for label, values in series.items():
            values = np.asarray(values, dtype=np.float64)
            counts, _ = np.histogram(values, bins=edges)
            hists[label] = counts / max(len(values), 1)
        peak = max([h.max() for h in hists.values() if h.size] + [1e-12])
        for i, (label, h) in enumerate(hists.items()):
            colour = PALETTE[i % len(PALETTE)]
            pts = []
            for b, v in enumerate(h):
                xa = pad + pw * b / bins
                xb = pad + pw * (b + 1) / bins
                y = ph - ph * v / peak
                pts += [f"{xa:.1f},{y:.1f}", f"{xb:.1f},{y:.1f}"]
            out.append(f'<polyline points="{" ".join(pts)}" fill="none" stroke="{colour}" stroke-width="1.5"/>')
            out.append(f'<text x="{pad + 4}" y="{12 + 12 * i}" fill="{colour}">{escape(label)}</text>')
        for frac in (0.0, 0.5, 1.0):
            v = value_range[0] + frac * (value_range[1] - value_range[0])
            out.append(f'<text x="{pad + pw * frac - 6:.1f}" y="{ph + 14}">{v:g}</text>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out)


def write_svg(path, svg: str) -> Path:
    path = Path(path)
    path.write_text(svg)
    return path
