"""Minimal standalone SVG charts: sorted channel magnitudes on a log scale.

One chart per record, one polyline per transform, magnitudes sorted
descending — the flatter the curve, the easier the tensor quantizes. Pure
string assembly, no plotting dependency, deterministic output.
"""

from __future__ import annotations

import numpy as np

__all__ = ["render_channel_chart", "safe_filename"]

_WIDTH = 720
_HEIGHT = 420
_MARGIN_LEFT = 64
_MARGIN_RIGHT = 16
_MARGIN_TOP = 40
_MARGIN_BOTTOM = 44
_MAX_POINTS = 512
_FLOOR = 1e-12

_PALETTE = {
    "none": "#555555",
    "smooth": "#1f77b4",
    "rotate": "#d62728",
    "smooth-rotate": "#2ca02c",
}
_FALLBACK = ("#9467bd", "#8c564b", "#e377c2", "#7f7f7f")


def safe_filename(name: str) -> str:
    """Record name mapped to a filesystem-safe stem."""
    return "".join(c if c.isalnum() or c in "._-" else "_" for c in name)


def _decimate(values: np.ndarray) -> np.ndarray:
    if values.size <= _MAX_POINTS:
        return values
    idx = np.unique(
        np.round(np.linspace(0, values.size - 1, _MAX_POINTS)).astype(int)
    )
    return values[idx]


def render_channel_chart(title: str, series: list[tuple[str, np.ndarray]]) -> str:
    """SVG document for one record.

    Args:
        title: Chart heading (the record name).
        series: ``(label, magnitudes)`` pairs; magnitudes are plotted
            sorted descending on a log10 y-axis.
    """
    if not series:
        raise ValueError("series must be nonempty")
    prepared = []
    lo, hi = np.inf, -np.inf
    for label, magnitudes in series:
        values = np.sort(np.asarray(magnitudes, dtype=np.float64).ravel())[::-1]
        values = np.maximum(_decimate(values), _FLOOR)
        prepared.append((label, values))
        lo = min(lo, float(values.min()))
        hi = max(hi, float(values.max()))
    log_lo = np.floor(np.log10(lo))
    log_hi = np.ceil(np.log10(hi))
    if log_hi <= log_lo:
        log_hi = log_lo + 1.0

    plot_w = _WIDTH - _MARGIN_LEFT - _MARGIN_RIGHT
    plot_h = _HEIGHT - _MARGIN_TOP - _MARGIN_BOTTOM

    def x_pix(fraction: float) -> float:
        return _MARGIN_LEFT + fraction * plot_w

    def y_pix(value: float) -> float:
        frac = (np.log10(value) - log_lo) / (log_hi - log_lo)
        return _MARGIN_TOP + (1.0 - frac) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<text x="{_MARGIN_LEFT}" y="24" font-family="sans-serif" font-size="15" '
        f'font-weight="bold">{title}</text>',
        f'<text x="{_MARGIN_LEFT}" y="{_HEIGHT - 10}" font-family="sans-serif" '
        f'font-size="12">channels, sorted by magnitude (descending)</text>',
    ]
    # y-axis gridlines at integer decades
    decade = log_lo
    while decade <= log_hi:
        y = y_pix(10.0**decade)
        parts.append(
            f'<line x1="{_MARGIN_LEFT}" y1="{y:.1f}" x2="{_WIDTH - _MARGIN_RIGHT}" '
            f'y2="{y:.1f}" stroke="#dddddd" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{_MARGIN_LEFT - 8}" y="{y + 4:.1f}" font-family="sans-serif" '
            f'font-size="11" text-anchor="end">1e{int(decade)}</text>'
        )
        decade += 1.0
    parts.append(
        f'<rect x="{_MARGIN_LEFT}" y="{_MARGIN_TOP}" width="{plot_w}" height="{plot_h}" '
        f'fill="none" stroke="#333333" stroke-width="1"/>'
    )
    fallback = iter(_FALLBACK * 8)
    legend_x = _MARGIN_LEFT + 12
    for label, values in prepared:
        color = _PALETTE.get(label) or next(fallback)
        denominator = max(values.size - 1, 1)
        points = " ".join(
            f"{x_pix(i / denominator):.1f},{y_pix(v):.1f}" for i, v in enumerate(values)
        )
        parts.append(
            f'<polyline points="{points}" fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
        parts.append(
            f'<rect x="{legend_x}" y="{_MARGIN_TOP + 8}" width="12" height="4" fill="{color}"/>'
        )
        parts.append(
            f'<text x="{legend_x + 16}" y="{_MARGIN_TOP + 14}" font-family="sans-serif" '
            f'font-size="11">{label}</text>'
        )
        legend_x += 16 + 8 * len(label) + 24
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
