"""Minimal deterministic SVG line plots."""
from pathlib import Path

import numpy as np

from .. import spectral
from ..errors import IoError

WIDTH, HEIGHT = 640, 400
MARGIN = 50
PALETTE = ("#1f4fbf", "#2a9d8f", "#8a5cc7", "#e9a03b", "#555555")
REFERENCE_COLOUR = "#d62728"


def _fmt(v):
    return f"{v:.2f}"


def _ticks(lo, hi, count=5):
    return np.linspace(lo, hi, count)


def emit_svg(curves, path=None, reference_density=False, markers=None, title="",
             xlabel="E", ylabel="density"):
    """Render ``(label, x, y)`` curves as polylines sharing one x-grid.

    Parameters
    ----------
    curves : list of (str, array_like, array_like)
    reference_density : bool
        Overlay the semicircle density on the shared grid.
    markers : array_like, optional
        x positions drawn as short grey bars on the axis (eigenvalues).

    Returns
    -------
    str
        The SVG document; also written to ``path`` when given.
    """
    series = [(str(lbl), np.asarray(x, float), np.asarray(y, float)) for lbl, x, y in curves]
    if reference_density and series:
        x = series[0][1]
        series.append(("semicircle", x, spectral.semicircle_density(x)))
    if series:
        xs = np.concatenate([s[1] for s in series])
        ys = np.concatenate([s[2] for s in series])
        x0, x1 = float(xs.min()), float(xs.max())
        y0, y1 = min(0.0, float(ys.min())), float(ys.max())
    else:
        x0, x1, y0, y1 = 0.0, 1.0, 0.0, 1.0
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    pw, ph = WIDTH - 2 * MARGIN, HEIGHT - 2 * MARGIN

    def px(x):
        return MARGIN + (x - x0) / (x1 - x0) * pw

    def py(y):
        return HEIGHT - MARGIN - (y - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}">',
           f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>']
    if title:
        out.append(f'<text x="{WIDTH // 2}" y="20" text-anchor="middle" font-size="14">{title}</text>')
    base = HEIGHT - MARGIN
    out.append(f'<line x1="{MARGIN}" y1="{base}" x2="{WIDTH - MARGIN}" y2="{base}" stroke="black"/>')
    out.append(f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{base}" stroke="black"/>')
    for t in _ticks(x0, x1):
        out.append(f'<text x="{_fmt(px(t))}" y="{base + 16}" text-anchor="middle" font-size="10">{t:.3g}</text>')
    for t in _ticks(y0, y1):
        out.append(f'<text x="{MARGIN - 6}" y="{_fmt(py(t) + 3)}" text-anchor="end" font-size="10">{t:.3g}</text>')
    out.append(f'<text x="{WIDTH // 2}" y="{HEIGHT - 12}" text-anchor="middle" font-size="12">{xlabel}</text>')
    out.append(f'<text x="14" y="{HEIGHT // 2}" font-size="12" transform="rotate(-90 14 {HEIGHT // 2})" '
               f'text-anchor="middle">{ylabel}</text>')
    if markers is not None:
        for m in np.asarray(markers, float):
            if x0 <= m <= x1:
                out.append(f'<line x1="{_fmt(px(m))}" y1="{base}" x2="{_fmt(px(m))}" y2="{base - 8}" '
                           f'stroke="#999999"/>')
    for k, (label, x, y) in enumerate(series):
        colour = REFERENCE_COLOUR if label == "semicircle" else PALETTE[k % len(PALETTE)]
        pts = " ".join(f"{_fmt(px(a))},{_fmt(py(b))}" for a, b in zip(x, y))
        out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{pts}"/>')
        ly = MARGIN + 14 * k
        out.append(f'<line x1="{WIDTH - MARGIN - 120}" y1="{ly}" x2="{WIDTH - MARGIN - 100}" y2="{ly}" '
                   f'stroke="{colour}" stroke-width="2"/>')
        out.append(f'<text x="{WIDTH - MARGIN - 95}" y="{ly + 4}" font-size="11">{label}</text>')
    out.append("</svg>")
    text = "\n".join(out) + "\n"
    if path is not None:
        try:
            Path(path).write_text(text)
        except OSError as exc:
            raise IoError(f"cannot write {path}: {exc}") from None
    return text
