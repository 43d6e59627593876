"""Hand-written SVG 1.1 rendering of excitation-spectrum regions.

The drawing uses data coordinates directly: the ``viewBox`` spans the
displayed momentum range horizontally and the energy range vertically, with
energy pointing up (``y = -energy``).  The filled set is a list of ``rect``
elements, one per vertical run of member cells; curves are ``path`` elements,
dotted curves carry a ``stroke-dasharray``.
"""
from __future__ import annotations

from typing import Optional
from xml.sax.saxutils import escape

import numpy as np

from .quasispectrum import SpectrumRegion

__all__ = ["region_svg", "write_region_svg"]


def _num(x: float) -> str:
    s = f"{float(x):.9g}"
    return "0" if s in ("-0", "0") else s


def _runs(mask: np.ndarray):
    """Start/stop index pairs of consecutive ``True`` entries."""
    padded = np.concatenate([[False], mask, [False]]).astype(np.int8)
    edges = np.flatnonzero(np.diff(padded))
    return list(zip(edges[::2], edges[1::2]))


def region_svg(region: SpectrumRegion, momentum_range: Optional[tuple] = None,
               width: int = 640, height: int = 400) -> str:
    """Render ``region`` as an SVG document string.

    Parameters
    ----------
    momentum_range : (kmin, kmax), optional
        Displayed momentum interval; defaults to the full axis.  Columns
        outside the interval are omitted.
    """
    k = region.momenta
    e = region.energy_axis
    dk = float(k[1] - k[0]) if len(k) > 1 else 1.0
    de = float(e[1] - e[0])
    kmin, kmax = momentum_range if momentum_range else (k[0], k[-1])
    kmin, kmax = float(kmin) - 0.5 * dk, float(kmax) + 0.5 * dk
    emax = float(e[-1]) + 0.5 * de
    emin = -0.5 * de
    shown = (k >= kmin) & (k <= kmax)
    stroke = 0.004 * max(kmax - kmin, emax - emin)

    out = [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        '<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{width}" height="{height}" '
        f'viewBox="{_num(kmin)} {_num(-emax)} {_num(kmax - kmin)} {_num(emax - emin)}" '
        'preserveAspectRatio="none">',
    ]
    if region.title:
        out.append(f"<title>{escape(region.title)}</title>")
    out.append('<g id="region" fill="#9bb7d4" stroke="none">')
    for col in np.flatnonzero(shown):
        x0 = k[col] - 0.5 * dk
        for a, b in _runs(region.membership[col]):
            lo = e[a] - 0.5 * de
            hi = e[b - 1] + 0.5 * de
            out.append(f'<rect x="{_num(x0)}" y="{_num(-hi)}" width="{_num(dk)}" '
                       f'height="{_num(hi - lo)}"/>')
    out.append("</g>")
    out.append(f'<g id="curves" fill="none" stroke="#000000" stroke-width="{_num(stroke)}">')
    for values, style in region.curves:
        pts = [(k[i], values[i]) for i in np.flatnonzero(shown) if np.isfinite(values[i])]
        if len(pts) < 2:
            continue
        d = "M " + " L ".join(f"{_num(x)},{_num(-y)}" for x, y in pts)
        dash = f' stroke-dasharray="{_num(4 * stroke)},{_num(4 * stroke)}"' if style == "dotted" else ""
        out.append(f'<path class="{style}" d="{d}"{dash}/>')
    out.append("</g>")
    out.append(f'<line id="axis" x1="{_num(kmin)}" y1="0" x2="{_num(kmax)}" y2="0" '
               f'stroke="#555555" stroke-width="{_num(stroke / 2)}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_region_svg(path, region: SpectrumRegion, **kwargs) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(region_svg(region, **kwargs))
