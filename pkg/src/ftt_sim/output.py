"""Deterministic file outputs: 12-significant-digit CSV tables and
self-contained SVG charts (no raster codecs, diffable in CI).

Data files never contain timestamps; wall-clock information lives only in
the run manifest.
"""

from __future__ import annotations

import math

import numpy as np


def fmt12(x) -> str:
    """12-significant-digit float formatting; text passes through."""
    if isinstance(x, str):
        return x
    x = float(x)
    if x == 0.0:
        x = 0.0   # normalize -0.0
    return "%.12g" % x


def write_table(rows, schema, path) -> None:
    """CSV with header, LF endings, 12 significant digits, bit-stable."""
    lines = [",".join(schema)]
    width = len(schema)
    for row in rows:
        row = list(row)
        if len(row) != width:
            raise ValueError(f"row width {len(row)} does not match schema width {width}")
        lines.append(",".join(fmt12(v) for v in row))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


# diverging palette anchors: blue -> white -> red
_NEG = (33, 68, 160)
_MID = (247, 247, 247)
_POS = (178, 24, 43)


def _lerp(a, b, t):
    return tuple(round(ai + (bi - ai) * t) for ai, bi in zip(a, b))


def _diverging(t: float) -> str:
    t = max(-1.0, min(1.0, t))
    rgb = _lerp(_MID, _POS, t) if t >= 0 else _lerp(_MID, _NEG, -t)
    return f"rgb({rgb[0]},{rgb[1]},{rgb[2]})"


def _f(x) -> str:
    return "%.6g" % float(x)


def _axis_ticks(lo: float, hi: float, n: int = 5):
    if hi <= lo:
        hi = lo + 1.0
    raw = np.linspace(lo, hi, n)
    return [float(v) for v in raw]


def render_heatmap(wmap, *, title: str | None = None, size: int = 560) -> str:
    """Self-contained SVG heatmap with a symmetric diverging scale.

    Axes are labeled Re gamma / Im gamma, a colorbar with the scale limits
    is included, and the limits are also written into the SVG metadata.
    """
    values = np.asarray(wmap.values, dtype=float)
    re, im = wmap.grid.re, wmap.grid.im
    if values.size == 0:
        raise ValueError("empty map")
    vmax = float(np.abs(values).max())
    if vmax == 0.0:
        vmax = 1e-30
    ml, mr, mt, mb = 64, 96, 40 if title else 16, 52
    pw = ph = size
    width, height = ml + pw + mr, mt + ph + mb
    nx, ny = re.size, im.size
    cw, ch = pw / nx, ph / ny

    out = []
    out.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">'
    )
    out.append(f'<metadata>{{"vmin": {_f(-vmax)}, "vmax": {_f(vmax)}}}</metadata>')
    out.append(f'<rect width="{width}" height="{height}" fill="white"/>')
    if title:
        out.append(
            f'<text x="{ml + pw / 2}" y="24" text-anchor="middle" '
            f'font-family="sans-serif" font-size="14">{title}</text>'
        )
    for i in range(ny):
        y = mt + ph - (i + 1) * ch   # im axis increases upward
        for j in range(nx):
            color = _diverging(values[i, j] / vmax)
            out.append(
                f'<rect x="{_f(ml + j * cw)}" y="{_f(y)}" width="{_f(cw + 0.5)}" '
                f'height="{_f(ch + 0.5)}" fill="{color}"/>'
            )
    out.append(
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" '
        f'stroke="black" stroke-width="1"/>'
    )
    for v in _axis_ticks(float(re[0]), float(re[-1])):
        x = ml + (v - re[0]) / (re[-1] - re[0]) * pw
        out.append(f'<line x1="{_f(x)}" y1="{mt + ph}" x2="{_f(x)}" y2="{mt + ph + 5}" stroke="black"/>')
        out.append(
            f'<text x="{_f(x)}" y="{mt + ph + 18}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{_f(v)}</text>'
        )
    for v in _axis_ticks(float(im[0]), float(im[-1])):
        y = mt + ph - (v - im[0]) / (im[-1] - im[0]) * ph
        out.append(f'<line x1="{ml - 5}" y1="{_f(y)}" x2="{ml}" y2="{_f(y)}" stroke="black"/>')
        out.append(
            f'<text x="{ml - 8}" y="{_f(y + 4)}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{_f(v)}</text>'
        )
    out.append(
        f'<text x="{ml + pw / 2}" y="{height - 12}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13">Re &#947;</text>'
    )
    out.append(
        f'<text x="16" y="{mt + ph / 2}" text-anchor="middle" font-family="sans-serif" '
        f'font-size="13" transform="rotate(-90 16 {mt + ph / 2})">Im &#947;</text>'
    )
    # colorbar
    cb_x, cb_w, nseg = ml + pw + 24, 16, 64
    for s in range(nseg):
        t = 1.0 - 2.0 * s / (nseg - 1)
        y = mt + s * ph / nseg
        out.append(
            f'<rect x="{cb_x}" y="{_f(y)}" width="{cb_w}" height="{_f(ph / nseg + 0.5)}" '
            f'fill="{_diverging(t)}"/>'
        )
    out.append(
        f'<rect x="{cb_x}" y="{mt}" width="{cb_w}" height="{ph}" fill="none" stroke="black"/>'
    )
    for frac, val in ((0.0, vmax), (0.5, 0.0), (1.0, -vmax)):
        y = mt + frac * ph
        out.append(
            f'<text x="{cb_x + cb_w + 4}" y="{_f(y + 4)}" font-family="sans-serif" '
            f'font-size="10">{_f(val)}</text>'
        )
    out.append(
        f'<text x="{cb_x}" y="{mt - 6}" font-family="sans-serif" font-size="10">'
        f'max = {_f(vmax)}</text>'
    )
    out.append("</svg>")
    return "\n".join(out)


_SERIES_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


def render_linechart(x, series, labels, *, xlabel: str, ylabel: str, title: str | None = None,
                     size=(640, 420)) -> str:
    """Deterministic multi-series SVG line chart."""
    x = np.asarray(x, dtype=float)
    series = [np.asarray(s, dtype=float) for s in series]
    if not series or any(s.size != x.size for s in series):
        raise ValueError("series must be non-empty and match x in length")
    ml, mr, mt, mb = 70, 24, 40 if title else 20, 56
    width, height = size
    pw, ph = width - ml - mr, height - mt - mb
    ylo = min(float(np.nanmin(s)) for s in series)
    yhi = max(float(np.nanmax(s)) for s in series)
    if yhi == ylo:
        yhi = ylo + 1.0
    pad = 0.05 * (yhi - ylo)
    ylo, yhi = ylo - pad, yhi + pad
    xlo, xhi = float(x[0]), float(x[-1])
    if xhi == xlo:
        xhi = xlo + 1.0

    def px(v):
        return ml + (v - xlo) / (xhi - xlo) * pw

    def py(v):
        return mt + ph - (v - ylo) / (yhi - ylo) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        out.append(
            f'<text x="{ml + pw / 2}" y="24" text-anchor="middle" '
            f'font-family="sans-serif" font-size="14">{title}</text>'
        )
    for v in _axis_ticks(xlo, xhi):
        out.append(
            f'<line x1="{_f(px(v))}" y1="{mt}" x2="{_f(px(v))}" y2="{mt + ph}" '
            f'stroke="#dddddd" stroke-width="1"/>'
        )
        out.append(
            f'<text x="{_f(px(v))}" y="{mt + ph + 18}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{_f(v)}</text>'
        )
    for v in _axis_ticks(ylo, yhi):
        out.append(
            f'<line x1="{ml}" y1="{_f(py(v))}" x2="{ml + pw}" y2="{_f(py(v))}" '
            f'stroke="#dddddd" stroke-width="1"/>'
        )
        out.append(
            f'<text x="{ml - 6}" y="{_f(py(v) + 4)}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{_f(v)}</text>'
        )
    for k, s in enumerate(series):
        color = _SERIES_COLORS[k % len(_SERIES_COLORS)]
        pts = " ".join(f"{_f(px(xv))},{_f(py(yv))}" for xv, yv in zip(x, s) if math.isfinite(yv))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        if labels and k < len(labels):
            out.append(
                f'<text x="{ml + pw - 6}" y="{mt + 16 + 14 * k}" text-anchor="end" '
                f'font-family="sans-serif" font-size="11" fill="{color}">{labels[k]}</text>'
            )
    out.append(
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>'
    )
    out.append(
        f'<text x="{ml + pw / 2}" y="{height - 14}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13">{xlabel}</text>'
    )
    out.append(
        f'<text x="18" y="{mt + ph / 2}" text-anchor="middle" font-family="sans-serif" '
        f'font-size="13" transform="rotate(-90 18 {mt + ph / 2})">{ylabel}</text>'
    )
    out.append("</svg>")
    return "\n".join(out)
