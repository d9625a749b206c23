"""Self-contained SVG plots of sample paths."""

import math
from xml.sax.saxutils import escape

import numpy as np

from .analysis import segment_samples
from .renewal import RenewalParams

COLORS = ("#1f4e79", "#b03a2e", "#1e8449", "#7d3c98", "#b9770e", "#117a65")


def path_points(path, samples_per_segment=50):
    """Polyline vertices ``(t, z)``: flows sampled densely, jumps as vertical steps."""
    if isinstance(path.params, RenewalParams):
        return _renewal_points(path, samples_per_segment)
    ts, zs = [], []
    for i in range(len(path)):
        t, z = segment_samples(path, i, samples_per_segment)
        ts.append(t)
        zs.append(z)
        if not path.censored[i]:
            ts.append(np.array([path.t_end[i]]))
            zs.append(np.array([path.z_post[i]]))
    return np.concatenate(ts), np.concatenate(zs)


def _renewal_points(path, k):
    edges = np.concatenate([[0.0], path.arrivals, [path.t_max]])
    ts, zs = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        t = np.linspace(a, b, k)
        t[-1] = np.nextafter(b, a) if b > a else b
        ts.append(t)
        zs.append(path.eval(t))
    ts.append(np.array([path.t_max]))
    zs.append(np.array([path.eval(path.t_max)]))
    return np.concatenate(ts), np.concatenate(zs)


def _label(params):
    d = params.as_dict()
    keys = [k for k in ("beta", "f", "variant", "n", "x0") if k in d]
    text = ", ".join(f"{k}={d[k]}" for k in keys)
    return f"{text}, seed={d['seed']['master_seed']}"


def render_svg(paths, width=800, height=500, samples_per_segment=50, envelope=None, title=None):
    """SVG document for ``paths``.

    ``envelope`` draws ``+-sqrt(t)`` (dashed); by default it is on when the
    paths have ``beta = -2``.
    """
    if not paths:
        raise ValueError("nothing to plot: no paths")
    series = [path_points(p, samples_per_segment) for p in paths]
    t_max = max(p.t_max for p in paths)
    if envelope is None:
        envelope = getattr(paths[0].params, "beta", None) == -2.0
    z_all = np.concatenate([z for _, z in series])
    z_lo, z_hi = float(np.min(z_all)), float(np.max(z_all))
    if envelope:
        r = math.sqrt(t_max)
        z_lo, z_hi = min(z_lo, -r), max(z_hi, r)
    if z_hi - z_lo < 1e-12:
        z_lo, z_hi = z_lo - 1.0, z_hi + 1.0
    pad = 0.05 * (z_hi - z_lo)
    z_lo, z_hi = z_lo - pad, z_hi + pad
    left, right, top, bottom = 60, 20, 40, 40
    pw, ph = width - left - right, height - top - bottom

    def sx(t):
        return left + pw * np.asarray(t) / t_max

    def sy(z):
        return top + ph * (z_hi - np.asarray(z)) / (z_hi - z_lo)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
    ]
    if z_lo < 0.0 < z_hi:
        y0 = sy(0.0)
        out.append(f'<line x1="{left}" y1="{y0:.2f}" x2="{left + pw}" y2="{y0:.2f}" '
                   'stroke="#bbb" stroke-width="1"/>')
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        t = frac * t_max
        x = sx(t)
        out.append(f'<text x="{x:.2f}" y="{top + ph + 16}" font-size="11" text-anchor="middle" '
                   f'font-family="sans-serif">{t:.3g}</text>')
        z = z_lo + frac * (z_hi - z_lo)
        out.append(f'<text x="{left - 6}" y="{sy(z) + 4:.2f}" font-size="11" text-anchor="end" '
                   f'font-family="sans-serif">{z:.3g}</text>')
    if envelope:
        te = np.linspace(0.0, t_max, 200)
        for sign in (1.0, -1.0):
            pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(sx(te), sy(sign * np.sqrt(te))))
            out.append(f'<polyline points="{pts}" fill="none" stroke="#888" '
                       'stroke-dasharray="4,3" stroke-width="1"/>')
    for k, (t, z) in enumerate(series):
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(sx(t), sy(z)))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{COLORS[k % len(COLORS)]}" '
                   'stroke-width="1"/>')
    heading = title or _label(paths[0].params)
    out.append(f'<text x="{left}" y="{top - 12}" font-size="13" font-family="sans-serif">'
               f'{escape(heading)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def envelope_excess(paths, samples_per_segment=50):
    """Largest ``|z| - sqrt(t) - 5/sqrt(n)`` over the plotted samples (<= 0 inside the envelope)."""
    worst = -math.inf
    for p in paths:
        t, z = path_points(p, samples_per_segment)
        worst = max(worst, float(np.max(np.abs(z) - np.sqrt(t) - 5.0 / math.sqrt(p.params.n))))
    return worst
