"""Minimal log-log SVG plots: scatter with error bars plus straight lines."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

W, H = 640, 480
MARGIN = (70, 30, 30, 60)  # left, right, top, bottom
COLOURS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


@dataclass
class LogLogPlot:
    title: str = ""
    xlabel: str = "x"
    ylabel: str = "y"
    points: list = field(default_factory=list)  # (x, y, ylo, yhi)
    lines: list = field(default_factory=list)  # (label, slope, intercept) in log space

    def add_points(self, xs, ys, lo=None, hi=None) -> None:
        for i, (x, y) in enumerate(zip(xs, ys)):
            self.points.append((x, y, None if lo is None else lo[i], None if hi is None else hi[i]))

    def add_power_line(self, label: str, exponent: float, coef: float) -> None:
        """y = coef * x^exponent."""
        self.lines.append((label, exponent, coef))

    def _bounds(self):
        xs = [p[0] for p in self.points if p[0] > 0]
        ys = [v for p in self.points for v in p[1:] if v is not None and v > 0]
        if not xs or not ys:
            return (0.1, 1.0), (0.1, 1.0)
        lx0, lx1 = math.log10(min(xs)), math.log10(max(xs))
        ly0, ly1 = math.log10(min(ys)), math.log10(max(ys))
        px = max(0.1, 0.08 * (lx1 - lx0))
        py = max(0.1, 0.08 * (ly1 - ly0))
        return (lx0 - px, lx1 + px), (ly0 - py, ly1 + py)

    def render(self, stamp: Optional[str] = None) -> str:
        (x0, x1), (y0, y1) = self._bounds()
        l, r, t, b = MARGIN
        pw, ph = W - l - r, H - t - b

        def X(lx):
            return l + (lx - x0) / (x1 - x0) * pw

        def Y(ly):
            return t + (y1 - ly) / (y1 - y0) * ph

        out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
               f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">']
        if stamp:
            out.append(f"<!-- {stamp} -->")
        out.append(f'<rect x="{l}" y="{t}" width="{pw}" height="{ph}" fill="none" stroke="#000"/>')
        for k in range(math.ceil(x0), math.floor(x1) + 1):
            out.append(f'<line x1="{X(k):.2f}" y1="{t + ph}" x2="{X(k):.2f}" y2="{t + ph + 5}" stroke="#000"/>')
            out.append(f'<text x="{X(k):.2f}" y="{t + ph + 18}" text-anchor="middle">1e{k}</text>')
        for k in range(math.ceil(y0), math.floor(y1) + 1):
            out.append(f'<line x1="{l - 5}" y1="{Y(k):.2f}" x2="{l}" y2="{Y(k):.2f}" stroke="#000"/>')
            out.append(f'<text x="{l - 8}" y="{Y(k) + 4:.2f}" text-anchor="end">1e{k}</text>')
        out.append(f'<text x="{l + pw / 2}" y="{H - 15}" text-anchor="middle">{_esc(self.xlabel)}</text>')
        out.append(f'<text x="18" y="{t + ph / 2}" text-anchor="middle" '
                   f'transform="rotate(-90 18 {t + ph / 2})">{_esc(self.ylabel)}</text>')
        if self.title:
            out.append(f'<text x="{l + pw / 2}" y="{t - 10}" text-anchor="middle">{_esc(self.title)}</text>')
        for i, (label, slope, coef) in enumerate(self.lines):
            c = COLOURS[(i + 1) % len(COLOURS)]
            ya, yb = math.log10(coef) + slope * x0, math.log10(coef) + slope * x1
            out.append(f'<line x1="{X(x0):.2f}" y1="{Y(ya):.2f}" x2="{X(x1):.2f}" y2="{Y(yb):.2f}" '
                       f'stroke="{c}" stroke-dasharray="{"6 4" if i else "none"}" clip-path="url(#plot)"/>')
            out.append(f'<text x="{l + 10}" y="{t + 18 + 16 * i}" fill="{c}">{_esc(label)}</text>')
        for x, y, lo, hi in self.points:
            if x <= 0 or y <= 0:
                continue
            cx, cy = X(math.log10(x)), Y(math.log10(y))
            if lo and hi and lo > 0:
                out.append(f'<line x1="{cx:.2f}" y1="{Y(math.log10(lo)):.2f}" x2="{cx:.2f}" '
                           f'y2="{Y(math.log10(hi)):.2f}" stroke="{COLOURS[0]}"/>')
            out.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="3.5" fill="{COLOURS[0]}"/>')
        out.insert(1, f'<defs><clipPath id="plot"><rect x="{l}" y="{t}" width="{pw}" height="{ph}"/></clipPath></defs>')
        out.append("</svg>")
        return "\n".join(out) + "\n"


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def fit_plot(rows, theta_hat: Optional[float], h_hat: Optional[float], theta_pred: Optional[float],
             title: str = "escape probability") -> LogLogPlot:
    """Ladder estimates with the fitted line and a reference line of the predicted slope."""
    p = LogLogPlot(title=title, xlabel="eps", ylabel="p_hat")
    p.add_points([r.eps for r in rows], [r.p_hat for r in rows],
                 [r.ci_low for r in rows], [r.ci_high for r in rows])
    if theta_hat is not None and h_hat is not None:
        p.add_power_line(f"fit: theta = {theta_hat:.3f}", theta_hat, h_hat)
    if theta_pred is not None:
        # anchored at the smallest-eps estimate with hits
        anchor = min((r for r in rows if r.hits > 0), key=lambda r: r.eps, default=None)
        if anchor is not None:
            p.add_power_line(f"predicted theta = {theta_pred:.3f}", theta_pred,
                             anchor.p_hat / anchor.eps ** theta_pred)
    return p
