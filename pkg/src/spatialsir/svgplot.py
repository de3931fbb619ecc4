"""Self-contained deterministic SVG plots (no external renderer).

Fixed canvas, fixed palette, fixed float formatting: identical input data
produces identical bytes.
"""

import math

WIDTH, HEIGHT = 720, 480
MARGIN = 60
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def _f(x):
    return format(float(x), ".6g")


def _ticks(lo, hi, count=5):
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        return [lo]
    span = hi - lo
    step = 10 ** math.floor(math.log10(span / count))
    for mult in (1, 2, 5, 10):
        if span / (step * mult) <= count:
            step *= mult
            break
    first = math.ceil(lo / step) * step
    out = []
    t = first
    while t <= hi + 1e-12 * span:
        out.append(t)
        t += step
    return out or [lo]


class SvgPlot:
    def __init__(self, title="", xlabel="", ylabel="", logx=False, logy=False):
        self.title = title
        self.xlabel = xlabel
        self.ylabel = ylabel
        self.logx = logx
        self.logy = logy
        self.series = []
        self.annotations = []

    def add_series(self, label, xs, ys, marker=False):
        pts = [(x, y) for x, y in zip(xs, ys)
               if math.isfinite(x) and math.isfinite(y)
               and (not self.logx or x > 0) and (not self.logy or y > 0)]
        self.series.append((label, pts, marker))

    def add_annotation(self, text):
        self.annotations.append(text)

    def _tx(self, v, lo, hi):
        if self.logx:
            v, lo, hi = math.log10(v), math.log10(lo), math.log10(hi)
        frac = 0.5 if hi == lo else (v - lo) / (hi - lo)
        return MARGIN + frac * (WIDTH - 2 * MARGIN)

    def _ty(self, v, lo, hi):
        if self.logy:
            v, lo, hi = math.log10(v), math.log10(lo), math.log10(hi)
        frac = 0.5 if hi == lo else (v - lo) / (hi - lo)
        return HEIGHT - MARGIN - frac * (HEIGHT - 2 * MARGIN)

    def render(self):
        parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}">',
            f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
            f'<text x="{WIDTH // 2}" y="24" text-anchor="middle" font-size="16" '
            f'font-family="sans-serif">{self.title}</text>',
        ]
        xs = [p[0] for _, pts, _ in self.series for p in pts]
        ys = [p[1] for _, pts, _ in self.series for p in pts]
        axis = (f'<rect x="{MARGIN}" y="{MARGIN}" width="{WIDTH - 2 * MARGIN}" '
                f'height="{HEIGHT - 2 * MARGIN}" fill="none" stroke="black"/>')
        parts.append(axis)
        if not xs:
            parts.append(f'<text x="{WIDTH // 2}" y="{HEIGHT // 2}" text-anchor="middle" '
                         f'font-size="14" font-family="sans-serif" fill="#a00">'
                         f'warning: no plottable data</text>')
        else:
            xlo, xhi = min(xs), max(xs)
            ylo, yhi = min(ys), max(ys)
            if xlo == xhi:
                xlo, xhi = xlo - 1, xhi + 1
            if ylo == yhi:
                ylo, yhi = ylo - 1, yhi + 1
            if not self.logy:
                pad = 0.05 * (yhi - ylo)
                ylo, yhi = ylo - pad, yhi + pad
            for tv in (_ticks(math.log10(xlo), math.log10(xhi)) if self.logx
                       else _ticks(xlo, xhi)):
                v = 10 ** tv if self.logx else tv
                if not (xlo <= v <= xhi):
                    continue
                px = self._tx(v, xlo, xhi)
                parts.append(f'<line x1="{_f(px)}" y1="{HEIGHT - MARGIN}" x2="{_f(px)}" '
                             f'y2="{HEIGHT - MARGIN + 5}" stroke="black"/>')
                parts.append(f'<text x="{_f(px)}" y="{HEIGHT - MARGIN + 18}" '
                             f'text-anchor="middle" font-size="11" '
                             f'font-family="sans-serif">{_f(v)}</text>')
            for tv in (_ticks(math.log10(ylo), math.log10(yhi)) if self.logy
                       else _ticks(ylo, yhi)):
                v = 10 ** tv if self.logy else tv
                if not (ylo <= v <= yhi):
                    continue
                py = self._ty(v, ylo, yhi)
                parts.append(f'<line x1="{MARGIN - 5}" y1="{_f(py)}" x2="{MARGIN}" '
                             f'y2="{_f(py)}" stroke="black"/>')
                parts.append(f'<text x="{MARGIN - 8}" y="{_f(py + 4)}" text-anchor="end" '
                             f'font-size="11" font-family="sans-serif">{_f(v)}</text>')
            for idx, (label, pts, marker) in enumerate(self.series):
                color = PALETTE[idx % len(PALETTE)]
                path = " ".join(
                    f'{"M" if j == 0 else "L"}{_f(self._tx(x, xlo, xhi))},'
                    f'{_f(self._ty(y, ylo, yhi))}' for j, (x, y) in enumerate(pts))
                parts.append(f'<path d="{path}" fill="none" stroke="{color}" '
                             f'stroke-width="1.5"/>')
                if marker:
                    for x, y in pts:
                        parts.append(f'<circle cx="{_f(self._tx(x, xlo, xhi))}" '
                                     f'cy="{_f(self._ty(y, ylo, yhi))}" r="3" '
                                     f'fill="{color}"/>')
                parts.append(f'<text x="{WIDTH - MARGIN + 4}" y="{MARGIN + 16 * idx + 12}" '
                             f'font-size="11" font-family="sans-serif" '
                             f'fill="{color}">{label}</text>')
        parts.append(f'<text x="{WIDTH // 2}" y="{HEIGHT - 12}" text-anchor="middle" '
                     f'font-size="13" font-family="sans-serif">{self.xlabel}</text>')
        parts.append(f'<text x="18" y="{HEIGHT // 2}" text-anchor="middle" font-size="13" '
                     f'font-family="sans-serif" transform="rotate(-90 18 {HEIGHT // 2})">'
                     f'{self.ylabel}</text>')
        for j, text in enumerate(self.annotations):
            parts.append(f'<text x="{MARGIN + 10}" y="{MARGIN + 18 + 15 * j}" '
                         f'font-size="12" font-family="sans-serif" fill="#333">{text}</text>')
        parts.append("</svg>")
        return "\n".join(parts) + "\n"

    def write(self, path):
        with open(path, "w", newline="\n") as fh:
            fh.write(self.render())


def bar_plot(title, labels, pairs, pair_names=("empirical", "theoretical")):
    """Grouped two-bar chart rendered as an SvgPlot-compatible SVG string."""
    plot = SvgPlot(title=title, xlabel="coordinate", ylabel="value")
    n = len(labels)
    if n == 0:
        return plot
    vals = [v for pair in pairs for v in pair]
    lo, hi = min(vals + [0.0]), max(vals + [0.0])
    if lo == hi:
        hi = lo + 1
    parts_extra = []
    width = (WIDTH - 2 * MARGIN) / max(n, 1)

    def ty(v):
        return HEIGHT - MARGIN - (v - lo) / (hi - lo) * (HEIGHT - 2 * MARGIN)

    for j, (label, (emp, theo)) in enumerate(zip(labels, pairs)):
        x0 = MARGIN + j * width
        for k, (val, color) in enumerate(((emp, PALETTE[0]), (theo, PALETTE[1]))):
            bx = x0 + width * (0.15 + 0.35 * k)
            top = min(ty(val), ty(0.0))
            h = abs(ty(val) - ty(0.0))
            parts_extra.append(f'<rect x="{_f(bx)}" y="{_f(top)}" '
                               f'width="{_f(width * 0.3)}" height="{_f(h)}" '
                               f'fill="{color}"/>')
        parts_extra.append(f'<text x="{_f(x0 + width / 2)}" y="{HEIGHT - MARGIN + 18}" '
                           f'text-anchor="middle" font-size="10" '
                           f'font-family="sans-serif">{label}</text>')
    plot.add_annotation(f"{pair_names[0]} (blue) vs {pair_names[1]} (red)")
    base = plot.render().rsplit("</svg>", 1)[0]
    return base + "\n".join(parts_extra) + "\n</svg>\n"
