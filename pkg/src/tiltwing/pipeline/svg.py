"""Small hand-rolled SVG charts, deterministic byte for byte.

Only what the report stage needs: line charts with a shared axis frame
and a bar chart. No external plotting dependency, no timestamps, fixed
number formatting.
"""

from pathlib import Path

PALETTE = ("#1f6f8b", "#d1495b", "#3a7d44", "#8a5a83", "#c78526",
           "#4a4e69")

WIDTH, HEIGHT = 640, 400
MARGIN = {"left": 62, "right": 16, "top": 34, "bottom": 44}


def _fmt(v):
    return f"{v:.6g}"


def _ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    step = (hi - lo) / (n - 1)
    return [lo + i * step for i in range(n)]


class _Canvas:
    def __init__(self, title, x_label, y_label, x_range, y_range):
        pad = 0.04 * (x_range[1] - x_range[0] or 1.0)
        self.x_lo, self.x_hi = x_range[0] - pad, x_range[1] + pad
        pad = 0.06 * (y_range[1] - y_range[0] or 1.0)
        self.y_lo, self.y_hi = y_range[0] - pad, y_range[1] + pad
        self.plot_w = WIDTH - MARGIN["left"] - MARGIN["right"]
        self.plot_h = HEIGHT - MARGIN["top"] - MARGIN["bottom"]
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
            f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" '
            'font-family="sans-serif" font-size="12">',
            f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
            f'<text x="{WIDTH / 2:g}" y="20" text-anchor="middle" '
            f'font-size="14">{title}</text>',
        ]
        self._frame(x_label, y_label)

    def px(self, x):
        f = (x - self.x_lo) / (self.x_hi - self.x_lo)
        return MARGIN["left"] + f * self.plot_w

    def py(self, y):
        f = (y - self.y_lo) / (self.y_hi - self.y_lo)
        return HEIGHT - MARGIN["bottom"] - f * self.plot_h

    def _frame(self, x_label, y_label):
        left, top = MARGIN["left"], MARGIN["top"]
        right = WIDTH - MARGIN["right"]
        bottom = HEIGHT - MARGIN["bottom"]
        self.parts.append(
            f'<rect x="{left}" y="{top}" width="{self.plot_w}" '
            f'height="{self.plot_h}" fill="none" stroke="#888"/>')
        for tx in _ticks(self.x_lo, self.x_hi):
            px = self.px(tx)
            self.parts.append(
                f'<line x1="{px:.1f}" y1="{bottom}" x2="{px:.1f}" '
                f'y2="{bottom + 4}" stroke="#888"/>')
            self.parts.append(
                f'<text x="{px:.1f}" y="{bottom + 16}" '
                f'text-anchor="middle">{_fmt(tx)}</text>')
        for ty in _ticks(self.y_lo, self.y_hi):
            py = self.py(ty)
            self.parts.append(
                f'<line x1="{left - 4}" y1="{py:.1f}" x2="{left}" '
                f'y2="{py:.1f}" stroke="#888"/>')
            self.parts.append(
                f'<text x="{left - 7}" y="{py + 4:.1f}" '
                f'text-anchor="end">{_fmt(ty)}</text>')
        self.parts.append(
            f'<text x="{(left + right) / 2:g}" y="{HEIGHT - 8}" '
            f'text-anchor="middle">{x_label}</text>')
        self.parts.append(
            f'<text x="14" y="{(top + bottom) / 2:g}" '
            f'text-anchor="middle" transform="rotate(-90 14 '
            f'{(top + bottom) / 2:g})">{y_label}</text>')

    def polyline(self, xs, ys, color, width=1.2, opacity=1.0):
        pts = " ".join(f"{self.px(x):.1f},{self.py(y):.1f}"
                       for x, y in zip(xs, ys))
        self.parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" '
            f'stroke-width="{width:g}" opacity="{opacity:g}"/>')

    def legend(self, labels_colors):
        x = MARGIN["left"] + 10
        y = MARGIN["top"] + 14
        for label, color in labels_colors:
            self.parts.append(
                f'<line x1="{x}" y1="{y - 4}" x2="{x + 18}" y2="{y - 4}" '
                f'stroke="{color}" stroke-width="2"/>')
            self.parts.append(f'<text x="{x + 24}" y="{y}">{label}</text>')
            y += 16

    def save(self, path):
        self.parts.append("</svg>")
        Path(path).write_text("\n".join(self.parts) + "\n")


def line_chart(path, series, *, title, x_label="", y_label="",
               legend=True):
    """Plot (label, xs, ys) triples on one frame.

    A label of None draws the line thin and translucent without a
    legend entry, which is how curve families are drawn.
    """
    all_x = [v for _, xs, _ in series for v in xs]
    all_y = [v for _, _, ys in series for v in ys]
    canvas = _Canvas(title, x_label, y_label,
                     (min(all_x), max(all_x)), (min(all_y), max(all_y)))
    entries = []
    named = 0
    for label, xs, ys in series:
        if label is None:
            canvas.polyline(xs, ys, PALETTE[0], width=0.8, opacity=0.35)
        else:
            color = PALETTE[named % len(PALETTE)]
            named += 1
            canvas.polyline(xs, ys, color, width=1.8)
            entries.append((label, color))
    if legend and entries:
        canvas.legend(entries)
    canvas.save(path)


def bar_chart(path, labels, values, *, title, y_label=""):
    canvas = _Canvas(title, "", y_label, (0.0, float(len(labels))),
                     (0.0, max(values)))
    slot = 1.0
    for i, (label, value) in enumerate(zip(labels, values)):
        x0 = canvas.px(i + 0.18 * slot)
        x1 = canvas.px(i + 0.82 * slot)
        y0 = canvas.py(0.0)
        y1 = canvas.py(value)
        color = PALETTE[i % len(PALETTE)]
        canvas.parts.append(
            f'<rect x="{x0:.1f}" y="{y1:.1f}" width="{x1 - x0:.1f}" '
            f'height="{y0 - y1:.1f}" fill="{color}" opacity="0.85"/>')
        canvas.parts.append(
            f'<text x="{(x0 + x1) / 2:.1f}" y="{y0 + 16:.1f}" '
            f'text-anchor="middle">{label}</text>')
        canvas.parts.append(
            f'<text x="{(x0 + x1) / 2:.1f}" y="{y1 - 5:.1f}" '
            f'text-anchor="middle">{_fmt(value)}</text>')
    canvas.save(path)
