"""Text and standalone SVG renderings of explanations."""
from __future__ import annotations

from dataclasses import dataclass
from xml.sax.saxutils import escape

from .explanation import Explanation, format_number

POSITIVE = "#d62728"  # raises the predicted RUL
NEGATIVE = "#1f77b4"  # lowers it
STYLES = ("bar", "force", "text")


@dataclass(frozen=True)
class Arrow:
    start: float
    end: float
    label: str
    value: float

    @property
    def length(self):
        return abs(self.end - self.start)


def force_layout(e: Explanation) -> list:
    """Arrows chained from the base value to the prediction.

    Positive contributions come first (largest first), then negative ones,
    so the chain runs base -> highest point -> prediction. Zero
    contributions draw nothing.
    """
    pos = [c for c in e.contributions if c.value > 0]
    neg = [c for c in e.contributions if c.value < 0]
    arrows, cur = [], e.base_value
    for c in pos + neg:
        arrows.append(Arrow(cur, cur + c.value, c.condition, c.value))
        cur += c.value
    return arrows


def render_text(e: Explanation) -> str:
    lines = [
        f"method: {e.method}",
        f"predicted value: {format_number(e.predicted_value)}",
        f"base value: {format_number(e.base_value)}",
    ]
    width = max((len(c.condition) for c in e.contributions), default=0)
    for c in e.contributions:
        lines.append(f"  {c.condition:<{width}}  {c.value:+.4f}")
    if e.method == "lime" and e.diagnostics.get("weighted_r2") is not None:
        lines.append(f"surrogate weighted R^2: {e.diagnostics['weighted_r2']:.4f}")
    return "\n".join(lines) + "\n"


def _svg(width, height, body):
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">\n'
        f'<rect width="{width}" height="{height}" fill="white"/>\n'
        + "\n".join(body)
        + "\n</svg>\n"
    )


def _f(v):
    return f"{v:.2f}"


def render_bar_svg(e: Explanation, width=720) -> str:
    """Horizontal bars around a zero axis; positive weights red/right, negative blue/left."""
    row_h, top = 24, 50
    contribs = e.contributions
    height = top + row_h * max(len(contribs), 1) + 20
    mid = width / 2
    half = width / 2 - 150
    peak = max((abs(c.value) for c in contribs), default=0.0)
    scale = half / peak if peak > 0 else 0.0
    body = [
        f'<text x="10" y="20">{escape(e.method)}: predicted {escape(format_number(e.predicted_value))}'
        f" (base {escape(format_number(e.base_value))})</text>",
        f'<line x1="{_f(mid)}" y1="{top - 8}" x2="{_f(mid)}" y2="{height - 12}" stroke="black"/>',
    ]
    for k, c in enumerate(contribs):
        y = top + k * row_h
        length = abs(c.value) * scale
        if c.value >= 0:
            x0, color, tx, anchor = mid, POSITIVE, mid + length + 4, "start"
        else:
            x0, color, tx, anchor = mid - length, NEGATIVE, mid - length - 4, "end"
        body.append(
            f'<rect class="bar" x="{_f(x0)}" y="{y}" width="{_f(length)}" height="{row_h - 6}" '
            f'fill="{color}" data-value="{c.value!r}"/>'
        )
        body.append(
            f'<text x="{_f(tx)}" y="{y + row_h - 10}" text-anchor="{anchor}">'
            f"{escape(c.condition)} ({c.value:+.3g})</text>"
        )
    return _svg(width, height, body)


def render_force_svg(e: Explanation, width=900) -> str:
    """Force plot: arrows pushing from the base value to the prediction, length proportional to |value|."""
    arrows = force_layout(e)
    points = [e.base_value, e.predicted_value] + [a.end for a in arrows]
    lo, hi = min(points), max(points)
    span = hi - lo if hi > lo else 1.0
    margin = 60
    scale = (width - 2 * margin) / span

    def px(v):
        return margin + (v - lo) * scale

    height = 110 + 22 * len(arrows)
    body = [
        f'<line x1="{margin}" y1="60" x2="{width - margin}" y2="60" stroke="#999"/>',
        f'<text class="base" x="{_f(px(e.base_value))}" y="40" text-anchor="middle">'
        f"base value {escape(format_number(e.base_value))}</text>",
    ]
    if arrows:
        body.append(
            f'<text class="prediction" x="{_f(px(e.predicted_value))}" y="25" text-anchor="middle" '
            f'font-weight="bold">{escape(format_number(e.predicted_value))}</text>'
        )
    for k, a in enumerate(arrows):
        y = 75 + 22 * k
        color = POSITIVE if a.value > 0 else NEGATIVE
        x1, x2 = px(a.start), px(a.end)
        head = 6 if x2 > x1 else -6
        body.append(
            f'<g class="arrow" data-start="{a.start!r}" data-end="{a.end!r}">'
            f'<line x1="{_f(x1)}" y1="{y}" x2="{_f(x2)}" y2="{y}" stroke="{color}" stroke-width="6"/>'
            f'<polygon points="{_f(x2)},{y} {_f(x2 - head)},{y - 6} {_f(x2 - head)},{y + 6}" fill="{color}"/>'
            f'<text x="{_f(max(x1, x2) + 8)}" y="{y + 4}">{escape(a.label)} ({a.value:+.3g})</text></g>'
        )
    return _svg(width, height, body)


def render_explanation(e: Explanation, style: str = "text") -> str:
    if style == "text":
        return render_text(e)
    if style == "bar":
        return render_bar_svg(e)
    if style == "force":
        return render_force_svg(e)
    raise ValueError(f"unknown style {style!r}; choose from {STYLES}")
