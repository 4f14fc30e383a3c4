"""Dependency-free SVG line charts for training curves.

Emits one standalone SVG per metric with the series as a single
<polyline>, the y axis starting at 0 and topped at a round value just
above the data, and plain text axis labels.  Text output keeps the
charts diffable in tests.
"""

import math
import os


def nice_ceiling(value: float) -> float:
    """Smallest quarter-decade multiple >= value (1.4359 -> 1.5, 4.7 -> 4.75).

    Falls back to 1.0 for non-positive or non-finite input.
    """
    if not math.isfinite(value) or value <= 0.0:
        return 1.0
    step = 10.0 ** math.floor(math.log10(value)) / 4.0
    # snap away float dust (38 * 0.025 = 0.9500000000000001)
    return float(f"{math.ceil(value / step - 1e-9) * step:.12g}")


def read_metrics_csv(path: str) -> dict:
    """Parse metrics.csv into {"epoch": [...], "loss": [...], "accuracy": [...]}.

    Raises ValueError naming the 1-based line number of any malformed row.
    """
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ValueError(f"{path}:1: empty metrics file")
    header = lines[0].split(",")
    if header[:3] != ["epoch", "loss", "accuracy"]:
        raise ValueError(f"{path}:1: unexpected header {lines[0]!r}")
    out = {"epoch": [], "loss": [], "accuracy": []}
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != len(header):
            raise ValueError(f"{path}:{line_no}: expected {len(header)} fields, got {len(parts)}")
        try:
            out["epoch"].append(int(parts[0]))
            out["loss"].append(float(parts[1]))
            out["accuracy"].append(float(parts[2]))
        except ValueError as exc:
            raise ValueError(f"{path}:{line_no}: bad numeric field ({exc})") from exc
    if not out["epoch"]:
        raise ValueError(f"{path}:2: no data rows")
    return out


WIDTH = 640
HEIGHT = 400
MARGIN_LEFT = 62
MARGIN_RIGHT = 18
MARGIN_TOP = 34
MARGIN_BOTTOM = 46


def line_chart(xs, ys, title: str, x_label: str, y_label: str) -> str:
    """Render one series as a standalone SVG string.

    The x axis spans the data; the y axis spans [0, nice_ceiling(max)].
    """
    if len(xs) != len(ys) or not xs:
        raise ValueError("xs and ys must be equal-length and non-empty")
    x_lo, x_hi = float(min(xs)), float(max(xs))
    x_span = x_hi - x_lo or 1.0
    y_hi = nice_ceiling(max(ys))
    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

    def px(x: float) -> float:
        return MARGIN_LEFT + (x - x_lo) / x_span * plot_w

    def py(y: float) -> float:
        return MARGIN_TOP + (1.0 - y / y_hi) * plot_h

    points = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys))
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.0f}" y="20" text-anchor="middle" font-size="15">{title}</text>',
    ]
    axis_y = MARGIN_TOP + plot_h
    parts.append(f'<line x1="{MARGIN_LEFT}" y1="{MARGIN_TOP}" x2="{MARGIN_LEFT}" '
                 f'y2="{axis_y}" stroke="black"/>')
    parts.append(f'<line x1="{MARGIN_LEFT}" y1="{axis_y}" x2="{MARGIN_LEFT + plot_w}" '
                 f'y2="{axis_y}" stroke="black"/>')
    for i in range(6):
        y_val = y_hi * i / 5
        yy = py(y_val)
        parts.append(f'<line x1="{MARGIN_LEFT - 4}" y1="{yy:.2f}" x2="{MARGIN_LEFT}" '
                     f'y2="{yy:.2f}" stroke="black"/>')
        parts.append(f'<text x="{MARGIN_LEFT - 8}" y="{yy + 4:.2f}" '
                     f'text-anchor="end">{y_val:g}</text>')
    for i in range(5):
        x_val = x_lo + x_span * i / 4
        xx = px(x_val)
        parts.append(f'<line x1="{xx:.2f}" y1="{axis_y}" x2="{xx:.2f}" '
                     f'y2="{axis_y + 4}" stroke="black"/>')
        parts.append(f'<text x="{xx:.2f}" y="{axis_y + 18}" '
                     f'text-anchor="middle">{x_val:g}</text>')
    parts.append(f'<text x="{MARGIN_LEFT + plot_w / 2:.0f}" y="{HEIGHT - 8}" '
                 f'text-anchor="middle">{x_label}</text>')
    parts.append(f'<text x="16" y="{MARGIN_TOP + plot_h / 2:.0f}" text-anchor="middle" '
                 f'transform="rotate(-90 16 {MARGIN_TOP + plot_h / 2:.0f})">{y_label}</text>')
    parts.append(f'<polyline fill="none" stroke="#1f6fc4" stroke-width="1.5" points="{points}"/>')
    parts.append("</svg>")
    return "\n".join(parts)


def write_metric_charts(metrics: dict, out_dir: str) -> list:
    """Write loss.svg and accuracy.svg under out_dir; returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    charts = [
        ("loss.svg", metrics["loss"], "Training loss over time", "Epoch", "Training loss"),
        ("accuracy.svg", metrics["accuracy"], "Training accuracy over time", "Epoch",
         "Training accuracy"),
    ]
    paths = []
    for name, series, title, x_label, y_label in charts:
        path = os.path.join(out_dir, name)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(line_chart(metrics["epoch"], series, title, x_label, y_label))
        paths.append(path)
    return paths
