"""Static SVG line charts of cumulative-loss curves read back from report CSVs."""
from __future__ import annotations

import logging
from collections import defaultdict
from pathlib import Path

import numpy as np

from .experiment import read_csv

log = logging.getLogger(__name__)

WIDTH, HEIGHT, MARGIN = 640, 400, 60
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f")


class MalformedCsv(ValueError):
    pass


def load_curves(paths) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Group report files by ``model/gate_mode`` and average their cumulative columns step-wise."""
    groups = defaultdict(list)
    for path in paths:
        try:
            meta, rows = read_csv(path)
        except (OSError, ValueError) as exc:
            raise MalformedCsv(f"{path}: {exc}") from exc
        if not rows or "cumulative" not in rows[0] or "step" not in rows[0]:
            raise MalformedCsv(f"{path}: missing step/cumulative columns")
        label = f"{meta.get('model', '?')}/{meta.get('gate_mode', '?')}"
        try:
            pts = [(int(r["step"]), float(r["cumulative"])) for r in rows if r["cumulative"] not in ("", "nan")]
        except ValueError as exc:
            raise MalformedCsv(f"{path}: {exc}") from exc
        groups[label].append(pts)
    curves = {}
    for label in sorted(groups):
        runs = groups[label]
        n = min(len(r) for r in runs)
        if n == 0:
            curves[label] = (np.array([]), np.array([]))
            continue
        steps = np.array([s for s, _ in runs[0][:n]])
        curves[label] = (steps, np.mean([[v for _, v in r[:n]] for r in runs], axis=0))
    return curves


def _num(v: float) -> str:
    return f"{v:.2f}"


def render_svg(curves: dict, title: str = "cumulative loss") -> str:
    nonempty = {k: v for k, v in curves.items() if len(v[0])}
    if not nonempty:
        log.warning("no evaluation steps to plot; writing an empty chart")
    xs = np.concatenate([v[0] for v in nonempty.values()]) if nonempty else np.array([0.0, 1.0])
    ys = np.concatenate([v[1] for v in nonempty.values()]) if nonempty else np.array([0.0, 1.0])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = min(0.0, float(ys.min())), float(ys.max())
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1
    pw, ph = WIDTH - 2 * MARGIN, HEIGHT - 2 * MARGIN

    def px(x):
        return MARGIN + (x - x0) / (x1 - x0) * pw

    def py(y):
        return HEIGHT - MARGIN - (y - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH // 2}" y="{MARGIN // 2}" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<text x="{MARGIN}" y="{HEIGHT - MARGIN + 16}" font-size="10">{x0:g}</text>',
        f'<text x="{WIDTH - MARGIN}" y="{HEIGHT - MARGIN + 16}" font-size="10" text-anchor="end">{x1:g}</text>',
        f'<text x="{MARGIN - 4}" y="{HEIGHT - MARGIN}" font-size="10" text-anchor="end">{y0:.3g}</text>',
        f'<text x="{MARGIN - 4}" y="{MARGIN + 4}" font-size="10" text-anchor="end">{y1:.3g}</text>',
    ]
    for i, (label, (sx, sy)) in enumerate(curves.items()):
        color = COLORS[i % len(COLORS)]
        if len(sx):
            d = " ".join(f"{'M' if j == 0 else 'L'}{_num(px(a))},{_num(py(b))}" for j, (a, b) in enumerate(zip(sx, sy)))
            out.append(f'<path class="curve" data-label="{label}" d="{d}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = MARGIN + 14 * i + 10
        out.append(f'<g class="legend"><line x1="{WIDTH - MARGIN - 130}" y1="{ly}" x2="{WIDTH - MARGIN - 110}" y2="{ly}" stroke="{color}" stroke-width="2"/>'
                   f'<text x="{WIDTH - MARGIN - 105}" y="{ly + 4}" font-size="10">{label}</text></g>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def plot_files(paths, out_path, title: str = "cumulative loss") -> Path:
    svg = render_svg(load_curves(paths), title)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(svg)
    return out_path
