"""Deterministic SVG rendering of mazes and path traces.

Output is plain hand-assembled SVG text so identical inputs always produce
byte-identical files (no library, no timestamps). World y points up; SVG y
points down, so coordinates are flipped about the arena's vertical center.
"""

from __future__ import annotations

import numpy as np

from .world import MazeSpec

SCALE = 6.0  # px per cm
MARGIN = 10.0  # px


def _fmt(v: float) -> str:
    return f"{v:.3f}".rstrip("0").rstrip(".")


class _Canvas:
    def __init__(self, maze: MazeSpec):
        xmin, ymin, xmax, ymax = maze.bounds
        self.xmin = xmin
        self.ymax = ymax
        self.w = (xmax - xmin) * SCALE + 2 * MARGIN
        self.h = (ymax - ymin) * SCALE + 2 * MARGIN

    def pt(self, x: float, y: float) -> str:
        px = (x - self.xmin) * SCALE + MARGIN
        py = (self.ymax - y) * SCALE + MARGIN
        return f"{_fmt(px)},{_fmt(py)}"

    def xy(self, x: float, y: float) -> tuple:
        px = (x - self.xmin) * SCALE + MARGIN
        py = (self.ymax - y) * SCALE + MARGIN
        return _fmt(px), _fmt(py)


def render_svg(maze: MazeSpec, path: np.ndarray = None, events: np.ndarray = None,
               title: str = "") -> str:
    """Render the maze and an optional path trace to an SVG string.

    Walls are dark lines, targets orange dots, start poses green wedges,
    the path a blue polyline with hit (green) and collision (red) markers.
    """
    cv = _Canvas(maze)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(cv.w)}" '
        f'height="{_fmt(cv.h)}" viewBox="0 0 {_fmt(cv.w)} {_fmt(cv.h)}">',
        f'<rect width="{_fmt(cv.w)}" height="{_fmt(cv.h)}" fill="white"/>',
    ]
    if title:
        out.append(f'<title>{title}</title>')
    for wall in maze.walls:
        x1, y1 = cv.xy(wall[0], wall[1])
        x2, y2 = cv.xy(wall[2], wall[3])
        out.append(f'<line x1="{x1}" y1="{y1}" x2="{x2}" y2="{y2}" '
                   f'stroke="#333333" stroke-width="2"/>')
    for t in maze.targets:
        x, y = cv.xy(t[0], t[1])
        out.append(f'<circle cx="{x}" cy="{y}" r="4" fill="#e08020"/>')
    for p in maze.starts:
        x, y = cv.xy(p.x, p.y)
        tip = cv.pt(p.x + 2.5 * np.cos(p.heading), p.y + 2.5 * np.sin(p.heading))
        out.append(f'<circle cx="{x}" cy="{y}" r="3" fill="#2a9d2a"/>')
        out.append(f'<polyline points="{x},{y} {tip}" stroke="#2a9d2a" stroke-width="2"/>')
    if path is not None and len(path) > 0:
        pts = " ".join(cv.pt(px, py) for px, py, _ in path)
        out.append(f'<polyline points="{pts}" fill="none" stroke="#2060c0" '
                   f'stroke-width="1.5"/>')
        if events is not None:
            for i, ev in enumerate(events):
                ev = int(ev)
                if ev == 0:
                    continue
                x, y = cv.xy(path[i + 1, 0], path[i + 1, 1])
                if ev < 0:
                    out.append(f'<g stroke="#d02020" stroke-width="2">'
                               f'<line x1="{_fmt(float(x) - 4)}" y1="{_fmt(float(y) - 4)}" '
                               f'x2="{_fmt(float(x) + 4)}" y2="{_fmt(float(y) + 4)}"/>'
                               f'<line x1="{_fmt(float(x) - 4)}" y1="{_fmt(float(y) + 4)}" '
                               f'x2="{_fmt(float(x) + 4)}" y2="{_fmt(float(y) - 4)}"/></g>')
                else:
                    out.append(f'<circle cx="{x}" cy="{y}" r="3" fill="none" '
                               f'stroke="#2a9d2a" stroke-width="1.5"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(path, svg_text: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(svg_text)
