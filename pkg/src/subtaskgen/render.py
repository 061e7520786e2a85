"""Text and SVG pictures of grids."""

from __future__ import annotations

from xml.sax.saxutils import escape

from . import dsl
from .world import GOAL, WALL, Grid

ARROWS = {"N": "^", "E": ">", "S": "v", "W": "<"}


def ascii_frame(grid: Grid) -> str:
    """One line per row: ``#`` wall, ``.`` free, ``G`` goal, digits for
    markers, and an arrow for the avatar."""
    rows = []
    for r, row in enumerate(grid.cells):
        out = []
        for c, ch in enumerate(row):
            if (r, c) == grid.avatar.cell:
                out.append(ARROWS[grid.avatar.dir])
            elif ch == WALL:
                out.append(WALL)
            elif grid.dialect == dsl.MAZE and (r, c) == grid.goal:
                out.append(GOAL)
            elif grid.markers is not None and grid.markers[r][c]:
                out.append(str(grid.markers[r][c]))
            else:
                out.append(ch)
        rows.append("".join(out))
    return "\n".join(rows) + "\n"


_CELL = 24


def svg_frame(grid: Grid, title: str = "") -> str:
    w, h = grid.width * _CELL, grid.height * _CELL
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">']
    if title:
        parts.append(f"<title>{escape(title)}</title>")
    for r, row in enumerate(grid.cells):
        for c, ch in enumerate(row):
            fill = "#444444" if ch == WALL else "#ffffff"
            if grid.dialect == dsl.MAZE and (r, c) == grid.goal:
                fill = "#f4c542"
            parts.append(f'<rect x="{c * _CELL}" y="{r * _CELL}" width="{_CELL}" height="{_CELL}" '
                         f'fill="{fill}" stroke="#999999"/>')
            n = grid.markers[r][c] if grid.markers is not None else 0
            if n:
                parts.append(f'<text x="{c * _CELL + 4}" y="{r * _CELL + 12}" font-size="10">{n}</text>')
    p = grid.avatar
    cx, cy, s = p.col * _CELL + _CELL / 2, p.row * _CELL + _CELL / 2, _CELL * 0.35
    pts = {"N": [(0, -s), (s, s), (-s, s)], "E": [(s, 0), (-s, s), (-s, -s)],
           "S": [(0, s), (-s, -s), (s, -s)], "W": [(-s, 0), (s, -s), (s, s)]}[p.dir]
    coords = " ".join(f"{cx + dx:.1f},{cy + dy:.1f}" for dx, dy in pts)
    parts.append(f'<polygon points="{coords}" fill="#2266cc"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def frame(grid: Grid, fmt: str = "ascii", title: str = "") -> str:
    if fmt == "ascii":
        return ascii_frame(grid)
    if fmt == "svg":
        return svg_frame(grid, title)
    raise ValueError(f"unknown render format {fmt!r}")
