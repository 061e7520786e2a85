"""Visual grids, tasks, and task-level dissimilarity and quality."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import dsl

DIRECTIONS = ("N", "E", "S", "W")
DELTA = {"N": (-1, 0), "E": (0, 1), "S": (1, 0), "W": (0, -1)}
MIN_SIDE, MAX_SIDE = 2, 16
MAX_MARKERS = 9

WALL, FREE, GOAL = "#", ".", "G"


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class Pose:
    row: int
    col: int
    dir: str

    @property
    def cell(self) -> tuple[int, int]:
        return (self.row, self.col)

    def turned(self, steps: int) -> "Pose":
        """Rotate clockwise by ``steps`` quarter turns (negative = left)."""
        i = (DIRECTIONS.index(self.dir) + steps) % 4
        return Pose(self.row, self.col, DIRECTIONS[i])

    def ahead(self, rel: int = 0) -> tuple[int, int]:
        dr, dc = DELTA[self.turned(rel).dir]
        return (self.row + dr, self.col + dc)

    def to_json(self) -> dict:
        return {"r": self.row, "c": self.col, "dir": self.dir}

    @classmethod
    def from_json(cls, d: dict) -> "Pose":
        if d["dir"] not in DIRECTIONS:
            raise GridError(f"bad direction {d['dir']!r}")
        return cls(int(d["r"]), int(d["c"]), d["dir"])


@dataclass(frozen=True)
class Grid:
    """One visual world.

    ``cells`` holds one string per row using ``#`` for walls and ``.`` for
    free cells. Maze grids carry a ``goal``; Karel grids carry marker counts
    before (``markers``) and after (``post_markers``) plus ``avatar_end``.
    """

    dialect: str
    cells: tuple[str, ...]
    avatar: Pose
    goal: tuple[int, int] | None = None
    markers: tuple[tuple[int, ...], ...] | None = None
    post_markers: tuple[tuple[int, ...], ...] | None = None
    avatar_end: Pose | None = None

    def __post_init__(self):
        if self.dialect not in dsl.DIALECTS:
            raise GridError(f"unknown dialect {self.dialect!r}")
        h, w = len(self.cells), len(self.cells[0]) if self.cells else 0
        if not (MIN_SIDE <= h <= MAX_SIDE and MIN_SIDE <= w <= MAX_SIDE):
            raise GridError(f"grid {h}x{w} outside bounds {MIN_SIDE}..{MAX_SIDE}")
        if any(len(r) != w or set(r) - {WALL, FREE} for r in self.cells):
            raise GridError("cells must be equal-length rows of '#' and '.'")
        if not self.is_free(self.avatar.cell):
            raise GridError("avatar must start on a free cell")
        if self.dialect == dsl.MAZE:
            if self.goal is None or not self.is_free(self.goal):
                raise GridError("maze goal must be a free cell")
        else:
            if self.markers is None or self.post_markers is None or self.avatar_end is None:
                raise GridError("karel grid needs markers, post_markers and avatar_end")
            if not self.is_free(self.avatar_end.cell):
                raise GridError("avatar_end must be a free cell")
            for m in (self.markers, self.post_markers):
                if len(m) != h or any(len(row) != w for row in m):
                    raise GridError("marker layer shape mismatch")
                for r in range(h):
                    for c in range(w):
                        if not 0 <= m[r][c] <= MAX_MARKERS:
                            raise GridError(f"marker count out of range at ({r},{c})")
                        if m[r][c] and self.cells[r][c] == WALL:
                            raise GridError(f"markers on wall at ({r},{c})")

    @property
    def height(self) -> int:
        return len(self.cells)

    @property
    def width(self) -> int:
        return len(self.cells[0])

    def in_bounds(self, cell) -> bool:
        r, c = cell
        return 0 <= r < self.height and 0 <= c < self.width

    def is_free(self, cell) -> bool:
        return self.in_bounds(cell) and self.cells[cell[0]][cell[1]] == FREE

    def free_cells(self) -> int:
        return sum(row.count(FREE) for row in self.cells)

    def with_cells(self, cells) -> "Grid":
        return replace(self, cells=tuple(cells))

    # ---------------------------------------------------------------- JSON

    def to_json(self) -> dict:
        if self.dialect == dsl.MAZE:
            rows = [list(r) for r in self.cells]
            gr, gc = self.goal
            rows[gr][gc] = GOAL
            return {
                "dialect": self.dialect,
                "rows": ["".join(r) for r in rows],
                "avatar": self.avatar.to_json(),
            }
        return {
            "dialect": self.dialect,
            "pre": _karel_rows(self.cells, self.markers),
            "post": _karel_rows(self.cells, self.post_markers),
            "avatar": self.avatar.to_json(),
            "avatar_end": self.avatar_end.to_json(),
        }

    @classmethod
    def from_json(cls, d: dict) -> "Grid":
        dialect = d.get("dialect")
        try:
            if dialect == dsl.MAZE:
                rows = list(d["rows"])
                goals = [(r, c) for r, row in enumerate(rows) for c, ch in enumerate(row) if ch == GOAL]
                if len(goals) != 1:
                    raise GridError("maze needs exactly one 'G'")
                bad = set("".join(rows)) - {WALL, FREE, GOAL}
                if bad:
                    raise GridError(f"unexpected maze characters {sorted(bad)}")
                cells = tuple(r.replace(GOAL, FREE) for r in rows)
                return cls(dialect, cells, Pose.from_json(d["avatar"]), goal=goals[0])
            if dialect == dsl.KAREL:
                cells, pre = _parse_karel_rows(d["pre"])
                post_cells, post = _parse_karel_rows(d["post"])
                if post_cells != cells:
                    raise GridError("pre and post walls differ")
                return cls(
                    dialect,
                    cells,
                    Pose.from_json(d["avatar"]),
                    markers=pre,
                    post_markers=post,
                    avatar_end=Pose.from_json(d["avatar_end"]),
                )
        except (KeyError, TypeError, IndexError) as exc:
            raise GridError(f"malformed grid JSON: {exc!r}") from exc
        raise GridError(f"unknown dialect {dialect!r}")


def _karel_rows(cells, markers) -> list[str]:
    out = []
    for r, row in enumerate(cells):
        out.append("".join(WALL if ch == WALL else (str(markers[r][c]) if markers[r][c] else FREE)
                           for c, ch in enumerate(row)))
    return out


def _parse_karel_rows(rows):
    cells, markers = [], []
    for row in rows:
        crow, mrow = [], []
        for ch in row:
            if ch == WALL or ch == FREE:
                crow.append(ch)
                mrow.append(0)
            elif ch.isdigit():
                crow.append(FREE)
                mrow.append(int(ch))
            else:
                raise GridError(f"unexpected karel character {ch!r}")
        cells.append("".join(crow))
        markers.append(tuple(mrow))
    return tuple(cells), tuple(markers)


@dataclass(frozen=True)
class Task:
    vis: tuple[Grid, ...]
    store: frozenset[str]
    size_budget: int
    id: str = field(default="", compare=False)

    def __post_init__(self):
        if not self.vis:
            raise GridError("task needs at least one grid")
        if len({g.dialect for g in self.vis}) != 1:
            raise GridError("all grids of a task must share a dialect")
        if not self.store:
            raise GridError("store must be non-empty")
        if self.size_budget < 1:
            raise GridError("size budget must be >= 1")

    @property
    def n(self) -> int:
        return len(self.vis)

    @property
    def dialect(self) -> str:
        return self.vis[0].dialect

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "n": self.n,
            "grids": [g.to_json() for g in self.vis],
            "store": sorted(self.store),
            "size": self.size_budget,
        }

    @classmethod
    def from_json(cls, d: dict) -> "Task":
        grids = tuple(Grid.from_json(g) for g in d["grids"])
        if "n" in d and d["n"] != len(grids):
            raise GridError(f"n={d['n']} but {len(grids)} grids given")
        store = frozenset(d["store"])
        unknown = store - set(dsl.ACTIONS) - set(dsl.CONTROLS)
        if unknown:
            raise GridError(f"unknown store blocks {sorted(unknown)}")
        return cls(grids, store, int(d["size"]), str(d.get("id", "")))


# ------------------------------------------------------------ dissimilarity


def dissimilarity(a: Grid, b: Grid) -> int:
    """Hamming-style distance between two grids of the same dialect."""
    if a.dialect != b.dialect:
        raise GridError(f"dialect mismatch: {a.dialect} vs {b.dialect}")
    d = _layer_distance(a.cells, b.cells)
    d += (a.avatar.cell != b.avatar.cell) + (a.avatar.dir != b.avatar.dir)
    if a.dialect == dsl.MAZE:
        d += a.goal != b.goal
    else:
        d += _layer_distance(a.markers, b.markers)
        d += _layer_distance(a.post_markers, b.post_markers)
        d += (a.avatar_end.cell != b.avatar_end.cell) + (a.avatar_end.dir != b.avatar_end.dir)
    return d


def _layer_distance(x, y) -> int:
    """Mismatches on the overlap anchored at (0, 0) plus every cell outside it."""
    hx, wx, hy, wy = len(x), len(x[0]), len(y), len(y[0])
    h, w = min(hx, hy), min(wx, wy)
    d = sum(x[r][c] != y[r][c] for r in range(h) for c in range(w))
    return d + (hx * wx - h * w) + (hy * wy - h * w)


def task_dissimilarity(a: Task, b: Task) -> int:
    """Minimum-cost alignment of the fewer-grid task's grids onto distinct
    grids of the other task."""
    small, large = (a, b) if a.n <= b.n else (b, a)
    cost = np.array([[dissimilarity(g, h) for h in large.vis] for g in small.vis])
    rows, cols = linear_sum_assignment(cost)
    return int(cost[rows, cols].sum())


def task_dissimilarity_bruteforce(a: Task, b: Task) -> int:
    """Reference implementation of :func:`task_dissimilarity` by enumeration."""
    small, large = (a, b) if a.n <= b.n else (b, a)
    return min(
        sum(dissimilarity(g, large.vis[j]) for g, j in zip(small.vis, perm))
        for perm in itertools.permutations(range(large.n), small.n)
    )


# ------------------------------------------------------------------ quality


@dataclass(frozen=True)
class QualityConfig:
    w_coverage: float = 0.4
    w_trajectory: float = 0.3
    w_distinct: float = 0.2
    w_balance: float = 0.1
    threshold: float = 0.5


def grid_quality_features(code: dsl.Code, grid: Grid, max_steps: int = 1000) -> dict[str, float]:
    from .interpreter import ExecutionError, coverage, execute, trace

    result = execute(code, grid, max_steps)
    if result.outcome != "solved":
        raise ExecutionError(f"code does not solve grid: {result.outcome} {result.reason or ''}".strip())
    steps = trace(code, grid, max_steps).steps if result.actions else []
    moves = sum(1 for s in steps if s.action == "move")
    turns = sum(1 for s in steps if s.action in ("turnLeft", "turnRight"))
    visited = {grid.avatar.cell} | {s.grid_state.avatar.cell for s in steps}
    return {
        "coverage": coverage(code, [grid])[1],
        "trajectory": min(1.0, len(steps) / (grid.width * grid.height)),
        "distinct": len(visited) / grid.free_cells(),
        "balance": min(moves, turns) / max(moves, turns) if max(moves, turns) else 0.0,
    }


def quality(task: Task, solution: dsl.Code, config: QualityConfig = QualityConfig(),
            max_steps: int = 1000) -> tuple[float, bool]:
    """Weighted feature score averaged over the task's grids, and whether it
    clears ``config.threshold``."""
    scores = []
    for grid in task.vis:
        f = grid_quality_features(solution, grid, max_steps)
        scores.append(
            config.w_coverage * f["coverage"]
            + config.w_trajectory * f["trajectory"]
            + config.w_distinct * f["distinct"]
            + config.w_balance * f["balance"]
        )
    score = sum(scores) / len(scores)
    return score, score >= config.threshold
