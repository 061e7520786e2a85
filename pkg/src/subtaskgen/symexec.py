"""Grid realization for prefix programs.

A prefix program must reproduce a fixed action sequence (the avatar's
trajectory from the reference trace). We run it symbolically: cell kinds
and initial marker counts start unknown, each condition test on an unknown
cell becomes a choice point, and every choice point prefers the reference
grid's value. Choices are explored depth-first in a fixed order, so the
first consistent assignment is both deterministic and close to the
reference. Unconstrained cells keep their reference values.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

from . import dsl
from .dsl import Code
from .interpreter import Machine, Timeout, TraceStep, execute, replay
from .world import FREE, MAX_MARKERS, WALL, Grid, Pose

DEFAULT_SEARCH_BUDGET = 256


class SymexecError(RuntimeError):
    """A realized grid failed its interpreter post-check."""


@dataclass(frozen=True)
class Unsat:
    reason: str
    exhausted: bool = False  # search budget ran out before a verdict

    def __bool__(self) -> bool:
        return False


@dataclass
class CellConstraintSet:
    free: set = field(default_factory=set)
    walls: set = field(default_factory=set)
    # bounds on the initial marker count per cell (inclusive)
    marker_lo: dict = field(default_factory=dict)
    marker_hi: dict = field(default_factory=dict)
    # net marker change the prefix applies per cell
    marker_delta: dict = field(default_factory=dict)
    goal: tuple | None = None
    avatar_end: Pose | None = None

    @property
    def cells(self) -> set:
        return self.free | self.walls | set(self.marker_lo) | set(self.marker_hi)

    def to_json(self) -> dict:
        def cells(s):
            return sorted([list(c) for c in s])

        return {
            "free": cells(self.free),
            "walls": cells(self.walls),
            "markers": [
                {"cell": list(c), "lo": self.marker_lo.get(c, 0), "hi": self.marker_hi.get(c, MAX_MARKERS),
                 "delta": self.marker_delta.get(c, 0)}
                for c in sorted(set(self.marker_lo) | set(self.marker_hi) | set(self.marker_delta))
            ],
            "goal": None if self.goal is None else list(self.goal),
            "avatar_end": None if self.avatar_end is None else self.avatar_end.to_json(),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


class _Infeasible(Exception):
    pass


class _SymbolicWorld:
    def __init__(self, ref: Grid, target: list[str], goal, decisions: list[bool]):
        self.ref = ref
        self.target = target
        self.goal = goal
        self.decisions = decisions
        self.trail: list[tuple[bool, bool]] = []  # (value taken, preferred value)
        self.pose = ref.avatar
        self.k = 0
        self.kind: dict = {ref.avatar.cell: False}  # cell -> is_wall
        self.lo: dict = {}
        self.hi: dict = {}
        self.delta: dict = {}

    def _decide(self, preferred: bool) -> bool:
        i = len(self.trail)
        v = self.decisions[i] if i < len(self.decisions) else preferred
        self.trail.append((v, preferred))
        return v

    def _is_wall(self, cell) -> bool:
        if not self.ref.in_bounds(cell):
            return True
        if cell not in self.kind:
            self.kind[cell] = self._decide(self.ref.cells[cell[0]][cell[1]] == WALL)
        return self.kind[cell]

    def _bounds(self, cell) -> tuple[int, int]:
        return self.lo.get(cell, 0), self.hi.get(cell, MAX_MARKERS)

    def _ref_markers(self, cell) -> int:
        return self.ref.markers[cell[0]][cell[1]] if self.ref.markers is not None else 0

    def _markers_present(self, cell) -> bool:
        lo, hi = self._bounds(cell)
        d = self.delta.get(cell, 0)
        need = 1 - d  # present iff initial count >= need
        if lo >= need:
            return True
        if hi < need:
            return False
        preferred = min(max(self._ref_markers(cell), lo), hi) >= need
        if self._decide(preferred):
            self.lo[cell] = need
            return True
        self.hi[cell] = need - 1
        return False

    def test(self, cond) -> bool:
        name, p = cond.name, self.pose
        if name in ("pathAhead", "frontIsClear"):
            v = not self._is_wall(p.ahead(0))
        elif name in ("pathLeft", "leftIsClear"):
            v = not self._is_wall(p.ahead(-1))
        elif name in ("pathRight", "rightIsClear"):
            v = not self._is_wall(p.ahead(1))
        elif name == "goal":
            v = p.cell == self.goal
        elif name == "markersPresent":
            v = self._markers_present(p.cell)
        elif name == "noMarkersPresent":
            v = not self._markers_present(p.cell)
        else:
            raise dsl.DialectError(f"condition {name} undefined")
        return not v if cond.negated else v

    def act(self, name: str) -> None:
        if self.k >= len(self.target) or self.target[self.k] != name:
            raise _Infeasible()
        self.k += 1
        p = self.pose
        cell = p.cell
        if name == "move":
            nxt = p.ahead(0)
            if not self.ref.in_bounds(nxt) or self.kind.get(nxt) is True:
                raise _Infeasible()
            self.kind[nxt] = False
            self.pose = Pose(nxt[0], nxt[1], p.dir)
        elif name == "turnLeft":
            self.pose = p.turned(-1)
        elif name == "turnRight":
            self.pose = p.turned(1)
        elif name in ("pickMarker", "putMarker"):
            d = self.delta.get(cell, 0)
            lo, hi = self._bounds(cell)
            if name == "pickMarker":
                lo = max(lo, 1 - d)
                self.delta[cell] = d - 1
            else:
                hi = min(hi, MAX_MARKERS - 1 - d)
                self.delta[cell] = d + 1
            if lo > hi:
                raise _Infeasible()
            self.lo[cell], self.hi[cell] = lo, hi


def _final_cell(ref: Grid, actions: list[str]) -> tuple[int, int]:
    p = ref.avatar
    for a in actions:
        if a == "move":
            r, c = p.ahead(0)
            p = Pose(r, c, p.dir)
        elif a == "turnLeft":
            p = p.turned(-1)
        elif a == "turnRight":
            p = p.turned(1)
    return p.cell


def _target_of(step: TraceStep | list) -> list[str]:
    if isinstance(step, TraceStep):
        return [a for a, _ in step.command_prefix]
    return [a if isinstance(a, str) else a[0] for a in step]


def constraints_of(code: Code, step, ref_grid: Grid,
                   budget: int = DEFAULT_SEARCH_BUDGET) -> CellConstraintSet | Unsat:
    """Cell constraints under which ``code`` performs exactly the actions of
    ``step`` (a trace step or a list of action names) starting from
    ``ref_grid``'s avatar pose."""
    dsl.check_dialect(code, ref_grid.dialect)
    target = _target_of(step)
    if isinstance(step, TraceStep):
        try:
            reached = replay(ref_grid, target)
        except Exception as exc:
            raise ValueError(f"trace step does not replay on the reference grid: {exc}") from exc
        if reached != step.grid_state:
            raise ValueError("trace step does not belong to the reference grid")
    goal = _final_cell(ref_grid, target) if ref_grid.dialect == dsl.MAZE else None

    decisions: list[bool] = []
    for _ in range(budget):
        world = _SymbolicWorld(ref_grid, target, goal, decisions)
        try:
            Machine(world, max_steps=len(target) + 1).run(code)
            if world.k != len(target):
                raise _Infeasible()
        except (_Infeasible, Timeout):
            # flip the deepest choice that still has an untried alternative
            trail = world.trail
            j = len(trail) - 1
            while j >= 0 and trail[j][0] != trail[j][1]:
                j -= 1
            if j < 0:
                return Unsat("no grid assignment reproduces the trajectory")
            decisions = [v for v, _ in trail[:j]] + [not trail[j][1]]
            continue
        cs = CellConstraintSet(
            free={c for c, w in world.kind.items() if not w},
            walls={c for c, w in world.kind.items() if w},
            marker_lo=dict(world.lo),
            marker_hi=dict(world.hi),
            marker_delta={c: d for c, d in world.delta.items() if d},
            goal=goal,
            avatar_end=world.pose if ref_grid.dialect == dsl.KAREL else None,
        )
        return cs
    return Unsat(f"search budget of {budget} runs exhausted", exhausted=True)


def apply_constraints(cs: CellConstraintSet, ref: Grid) -> Grid:
    rows = [list(r) for r in ref.cells]
    for r, c in cs.free:
        rows[r][c] = FREE
    for r, c in cs.walls:
        rows[r][c] = WALL
    cells = tuple("".join(r) for r in rows)
    if ref.dialect == dsl.MAZE:
        return replace(ref, cells=cells, goal=cs.goal)
    pre = [list(r) for r in ref.markers]
    for r, c in cs.walls:
        pre[r][c] = 0
    for cell in set(cs.marker_lo) | set(cs.marker_hi):
        r, c = cell
        pre[r][c] = min(max(pre[r][c], cs.marker_lo.get(cell, 0)), cs.marker_hi.get(cell, MAX_MARKERS))
    post = [row[:] for row in pre]
    for (r, c), d in cs.marker_delta.items():
        post[r][c] += d
    return replace(
        ref,
        cells=cells,
        markers=tuple(tuple(r) for r in pre),
        post_markers=tuple(tuple(r) for r in post),
        avatar_end=cs.avatar_end,
    )


def realize_grid(code: Code, step, ref_grid: Grid,
                 budget: int = DEFAULT_SEARCH_BUDGET) -> Grid | Unsat:
    """Minimally modified copy of ``ref_grid`` on which ``code`` performs
    the step's action sequence and solves the grid."""
    cs = constraints_of(code, step, ref_grid, budget)
    if isinstance(cs, Unsat):
        return cs
    grid = apply_constraints(cs, ref_grid)
    result = execute(code, grid, max_steps=len(_target_of(step)) + 1)
    if not result.solved or result.actions != len(_target_of(step)):
        raise SymexecError(
            f"realized grid fails post-check for {dsl.serialize(code)}: {result.outcome}"
        )
    return grid
