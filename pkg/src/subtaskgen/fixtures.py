"""Hand-authored reference tasks used by the demos, CLI examples and tests.

``h08`` and ``h16`` are small maze tasks whose solutions have task
complexities 1005 (depth 1, size 5) and 2004 (depth 2, size 4).
``karel_sweep3`` and ``karel_sweep6`` are multi-grid Karel tasks where
different grids exercise different branches of one solution.
"""

from __future__ import annotations

from dataclasses import replace

from . import dsl
from .interpreter import GridWorld, Machine
from .world import Grid, Task


def maze_grid(rows: list[str], avatar: tuple[int, int, str]) -> Grid:
    return Grid.from_json({"dialect": "maze", "rows": rows,
                           "avatar": {"r": avatar[0], "c": avatar[1], "dir": avatar[2]}})


def karel_grid(pre_rows: list[str], avatar: tuple[int, int, str], code: dsl.Code) -> Grid:
    """A Karel grid whose post-state is whatever ``code`` produces."""
    stub = Grid.from_json({"dialect": "karel", "pre": pre_rows, "post": pre_rows,
                           "avatar": {"r": avatar[0], "c": avatar[1], "dir": avatar[2]},
                           "avatar_end": {"r": avatar[0], "c": avatar[1], "dir": avatar[2]}})
    world = GridWorld(stub)
    Machine(world).run(code)
    end = world.snapshot()
    return replace(stub, post_markers=end.markers, avatar_end=end.avatar)


def task_for(grids, code: dsl.Code, task_id: str, extra_store=()) -> Task:
    return Task(tuple(grids), dsl.blocks(code) | frozenset(extra_store), dsl.size(code), task_id)


H08_CODE = "Run{move turnLeft move turnRight move}"
H16_CODE = "Run{RepeatUntil(goal){turnLeft move turnRight}}"
SWEEP_CODE = "Run{While(frontIsClear){move If(markersPresent){pickMarker}} If(rightIsClear){turnRight}}"


def h08() -> tuple[Task, dsl.Code]:
    code = dsl.parse(H08_CODE, "maze")
    grid = maze_grid(
        ["#####",
         "##.G#",
         "#..##",
         "#####"],
        (2, 1, "E"),
    )
    return task_for([grid], code, "H08"), code


def h16() -> tuple[Task, dsl.Code]:
    code = dsl.parse(H16_CODE, "maze")
    grid = maze_grid(
        ["######",
         "#G....",
         "######"],
        (1, 5, "N"),
    )
    return task_for([grid], code, "H16"), code


def _sweep_grids(code):
    # A: clean corridor, right side blocked at the end -> While/move only
    a = karel_grid(["#######",
                    "#.....#",
                    "#######"], (1, 1, "E"), code)
    # B: markers along the corridor -> adds If/pickMarker
    b = karel_grid(["#######",
                    "#.1.2.#",
                    "#######"], (1, 1, "E"), code)
    # C: markers and an opening on the right at the end -> adds turnRight
    c = karel_grid(["#######",
                    "#..1..#",
                    "#####.#",
                    "#######"], (1, 1, "E"), code)
    return [a, b, c]


def karel_sweep3() -> tuple[Task, dsl.Code]:
    code = dsl.parse(SWEEP_CODE, "karel")
    return task_for(_sweep_grids(code), code, "KSWEEP3"), code


def karel_sweep6() -> tuple[Task, dsl.Code]:
    code = dsl.parse(SWEEP_CODE, "karel")
    a, b, c = _sweep_grids(code)
    d = karel_grid(["########",
                    "#......#",
                    "########"], (1, 1, "E"), code)
    e = karel_grid(["######",
                    "#.3..#",
                    "#....#",
                    "######"], (1, 1, "E"), code)
    f = karel_grid(["#####",
                    "#.1.#",
                    "###.#",
                    "#####"], (1, 1, "E"), code)
    return task_for([c, a, e, b, f, d], code, "KSWEEP6"), code


ALL = {"H08": h08, "H16": h16, "KSWEEP3": karel_sweep3, "KSWEEP6": karel_sweep6}
