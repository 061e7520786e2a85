import json

import pytest

from subtaskgen import dsl
from subtaskgen.fixtures import karel_grid, maze_grid
from subtaskgen.interpreter import execute, trace
from subtaskgen.progression import filter_trace
from subtaskgen.symexec import Unsat, apply_constraints, constraints_of, realize_grid
from subtaskgen.world import dissimilarity


def test_h16_prefixes_relocate_goal(h16):
    task, code = h16
    ref = task.vis[0]
    t = trace(code, ref)
    goals = {}
    for step, prefix in filter_trace(t, code):
        g = realize_grid(prefix, step, ref)
        goals[step.tau] = (g.goal, dissimilarity(g, ref))
    assert goals == {3: ((1, 4), 1), 6: ((1, 3), 1), 9: ((1, 2), 1), 12: ((1, 1), 0)}


def test_straight_line_prefixes():
    code = dsl.parse("Run{move move move}", dsl.MAZE)
    ref = maze_grid(["######", "#...G#", "######"], (1, 1, "E"))
    t = trace(code, ref)
    for step in t.steps:
        prefix = dsl.Code(code.body[:step.tau], dsl.MAZE)
        g = realize_grid(prefix, step, ref)
        assert g.goal == (1, 1 + step.tau)
        assert g.cells == ref.cells


def test_conflicting_prefix_is_unsat():
    ref = maze_grid(["#####", "#..G#", "#####"], (1, 1, "E"))
    code = dsl.parse("Run{If(pathAhead){turnLeft} move}", dsl.MAZE)
    assert isinstance(realize_grid(code, ["move"], ref), Unsat)
    assert not realize_grid(code, ["move"], ref)


def test_rerolled_loop_gets_a_stopping_wall():
    code = dsl.parse("Run{While(frontIsClear){move}}", dsl.KAREL)
    ref = karel_grid(["#######", "#.....#", "#######"], (1, 1, "E"), code)
    g = realize_grid(code, ["move", "move"], ref)
    assert g.cells[1] == "#...#.#"
    assert g.avatar_end.cell == (1, 3)
    assert execute(code, g).solved


def test_marker_conditions_bound_counts():
    code = dsl.parse("Run{If(markersPresent){pickMarker} move}", dsl.KAREL)
    ref = karel_grid(["2..", "..."], (0, 0, "E"), code)
    cs = constraints_of(code, ["move"], ref)
    assert cs.marker_hi[(0, 0)] == 0
    g = apply_constraints(cs, ref)
    assert g.markers[0][0] == 0 and execute(code, g).solved
    cs = constraints_of(code, ["pickMarker", "move"], ref)
    assert cs.marker_lo[(0, 0)] == 1 and cs.marker_delta == {(0, 0): -1}
    g = apply_constraints(cs, ref)
    assert (g.markers[0][0], g.post_markers[0][0]) == (2, 1)


def test_step_must_belong_to_grid(h16):
    task, code = h16
    t = trace(code, task.vis[0])
    other = maze_grid(["######", "#G....", "######"], (1, 4, "N"))
    with pytest.raises(ValueError):
        constraints_of(code, t.steps[2], other)


def test_constraint_json_is_stable(h16):
    task, code = h16
    t = trace(code, task.vis[0])
    cs = constraints_of(code, t.steps[5], task.vis[0])
    text = cs.dumps()
    assert text == constraints_of(code, t.steps[5], task.vis[0]).dumps()
    data = json.loads(text)
    # only the goal is ever tested, so no wall is constrained
    assert data["goal"] == [1, 3] and data["walls"] == []
    assert [1, 3] in data["free"] and [1, 5] in data["free"]


def test_realized_grids_replay_their_prefix(single_grid_tasks):
    realized = 0
    for task, code in single_grid_tasks:
        ref = task.vis[0]
        t = trace(code, ref)
        for step, prefix in filter_trace(t, code):
            g = realize_grid(prefix, step, ref)
            if isinstance(g, Unsat):
                continue
            realized += 1
            r = execute(prefix, g)
            assert r.solved and r.actions == step.tau
            assert g.avatar == ref.avatar
    assert realized > 0
