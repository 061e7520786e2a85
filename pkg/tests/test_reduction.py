import itertools

import pytest

from subtaskgen import dsl
from subtaskgen.fixtures import maze_grid
from subtaskgen.interpreter import ExecutionError, execute
from subtaskgen.reduction import red_code, subtask_from_grids
from subtaskgen.world import Task

OPEN = ["#####", "#...#", "#...#", "#####"]


def task_of(code, *grids):
    return Task(tuple(grids), dsl.blocks(code), dsl.size(code), "t")


def test_sweep_subsets(sweep3):
    task, code = sweep3
    a, b, c = task.vis
    assert dsl.serialize(red_code([a], task, code)) == "Run{While(frontIsClear){move}}"
    assert dsl.serialize(red_code([a, b], task, code)) == \
        "Run{While(frontIsClear){move If(markersPresent){pickMarker}}}"
    assert red_code([a, b, c], task, code) == code


def test_ifelse_single_branch_is_inlined():
    code = dsl.parse("Run{IfElse(pathAhead){move}{turnLeft} move}", dsl.MAZE)
    g = maze_grid(["#####", "#..G#", "#####"], (1, 1, "E"))
    assert dsl.serialize(red_code([g], task_of(code, g), code)) == "Run{move move}"


def test_ifelse_both_branches_kept():
    code = dsl.parse("Run{Repeat(2){IfElse(pathAhead){move}{turnRight}}}", dsl.MAZE)
    g = maze_grid(["####", "#.G#", "####"], (1, 1, "E"))
    # first iteration moves, second turns at the wall
    assert execute(code, g).solved
    assert red_code([g], task_of(code, g), code) == code


def test_unentered_loops_and_untaken_ifs_vanish():
    code = dsl.parse("Run{While(pathLeft){turnLeft} If(pathRight){turnRight} Repeat(2){move}}", dsl.MAZE)
    g = maze_grid(["#####", "#..G#", "#####"], (1, 1, "E"))
    assert dsl.serialize(red_code([g], task_of(code, g), code)) == "Run{Repeat(2){move}}"


def test_subtask_store_and_size(sweep3):
    task, code = sweep3
    sub, reduced = subtask_from_grids(task.vis[:1], task, code, "sub")
    assert sub.store == {"While", "move"} and sub.size_budget == 2 and sub.n == 1 and sub.id == "sub"


def test_empty_reduction_keeps_a_store():
    code = dsl.parse("Run{If(pathAhead){move}}", dsl.MAZE)
    g = maze_grid(["G#", ".."], (0, 0, "E"))
    sub, reduced = subtask_from_grids([g], task_of(code, g), code)
    assert reduced.body == () and sub.store == task_of(code, g).store and sub.size_budget == 1


def test_subset_must_be_solved():
    code = dsl.parse("Run{move}", dsl.MAZE)
    g = maze_grid(["G.", ".."], (0, 0, "E"))
    with pytest.raises(ExecutionError):
        red_code([g], task_of(code, g), code)
    with pytest.raises(ValueError):
        red_code([], task_of(code, g), code)


def test_reduction_properties_on_generated_tasks(small_karel, small_maze):
    for task, code in small_karel + small_maze:
        for k in range(1, task.n + 1):
            for subset in itertools.combinations(task.vis, k):
                sub, reduced = subtask_from_grids(subset, task, code)
                assert all(execute(reduced, g).solved for g in subset)
                assert sub.store <= task.store
                assert dsl.size(reduced) <= dsl.size(code)
                assert dsl.depth(reduced) <= dsl.depth(code)
        # all grids together keep every block because generated solutions have full coverage
        assert red_code(task.vis, task, code) == code
