import pytest
from hypothesis import given, strategies as st

from subtaskgen import dsl
from subtaskgen.fixtures import karel_grid, maze_grid
from subtaskgen.interpreter import (
    Crash,
    ExecutionError,
    GridWorld,
    Machine,
    Timeout,
    coverage,
    execute,
    replay,
    solves,
    trace,
)
from subtaskgen.world import Task

from strategies import codes, grids

CORRIDOR = maze_grid(["#######", "#....G#", "#######"], (1, 1, "E"))


def test_repeat_walks_corridor():
    code = dsl.parse("Run{Repeat(4){move}}")
    r = execute(code, CORRIDOR)
    assert r.solved and r.actions == 4 and r.final.avatar.cell == (1, 5)
    t = trace(code, CORRIDOR)
    assert t.m_all == 4
    assert [s.grid_state.avatar.col for s in t.steps] == [2, 3, 4, 5]


@pytest.mark.parametrize("src,outcome,reason", [
    ("Run{Repeat(6){move}}", "crashed", "wall"),
    ("Run{Repeat(3){move}}", "not_solved", None),
    ("Run{RepeatUntil(goal){turnLeft}}", "timeout", "step limit"),
    ("Run{While(pathAhead){If(pathLeft){move}}}", "timeout", "step limit"),
])
def test_outcomes(src, outcome, reason):
    r = execute(dsl.parse(src), CORRIDOR, max_steps=50)
    assert (r.outcome, r.reason) == (outcome, reason)


def test_karel_marker_crashes():
    empty = karel_grid(["...", "..."], (0, 0, "E"), dsl.parse("Run{}"))
    assert execute(dsl.parse("Run{pickMarker}"), empty).reason == "empty pick"
    full = karel_grid(["9..", "..."], (0, 0, "E"), dsl.parse("Run{}"))
    assert execute(dsl.parse("Run{putMarker}"), full).reason == "marker overflow"


def test_karel_solved_needs_markers_and_pose():
    code = dsl.parse("Run{move putMarker}")
    g = karel_grid(["...", "..."], (0, 0, "E"), code)
    assert execute(code, g).solved
    assert not execute(dsl.parse("Run{move}"), g).solved
    assert not execute(dsl.parse("Run{putMarker move}"), g).solved


def test_dialect_violation():
    with pytest.raises(dsl.DialectError):
        execute(dsl.parse("Run{putMarker}"), CORRIDOR)
    task = Task((CORRIDOR,), frozenset({"putMarker"}), 5)
    assert not solves(dsl.parse("Run{putMarker}"), task)


def test_solves_checks_store_and_size():
    code = dsl.parse("Run{Repeat(4){move}}")
    assert solves(code, Task((CORRIDOR,), frozenset({"Repeat", "move"}), 2))
    assert not solves(code, Task((CORRIDOR,), frozenset({"Repeat", "move"}), 1))
    assert not solves(code, Task((CORRIDOR,), frozenset({"move"}), 5))


def test_trace_validity_flags_on_h16(h16):
    task, code = h16
    t = trace(code, task.vis[0])
    assert t.m_all == 12
    valid = [s.tau for s in t.steps if s.terminated_inside is None]
    assert valid == [3, 6, 9, 12]
    assert all(s.terminated_inside == (0,) for s in t.steps if s.tau not in valid)
    # loop condition evaluations seen so far: one per completed iteration, plus the first
    assert [len(s.condition_log) for s in t.steps[:4]] == [1, 1, 2, 2]


def test_trace_requires_solution():
    with pytest.raises(ExecutionError):
        trace(dsl.parse("Run{move}"), CORRIDOR)
    with pytest.raises(ExecutionError):
        trace(dsl.parse("Run{Repeat(9){move}}"), CORRIDOR)


def test_trace_json_shape(h08):
    task, code = h08
    data = trace(code, task.vis[0]).to_json()
    assert data["code"] == dsl.serialize(code)
    assert [s["prefix"][-1]["action"] for s in data["steps"]] == ["move", "turnLeft", "move", "turnRight", "move"]


def test_coverage_fraction(sweep3):
    task, code = sweep3
    a, b, c = task.vis
    assert coverage(code, [a])[1] == pytest.approx(4 / 6)
    assert coverage(code, [a, b])[1] == pytest.approx(5 / 6)
    assert coverage(code, [a, b, c])[1] == 1.0
    on_goal = maze_grid(["G.", ".."], (0, 0, "E"))
    assert coverage(dsl.parse("Run{}"), [on_goal]) == (frozenset(), 1.0)


def test_coverage_requires_solution():
    with pytest.raises(ExecutionError):
        coverage(dsl.parse("Run{move}"), [CORRIDOR])


@given(st.data())
def test_replay_reproduces_recorded_actions(data):
    dialect = data.draw(st.sampled_from(dsl.DIALECTS))
    code = data.draw(codes(dialect, min_size=1))
    grid = data.draw(grids(dialect))
    world = GridWorld(grid)
    m = Machine(world, max_steps=60)
    try:
        m.run(code)
    except (Crash, Timeout):
        return
    assert replay(grid, m.actions) == world.snapshot()
    assert m.executed <= {p for p, _ in dsl.iter_blocks(code)}
