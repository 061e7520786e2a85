"""Hypothesis strategies for programs and grids."""

from hypothesis import strategies as st

from subtaskgen import dsl
from subtaskgen.dsl import Action, Code, Cond, If, IfElse, Repeat, RepeatUntil, While
from subtaskgen.world import Grid, Pose


def conds(dialect):
    names = sorted(dsl.DIALECT_CONDITIONS[dialect])
    neg = st.booleans() if dsl.DIALECT_NEGATION[dialect] else st.just(False)
    return st.builds(Cond, st.sampled_from(names), neg)


def blocks(dialect, max_leaves=8):
    actions = st.builds(Action, st.sampled_from(sorted(dsl.DIALECT_ACTIONS[dialect])))
    loop_conds = conds(dialect)

    def extend(inner):
        body = st.lists(inner, min_size=1, max_size=3).map(tuple)
        options = [
            st.builds(Repeat, st.integers(1, 5), body),
            st.builds(While, loop_conds, body),
            st.builds(If, loop_conds, body),
            st.builds(IfElse, loop_conds, body, body),
        ]
        if dialect == dsl.MAZE:
            options.append(st.builds(RepeatUntil, loop_conds, body))
        return st.one_of(options)

    return st.recursive(actions, extend, max_leaves=max_leaves)


def codes(dialect=None, min_size=0, max_size=4):
    if dialect is None:
        return st.sampled_from(dsl.DIALECTS).flatmap(lambda d: codes(d, min_size, max_size))
    return st.lists(blocks(dialect), min_size=min_size, max_size=max_size).map(
        lambda body: Code(tuple(body), dialect))


@st.composite
def grids(draw, dialect=None, max_side=6, shape=None):
    dialect = dialect or draw(st.sampled_from(dsl.DIALECTS))
    h, w = shape or (draw(st.integers(2, max_side)), draw(st.integers(2, max_side)))
    cells = [[draw(st.sampled_from("#..")) for _ in range(w)] for _ in range(h)]
    r, c = draw(st.integers(0, h - 1)), draw(st.integers(0, w - 1))
    cells[r][c] = "."
    rows = tuple("".join(row) for row in cells)
    avatar = Pose(r, c, draw(st.sampled_from("NESW")))
    if dialect == dsl.MAZE:
        free = [(i, j) for i in range(h) for j in range(w) if rows[i][j] == "."]
        return Grid(dsl.MAZE, rows, avatar, goal=draw(st.sampled_from(free)))
    markers = tuple(tuple(draw(st.integers(0, 3)) if rows[i][j] == "." else 0 for j in range(w))
                    for i in range(h))
    return Grid(dsl.KAREL, rows, avatar, markers=markers, post_markers=markers, avatar_end=avatar)
