"""Reduce a solution to the branches a subset of grids actually uses, and
build grid-subset subtasks from the result."""

from __future__ import annotations

from . import dsl
from .dsl import Action, Code, IfElse, Repeat
from .interpreter import ExecutionError, coverage, execute
from .world import Task


class ReductionError(RuntimeError):
    """The reduced program failed to solve a grid it was reduced for."""


def _reduce_blocks(blocks, prefix, executed, offset=0) -> tuple:
    out = []
    for i, b in enumerate(blocks):
        path = prefix + (offset + i,)
        if path not in executed:
            continue
        out.extend(_reduce_block(b, path, executed))
    return tuple(out)


def _reduce_block(b, path, executed) -> tuple:
    if isinstance(b, Action):
        return (b,)
    if isinstance(b, IfElse):
        n_then = len(b.body)
        then_taken = path + (0,) in executed
        else_taken = path + (n_then,) in executed
        then_r = _reduce_blocks(b.body, path, executed)
        else_r = _reduce_blocks(b.orelse, path, executed, n_then)
        if then_taken and else_taken:
            # a branch that reduces to nothing is kept as written: turning
            # the block into an If would add a block type the store may lack
            return (IfElse(b.cond, then_r or b.body, else_r or b.orelse),)
        return then_r if then_taken else else_r
    body_r = _reduce_blocks(b.body, path, executed)
    if not body_r:
        # body never ran, or ran without leaving anything that acts
        return ()
    if isinstance(b, Repeat):
        return (Repeat(b.count, body_r),)
    return (type(b)(b.cond, body_r),)


def red_code(grids, task: Task, solution: Code) -> Code:
    """Remove branches of ``solution`` that never execute on ``grids``.

    Deleted: If blocks whose body never runs, While/RepeatUntil loops never
    entered. An IfElse where only one branch runs is replaced by that
    branch. Repeat blocks are kept. The result is checked to solve every
    grid in ``grids``.
    """
    grids = list(grids)
    if not grids:
        raise ValueError("grid subset must be non-empty")
    try:
        executed, _ = coverage(solution, grids)
    except ExecutionError as exc:
        raise ExecutionError(f"solution does not solve the grid subset: {exc}") from exc
    reduced = Code(_reduce_blocks(solution.body, (), executed), solution.dialect)
    for g in grids:
        if not execute(reduced, g).solved:
            raise ReductionError(f"reduced code {dsl.serialize(reduced)} fails on a grid")
    return reduced


def subtask_from_grids(grids, task: Task, solution: Code, task_id: str = "") -> tuple[Task, Code]:
    reduced = red_code(grids, task, solution)
    # an all-inactive reduction (Run{}) still needs a non-empty store
    store = dsl.blocks(reduced) or task.store
    sub = Task(tuple(grids), store, max(dsl.size(reduced), 1), task_id)
    return sub, reduced
