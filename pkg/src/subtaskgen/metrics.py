"""Scalar measures over codes, tasks and progressions."""

from __future__ import annotations

from typing import Sequence

from . import dsl
from .interpreter import solves
from .world import Task, task_dissimilarity

KAPPA = 1000


def code_complexity(code: dsl.Code, kappa: int = KAPPA) -> int:
    return kappa * dsl.depth(code) + dsl.size(code)


def task_complexity(task: Task, solutions: Sequence[dsl.Code], kappa: int = KAPPA) -> int:
    """Minimum code complexity over a representative set of solutions."""
    if not solutions:
        raise ValueError("need at least one solution code")
    for code in solutions:
        if not solves(code, task):
            raise ValueError(f"{dsl.serialize(code)} does not solve task {task.id!r}")
    return min(code_complexity(c, kappa) for c in solutions)


def max_jump(complexities: Sequence[int], kappa: int = KAPPA) -> int:
    """Worst complexity jump of a sequence: for each item the smallest rise
    over any earlier item (the empty program, complexity ``kappa``, always
    counts as earlier), maximised over items."""
    worst = None
    for k, ck in enumerate(complexities):
        rise = min([ck - kappa] + [ck - c for c in complexities[:k]])
        worst = rise if worst is None else max(worst, rise)
    if worst is None:
        raise ValueError("empty progression")
    return worst


def progression_complexity(progression, kappa: int = KAPPA) -> int:
    return max_jump([code_complexity(c, kappa) for _, c in progression.items], kappa)


def normalized_diversity(progression) -> float:
    """2/(K-1) times the pairwise dissimilarity among subtasks divided by
    their total dissimilarity to the reference; 0 for K = 1 or when the
    denominator vanishes."""
    tasks = [t for t, _ in progression.items]
    return diversity_of(tasks, progression.ref[0])


def diversity_of(tasks: Sequence[Task], ref: Task, diss=task_dissimilarity) -> float:
    K = len(tasks)
    if K < 2:
        return 0.0
    between = sum(diss(tasks[i], tasks[j]) for i in range(K) for j in range(i))
    to_ref = sum(diss(t, ref) for t in tasks)
    if to_ref == 0:
        return 0.0
    return (2 / (K - 1)) * between / to_ref
