import math
from dataclasses import replace

import pytest
from hypothesis import given, strategies as st

from subtaskgen import dsl
from subtaskgen.metrics import (
    code_complexity,
    diversity_of,
    max_jump,
    normalized_diversity,
    progression_complexity,
    task_complexity,
)
from subtaskgen.progression import Progression, same_taskcode
from subtaskgen.world import Task

from conftest import eq1

complexities = st.lists(st.integers(1000, 5000), min_size=1, max_size=8)


def test_code_complexity_examples(h16):
    assert code_complexity(dsl.parse("Run{}")) == 1000
    assert code_complexity(dsl.parse("Run{Repeat(4){move}}")) == 2002
    assert code_complexity(h16[1]) == 2004
    assert code_complexity(dsl.parse("Run{Repeat(4){move}}"), kappa=10) == 22


def test_task_complexity(h16):
    task, code = h16
    deeper = dsl.parse("Run{RepeatUntil(goal){Repeat(1){turnLeft move turnRight}}}", dsl.MAZE)
    loose = Task(task.vis, task.store | {"Repeat"}, 10, task.id)
    assert task_complexity(loose, [code]) == 2004
    assert task_complexity(loose, [deeper, code]) == 2004
    with pytest.raises(ValueError):
        task_complexity(task, [])
    with pytest.raises(ValueError):
        task_complexity(task, [dsl.parse("Run{move}", dsl.MAZE)])


def test_max_jump_examples():
    assert max_jump([2004]) == 1004
    assert max_jump([1002, 1004, 2004]) == 1000
    assert max_jump([2004] * 5) == 1004
    # a later, lower item is measured against the empty program
    assert max_jump([2004, 1001]) == 1004
    with pytest.raises(ValueError):
        max_jump([])


def test_progression_complexity_of_baseline(h16):
    task, code = h16
    p = same_taskcode(task, code, 3)
    assert progression_complexity(p) == 1004
    assert normalized_diversity(p) == 0.0


@given(complexities)
def test_max_jump_matches_term_by_term_oracle(cs):
    assert max_jump(cs) == eq1(cs)


@given(complexities, st.data())
def test_max_jump_properties(cs, data):
    f = max_jump(cs)
    assert f >= 0
    # duplicating an existing item never raises the worst jump
    i = data.draw(st.integers(0, len(cs) - 1))
    j = data.draw(st.integers(i + 1, len(cs)))
    assert max_jump(cs[:j] + [cs[i]] + cs[j:]) <= f
    # the rise to the last item is shared by at most K jumps
    assert f >= math.ceil((cs[-1] - 1000) / len(cs))


@given(st.integers(1, 6), st.integers(0, 30), st.integers(1, 5000))
def test_complexity_monotone(depth, size, kappa):
    f = lambda d, s: kappa * d + s
    assert f(depth + 1, size) > f(depth, size) and f(depth, size + 1) > f(depth, size)


def _single(grid, tid):
    return Task((grid,), frozenset({"move"}), 1, tid)


def test_normalized_diversity_hand_computed(h16):
    task, code = h16
    ref = task.vis[0]
    a = replace(ref, goal=(1, 4))
    b = replace(ref, goal=(1, 3))
    ta, tb, tr = _single(a, "a"), _single(b, "b"), _single(ref, "r")
    # K = 2: 2/(K-1) * d(a,b) / (d(a,ref) + d(b,ref)) = 2 * 1 / 2
    assert diversity_of([ta, tb], tr) == 1.0
    # K = 3 with the reference last: pairs (b,a)=1, (r,a)=1, (r,b)=1; to ref 1+1+0
    assert diversity_of([ta, tb, tr], tr) == pytest.approx((2 / 2) * 3 / 2)
    p = Progression([(ta, code), (tb, code), (tr, code)], (tr, code))
    assert normalized_diversity(p) == pytest.approx(1.5)
    assert diversity_of([tr], tr) == 0.0
    assert diversity_of([tr, tr], tr) == 0.0


def test_diversity_accepts_custom_dissimilarity():
    calls = []

    def diss(a, b):
        calls.append((a, b))
        return abs(a - b)

    assert diversity_of([1, 3], 3, diss) == 2 * 2 / 2
    assert calls
