"""Progression synthesis.

* :func:`synthesize_single` decomposes a single-grid task along the
  execution trace of its solution: trace, filter prefixes into programs,
  realize a grid for each program, then pick a K'-subsequence.
* :func:`synthesize_grids` introduces the grids of a multi-grid task one at
  a time, reducing the solution to the branches the grids seen so far need.
* :func:`synthesize` chains the two.
* :func:`same_taskcode` and :func:`same_code` are the baselines.
"""

from __future__ import annotations

import itertools
import logging
import random
from dataclasses import dataclass, field, replace
from functools import lru_cache

from . import dsl
from .dsl import Action, Code, If, IfElse, Repeat
from .interpreter import Body, Node, Trace, TraceStep, execute, solves, trace
from .metrics import KAPPA, code_complexity, diversity_of, max_jump
from .reduction import _reduce_blocks, subtask_from_grids
from .symexec import DEFAULT_SEARCH_BUDGET, Unsat, realize_grid
from .world import FREE, WALL, QualityConfig, Task, dissimilarity, quality, task_dissimilarity

log = logging.getLogger(__name__)

METHODS = ("progressyn", "progressyn_grids", "same_taskcode", "same_code")

# quality scores are compared as integers at this resolution so that the
# tie-breaking sums are exact
_Q_SCALE = 10**6
_MAX_COOPTIMAL = 2000


class SynthesisError(RuntimeError):
    """No progression satisfies the request (e.g. too few candidates)."""

    def __init__(self, message: str, report: dict | None = None):
        super().__init__(message)
        self.report = report or {}


@dataclass(frozen=True)
class SynthesisConfig:
    k_prime: int = 4
    kappa: int = KAPPA
    max_steps: int = 1000
    quality: QualityConfig = QualityConfig()
    seed: int = 0
    greedy_threshold: int = 6
    search_budget: int = DEFAULT_SEARCH_BUDGET
    same_code_mutations: int = 3
    same_code_retries: int = 20

    def __post_init__(self):
        if self.k_prime < 1:
            raise ValueError("k_prime must be >= 1")
        if self.kappa < 1:
            raise ValueError("kappa must be >= 1")


@dataclass
class Progression:
    items: list  # [(Task, Code)], last item is the reference pair
    ref: tuple
    report: dict = field(default_factory=dict)

    @property
    def budget(self) -> int:
        return len(self.items)

    def check(self, max_steps: int = 1000) -> None:
        """Raise AssertionError unless the progression invariants hold."""
        ref_task, ref_code = self.ref
        assert self.items, "empty progression"
        last_t, last_c = self.items[-1]
        assert last_t == ref_task and last_c == ref_code, "last item is not the reference"
        for t, c in self.items:
            assert solves(c, t, max_steps), f"{dsl.serialize(c)} does not solve its subtask"
            assert t.n <= ref_task.n, "subtask has more grids than the reference"
            assert t.store <= ref_task.store, "subtask store exceeds reference store"

    def to_json(self, config: SynthesisConfig = SynthesisConfig()) -> dict:
        ref_task = self.ref[0]
        items = []
        for k, (t, c) in enumerate(self.items, 1):
            score, high = quality(t, c, config.quality, config.max_steps)
            items.append({
                "k": k,
                "task": t.to_json(),
                "code": dsl.serialize(c),
                "complexity": code_complexity(c, config.kappa),
                "quality": round(score, 6),
                "high_quality": high,
                "dissimilarity_to_ref": task_dissimilarity(t, ref_task),
            })
        return {"K": self.budget, "items": items, "report": self.report}


# ------------------------------------------------------------ Stage 2: filter


def _conditional_counts(bodies) -> dict:
    counts: dict = {}

    def walk(items):
        for node in items:
            if node.branch is not None:
                key = (node.path, node.branch)
                counts[key] = counts.get(key, 0) + 1
            for b in node.bodies:
                walk(b.items)

    for b in bodies:
        walk(b.items)
    return counts


def _executed_paths(bodies) -> set:
    out: set = set()

    def walk(items):
        for node in items:
            out.add(node.path)
            for b in node.bodies:
                walk(b.items)

    for b in bodies:
        walk(b.items)
    return out


def _rerolls(bodies) -> bool:
    """A loop is kept as a loop only if its body ran more than once; with
    conditionals inside, only if some branch outcome occurred more than
    once."""
    if len(bodies) < 2:
        return False
    counts = _conditional_counts(bodies)
    return not counts or max(counts.values()) >= 2


def _gen_loop(node: Node, bodies) -> list:
    if not bodies:
        return []
    b = node.block
    if _rerolls(bodies):
        merged = _reduce_blocks(b.body, node.path, _executed_paths(bodies))
        if not merged:
            return []
        if isinstance(b, Repeat):
            return [Repeat(len(bodies), merged)]
        return [type(b)(b.cond, merged)]
    out = []
    for body in bodies:
        out.extend(_gen_items(body.items))
    return out


def _gen_node(node: Node) -> list:
    b = node.block
    if isinstance(b, Action):
        return [b]
    if isinstance(b, If):
        if not node.branch:
            return []
        body = _gen_items(node.bodies[0].items)
        return [If(b.cond, tuple(body))] if body else []
    if isinstance(b, IfElse):
        return _gen_items(node.bodies[0].items)
    return _gen_loop(node, node.bodies)


def _gen_items(items) -> list:
    out = []
    for node in items:
        out.extend(_gen_node(node))
    return out


def prefix_code(root: Body, tau: int, dialect: str | None = None) -> Code:
    """Program for the first ``tau`` actions of a recorded execution, using
    the branches executed so far and re-rolling loops per :func:`_rerolls`."""
    out = []
    for node in root.items:
        if node.start >= tau:
            break
        if node.last is not None and node.last > tau:
            # the loop being cut: keep the iterations that started in time
            out.extend(_gen_loop(node, [b for b in node.bodies if b.start < tau]))
        else:
            out.extend(_gen_node(node))
    return Code(tuple(out), dialect)


def filter_trace(t: Trace, solution: Code) -> list[tuple[TraceStep, Code]]:
    """Drop steps that stop inside a loop/conditional body and turn the rest
    into programs."""
    out = []
    for step in t.steps:
        if step.terminated_inside is not None:
            continue
        out.append((step, prefix_code(t.root, step.tau, solution.dialect)))
    return out


# ------------------------------------------------------------- Stage 3: lift


def lift_grids(filtered, ref_task: Task, ref_code: Code,
               config: SynthesisConfig = SynthesisConfig()) -> tuple[list, dict]:
    """Realize a grid for every filtered program. Returns the surviving
    (Task, Code) pairs and a drop report. The full-trace element is the
    reference pair itself."""
    ref_grid = ref_task.vis[0]
    out, drops = [], {"unsat": 0, "timeout": 0}
    last_tau = filtered[-1][0].tau if filtered else None
    for step, code in filtered:
        if step.tau == last_tau:
            out.append((ref_task, ref_code))
            continue
        grid = realize_grid(code, step, ref_grid, config.search_budget)
        if isinstance(grid, Unsat):
            drops["timeout" if grid.exhausted else "unsat"] += 1
            continue
        sub = Task((grid,), dsl.blocks(code), dsl.size(code), f"{ref_task.id}@{step.tau}")
        out.append((sub, code))
    return out, drops


# --------------------------------------------------------- Stage 4: select


def _quality_int(task, code, config) -> int:
    return round(quality(task, code, config.quality, config.max_steps)[0] * _Q_SCALE)


def select_subsequence(candidates, k_prime: int,
                       config: SynthesisConfig = SynthesisConfig()) -> Progression:
    """Pick an order-preserving ``k_prime``-subsequence ending at the last
    candidate that minimises the worst complexity jump.

    Ties are broken by higher total quality, then lower total dissimilarity
    to the reference, then higher normalized diversity, then the
    lexicographically smallest index tuple.
    """
    M = len(candidates)
    if M < k_prime:
        raise SynthesisError(f"only {M} candidates for k'={k_prime}")
    ref_task, ref_code = candidates[-1]
    kappa = config.kappa
    comp = [code_complexity(c, kappa) for _, c in candidates]

    # states: (last index, picks, running max complexity) -> best worst-jump
    # the running max is what every later jump is measured against
    def successors(j, cnt, m):
        remaining = k_prime - cnt - 1
        lo = j + 1
        hi = M - 1 - remaining
        if remaining == 0:
            lo = M - 1
        for nj in range(max(lo, 0), hi + 1):
            if cnt + 1 < k_prime and nj == M - 1:
                continue
            yield nj, comp[nj] - m, max(m, comp[nj])

    start = (-1, 0, kappa)
    best = {start: float("-inf")}
    layer = [start]
    for cnt in range(k_prime):
        nxt = {}
        for state in layer:
            j, _, m = state
            f = best[state]
            for nj, jump, nm in successors(j, cnt, m):
                ns = (nj, cnt + 1, nm)
                v = max(f, jump)
                if ns not in best or v < best[ns]:
                    best[ns] = v
                    nxt[ns] = True
        layer = list(nxt)
    finals = [s for s in layer if s[0] == M - 1]
    objective = min(best[s] for s in finals)

    # second pass: maximise quality, then minimise dissimilarity, among
    # subsequences whose every jump is within the optimum
    q = [_quality_int(t, c, config) for t, c in candidates]
    d = [task_dissimilarity(t, ref_task) for t, _ in candidates]
    value = {start: (0, 0)}
    preds: dict = {start: []}
    layer = [start]
    for cnt in range(k_prime):
        nxt = {}
        for state in layer:
            j, _, m = state
            for nj, jump, nm in successors(j, cnt, m):
                if jump > objective:
                    continue
                ns = (nj, cnt + 1, nm)
                v = (value[state][0] - q[nj], value[state][1] + d[nj])
                if ns not in value or v < value[ns]:
                    value[ns] = v
                    preds[ns] = [state]
                    nxt[ns] = True
                elif v == value[ns]:
                    preds[ns].append(state)
        layer = list(nxt)
    finals = [s for s in layer if s[0] == M - 1]
    best_val = min(value[s] for s in finals)
    finals = [s for s in finals if value[s] == best_val]

    paths = []

    def unwind(state, suffix):
        if len(paths) >= _MAX_COOPTIMAL:
            return
        if state == start:
            paths.append(tuple(suffix))
            return
        for p in preds[state]:
            unwind(p, [state[0]] + suffix)

    for s in finals:
        unwind(s, [])
    paths = sorted(set(paths))

    @lru_cache(maxsize=None)
    def diss(i, j):
        return task_dissimilarity(candidates[i][0], candidates[j][0])

    def diversity(path):
        if len(path) < 2:
            return 0.0
        return diversity_of(list(path), M - 1, diss)

    chosen = max(paths, key=lambda p: (diversity(p), [-i for i in p]))
    items = [candidates[i] for i in chosen]
    report = {
        "objective": objective,
        "quality_sum": -best_val[0] / _Q_SCALE,
        "dissimilarity_sum": best_val[1],
        "diversity": round(diversity(chosen), 6),
        "cooptimal": len(paths),
        "indices": list(chosen),
    }
    assert max_jump([comp[i] for i in chosen], kappa) == objective
    return Progression(items, (ref_task, ref_code), report)


# ------------------------------------------------------ single-grid pipeline


def single_candidates(task: Task, solution: Code, config: SynthesisConfig = SynthesisConfig()):
    """Stages 1-3 for a single-grid task; returns (candidates, report)."""
    if task.n != 1:
        raise SynthesisError(f"single-grid decomposition needs n=1, got n={task.n}")
    t = trace(solution, task.vis[0], config.max_steps)
    filtered = filter_trace(t, solution)
    candidates, drops = lift_grids(filtered, task, solution, config)
    report = {"m_all": t.m_all, "m_filter": len(filtered), "m_se": len(candidates), "drops": drops}
    return candidates, report


def synthesize_single(task: Task, solution: Code,
                      config: SynthesisConfig = SynthesisConfig()) -> Progression:
    candidates, report = single_candidates(task, solution, config)
    if len(candidates) < config.k_prime:
        raise SynthesisError(
            f"only {len(candidates)} realizable subtasks for k'={config.k_prime} "
            f"(M_all={report['m_all']}, M_filter={report['m_filter']})",
            report,
        )
    p = select_subsequence(candidates, config.k_prime, config)
    p.report = {**report, **p.report}
    return p


# ------------------------------------------------------- grid introduction


class _GridSubtasks:
    """Memoized subtasks for subsets of a task's grids."""

    def __init__(self, task: Task, solution: Code, config: SynthesisConfig):
        self.task, self.solution, self.config = task, solution, config
        self._sub: dict = {}
        self._metrics: dict = {}
        self._gd = [[dissimilarity(a, b) for b in task.vis] for a in task.vis]

    def get(self, subset: frozenset):
        if len(subset) == self.task.n:
            return self.task, self.solution
        if subset not in self._sub:
            grids = [self.task.vis[i] for i in sorted(subset)]
            tag = "+".join(str(i) for i in sorted(subset))
            self._sub[subset] = subtask_from_grids(grids, self.task, self.solution, f"{self.task.id}#g{tag}")
        return self._sub[subset]

    def metrics(self, subset: frozenset):
        """(complexity, quality int, dissimilarity to the full task)."""
        if subset not in self._metrics:
            t, c = self.get(subset)
            diss = self.diss(subset, frozenset(range(self.task.n)))
            self._metrics[subset] = (code_complexity(c, self.config.kappa),
                                     _quality_int(t, c, self.config), diss)
        return self._metrics[subset]

    def diss(self, a: frozenset, b: frozenset) -> int:
        # subtasks carry the original grids, so alignment costs come from
        # the precomputed grid matrix
        from scipy.optimize import linear_sum_assignment
        import numpy as np

        small, large = (sorted(a), sorted(b)) if len(a) <= len(b) else (sorted(b), sorted(a))
        cost = np.array([[self._gd[i][j] for j in large] for i in small])
        r, c = linear_sum_assignment(cost)
        return int(cost[r, c].sum())


def _grid_order_greedy(task: Task, solution: Code) -> list[int]:
    from .interpreter import coverage

    per_grid = [coverage(solution, [g])[0] for g in task.vis]
    remaining = list(range(task.n))
    first = max(remaining, key=lambda i: (len(per_grid[i]), -i))
    order, covered = [first], set(per_grid[first])
    remaining.remove(first)
    while remaining:
        nxt = max(remaining, key=lambda i: (len(covered | per_grid[i]), -i))
        order.append(nxt)
        covered |= per_grid[nxt]
        remaining.remove(nxt)
    return order


def grid_orders(task: Task, solution: Code, config: SynthesisConfig = SynthesisConfig()):
    """Every grid ordering with its objective and tie-break key (enumeration
    only; used by tests and by :func:`synthesize_grids`)."""
    subs = _GridSubtasks(task, solution, config)
    n = task.n
    out = []
    for sigma in itertools.permutations(range(n)):
        sets = [frozenset(sigma[:k]) for k in range(1, n + 1)]
        ms = [subs.metrics(s) for s in sets]
        obj = max_jump([m[0] for m in ms], config.kappa)
        out.append((sigma, obj, sum(m[1] for m in ms), sum(m[2] for m in ms)))
    return out, subs


def synthesize_grids(task: Task, solution: Code,
                     config: SynthesisConfig = SynthesisConfig()) -> Progression:
    n = task.n
    if n > config.greedy_threshold:
        order = _grid_order_greedy(task, solution)
        subs = _GridSubtasks(task, solution, config)
        sets = [frozenset(order[:k]) for k in range(1, n + 1)]
        items = [subs.get(s) for s in sets]
        objective = max_jump([code_complexity(c, config.kappa) for _, c in items], config.kappa)
        return Progression(items, (task, solution),
                           {"objective": objective, "order": order, "strategy": "greedy"})

    orders, subs = grid_orders(task, solution, config)
    best_obj = min(o[1] for o in orders)
    tied = [o for o in orders if o[1] == best_obj]
    best_q = max(o[2] for o in tied)
    tied = [o for o in tied if o[2] == best_q]
    best_d = min(o[3] for o in tied)
    tied = [o for o in tied if o[3] == best_d]

    def diversity(sigma):
        sets = [frozenset(sigma[:k]) for k in range(1, n + 1)]
        return diversity_of(sets, frozenset(range(n)), subs.diss)

    sigma = max(tied, key=lambda o: (diversity(o[0]), [-i for i in o[0]]))[0]
    items = [subs.get(frozenset(sigma[:k])) for k in range(1, n + 1)]
    report = {
        "objective": best_obj,
        "quality_sum": best_q / _Q_SCALE,
        "dissimilarity_sum": best_d,
        "diversity": round(diversity(sigma), 6),
        "order": list(sigma),
        "strategy": "enumerate",
    }
    return Progression(items, (task, solution), report)


def synthesize(task: Task, solution: Code, config: SynthesisConfig = SynthesisConfig()) -> Progression:
    """Grid introduction first, then trace decomposition of the first
    (single-grid) subtask; K = k' + n - 1 items."""
    grids = synthesize_grids(task, solution, config)
    first_task, first_code = grids.items[0]
    single = synthesize_single(first_task, first_code, config)
    items = list(single.items[:-1]) + list(grids.items)
    objective = max_jump([code_complexity(c, config.kappa) for _, c in items], config.kappa)
    report = {"objective": objective, "single": single.report, "grids": grids.report}
    return Progression(items, (task, solution), report)


# --------------------------------------------------------------- baselines


def same_taskcode(task: Task, solution: Code, K: int, config: SynthesisConfig = SynthesisConfig()) -> Progression:
    if K < 1:
        raise ValueError("K must be >= 1")
    objective = max_jump([code_complexity(solution, config.kappa)] * K, config.kappa)
    return Progression([(task, solution)] * K, (task, solution), {"objective": objective})


def _protected_cells(t: Trace) -> set:
    grid = t.grid
    cells = {grid.avatar.cell}
    if grid.goal is not None:
        cells.add(grid.goal)
    for step in t.steps:
        cells.add(step.grid_state.avatar.cell)
    for cond in (t.steps[-1].condition_log if t.steps else ()):
        name = cond.cond.removeprefix("not(").removesuffix(")")
        rel = {"pathAhead": 0, "frontIsClear": 0, "pathLeft": -1, "leftIsClear": -1,
               "pathRight": 1, "rightIsClear": 1}.get(name)
        cells.add(cond.pose.ahead(rel) if rel is not None else cond.pose.cell)
    return cells


def _mutate(grid, candidates, rng, n_mut):
    picks = rng.sample(candidates, min(n_mut, len(candidates)))
    rows = [list(r) for r in grid.cells]
    if grid.dialect == dsl.MAZE:
        for r, c in picks:
            rows[r][c] = FREE if rows[r][c] == WALL else WALL
        return grid.with_cells("".join(r) for r in rows)
    pre = [list(r) for r in grid.markers]
    post = [list(r) for r in grid.post_markers]
    for r, c in picks:
        if rows[r][c] == WALL:
            rows[r][c] = FREE
        elif rng.random() < 0.5 and pre[r][c] == post[r][c]:
            # untouched free cell: toggle a marker instead of walling it
            v = 0 if pre[r][c] else 1
            pre[r][c] = post[r][c] = v
        else:
            rows[r][c] = WALL
            pre[r][c] = post[r][c] = 0
    return replace(grid, cells=tuple("".join(r) for r in rows),
                   markers=tuple(map(tuple, pre)), post_markers=tuple(map(tuple, post)))


def same_code(task: Task, solution: Code, K: int, seed: int = 0,
              config: SynthesisConfig = SynthesisConfig()) -> Progression:
    """K single-grid subtasks solved by the unchanged solution. Item k's grid
    mutates cells of the first grid near the avatar's position at an evenly
    spaced trace point, touching only cells the trace never visits or tests."""
    if K < 1:
        raise ValueError("K must be >= 1")
    rng = random.Random(f"same_code:{seed}:{task.id}")
    base = task.vis[0]
    t = trace(solution, base, config.max_steps)
    protected = _protected_cells(t)
    free_choice = [(r, c) for r in range(base.height) for c in range(base.width)
                   if (r, c) not in protected]
    items = []
    fallbacks = 0
    for k in range(1, K):
        tau = round(k * t.m_all / K)
        anchor = t.steps[tau - 1].grid_state.avatar.cell if tau >= 1 else base.avatar.cell
        near = sorted(free_choice, key=lambda rc: (abs(rc[0] - anchor[0]) + abs(rc[1] - anchor[1]), rc))
        near = near[: 2 * config.same_code_mutations + 2]
        grid = base
        for _ in range(config.same_code_retries):
            if not near:
                break
            cand = _mutate(base, near, rng, config.same_code_mutations)
            if execute(solution, cand, config.max_steps).solved:
                grid = cand
                break
        else:
            fallbacks += 1
        sub = Task((grid,), task.store, task.size_budget, f"{task.id}#c{k}")
        items.append((sub, solution))
    items.append((task, solution))
    objective = max_jump([code_complexity(solution, config.kappa)] * K, config.kappa)
    return Progression(items, (task, solution), {"objective": objective, "fallbacks": fallbacks})


def run_method(method: str, task: Task, solution: Code, config: SynthesisConfig = SynthesisConfig(),
               K: int | None = None) -> Progression:
    """Dispatch by method name. ``K`` defaults to k' + n - 1 for the baselines."""
    if K is None:
        K = config.k_prime + task.n - 1
    if method == "progressyn":
        return synthesize(task, solution, config)
    if method == "progressyn_grids":
        return synthesize_grids(task, solution, config)
    if method == "same_taskcode":
        return same_taskcode(task, solution, K, config)
    if method == "same_code":
        return same_code(task, solution, K, config.seed, config)
    raise ValueError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")
