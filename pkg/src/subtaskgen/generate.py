"""Random task generation.

Programs are drawn from the block grammar, then grids are drawn at random
and kept when the program runs to completion on them. A task is the program
plus a handful of those grids chosen greedily for coverage; tasks whose
grids fail to execute every block are rejected, so generated solutions
always have full coverage.
"""

from __future__ import annotations

import os
import random
from dataclasses import dataclass, replace

from . import dsl
from .dsl import Action, Code, Cond, If, IfElse, Repeat, RepeatUntil, While
from .interpreter import GridWorld, Machine, Crash, Timeout, coverage
from .world import FREE, WALL, Grid, Pose, Task, DIRECTIONS


@dataclass(frozen=True)
class GenConfig:
    dialect: str = dsl.KAREL
    n_grids: int = 6
    min_depth: int = 2
    max_depth: int = 3
    min_size: int = 4
    max_size: int = 7
    min_side: int = 4
    max_side: int = 7
    wall_density: float = 0.15
    marker_density: float = 0.2
    min_actions: int = 6  # reject grids with shorter executions
    max_actions: int = 40  # and with longer ones
    grid_pool: int = 40
    attempts: int = 200


_MAZE_CONDS = ("pathAhead", "pathLeft", "pathRight")
_KAREL_CONDS = ("frontIsClear", "leftIsClear", "rightIsClear", "markersPresent", "noMarkersPresent")


def _cond(rng: random.Random, dialect: str) -> Cond:
    if dialect == dsl.MAZE:
        return Cond(rng.choice(_MAZE_CONDS))
    name = rng.choice(_KAREL_CONDS)
    return Cond(name, negated=name.endswith("IsClear") and rng.random() < 0.2)


def _action(rng: random.Random, dialect: str) -> Action:
    names = sorted(dsl.DIALECT_ACTIONS[dialect])
    weights = [3 if n == "move" else 1 for n in names]
    return Action(rng.choices(names, weights)[0])


def _body(rng, dialect, depth_left, budget, min_len=1) -> tuple:
    n = rng.randint(min_len, max(min_len, min(3, budget)))
    out = []
    for _ in range(n):
        if budget <= 0:
            break
        b = _block(rng, dialect, depth_left, budget)
        out.append(b)
        budget -= _size(b)
    return tuple(out)


def _size(b) -> int:
    return 1 + sum(_size(c) for c in dsl.children(b))


def _block(rng, dialect, depth_left, budget):
    if depth_left <= 0 or budget < 2 or rng.random() < 0.45:
        return _action(rng, dialect)
    kind = rng.choice(("Repeat", "While", "If", "IfElse", "RepeatUntil") if dialect == dsl.MAZE
                      else ("Repeat", "While", "If", "IfElse"))
    inner = budget - 1
    if kind == "IfElse":
        if inner < 2:
            return _action(rng, dialect)
        a = _body(rng, dialect, depth_left - 1, inner // 2)
        b = _body(rng, dialect, depth_left - 1, inner - sum(map(_size, a)))
        return IfElse(_cond(rng, dialect), a, b or (_action(rng, dialect),))
    body = _body(rng, dialect, depth_left - 1, inner)
    if kind == "Repeat":
        return Repeat(rng.randint(2, 4), body)
    if kind == "RepeatUntil":
        return RepeatUntil(Cond("goal"), body)
    if kind == "While":
        return While(_cond(rng, dialect), body)
    return If(_cond(rng, dialect), body)


def random_code(rng: random.Random, cfg: GenConfig) -> Code:
    for _ in range(1000):
        body = _body(rng, cfg.dialect, cfg.max_depth - 1, cfg.max_size)
        code = Code(body, cfg.dialect)
        if (cfg.min_depth <= dsl.depth(code) <= cfg.max_depth
                and cfg.min_size <= dsl.size(code) <= cfg.max_size):
            return code
    raise RuntimeError("could not draw a program within the configured shape")


def random_grid(rng: random.Random, cfg: GenConfig) -> Grid:
    """A random pre-grid (maze goal and Karel post-state are placeholders)."""
    h = rng.randint(cfg.min_side, cfg.max_side)
    w = rng.randint(cfg.min_side, cfg.max_side)
    rows = [[WALL if rng.random() < cfg.wall_density else FREE for _ in range(w)] for _ in range(h)]
    r, c = rng.randrange(h), rng.randrange(w)
    rows[r][c] = FREE
    avatar = Pose(r, c, rng.choice(DIRECTIONS))
    cells = tuple("".join(row) for row in rows)
    if cfg.dialect == dsl.MAZE:
        return Grid(dsl.MAZE, cells, avatar, goal=(r, c))
    markers = tuple(
        tuple(rng.randint(1, 3) if cells[i][j] == FREE and rng.random() < cfg.marker_density else 0
              for j in range(w))
        for i in range(h)
    )
    return Grid(dsl.KAREL, cells, avatar, markers=markers, post_markers=markers, avatar_end=avatar)


def complete_grid(code: Code, grid: Grid, rng: random.Random, max_actions: int,
                  min_actions: int = 1) -> Grid | None:
    """Fill in the goal / post-state so that ``code`` solves ``grid``; None if
    the program crashes, runs too long or too short, or a maze goal cannot
    be placed."""
    if grid.dialect == dsl.MAZE and "goal" in dsl.conditions(code):
        # the goal must stop the loop: try free cells until one works
        free = [(r, c) for r in range(grid.height) for c in range(grid.width) if grid.is_free((r, c))]
        rng.shuffle(free)
        for cell in free[:12]:
            g = Grid(dsl.MAZE, grid.cells, grid.avatar, goal=cell)
            end = _run(code, g, max_actions, min_actions)
            if end is not None and end.avatar.cell == cell:
                return g
        return None
    end = _run(code, grid, max_actions, min_actions)
    if end is None:
        return None
    if grid.dialect == dsl.MAZE:
        return Grid(dsl.MAZE, grid.cells, grid.avatar, goal=end.avatar.cell)
    return Grid(dsl.KAREL, grid.cells, grid.avatar, markers=grid.markers,
                post_markers=end.markers, avatar_end=end.avatar)


def _run(code, grid, max_actions, min_actions):
    world = GridWorld(grid)
    m = Machine(world, max_steps=max_actions)
    try:
        m.run(code)
    except (Crash, Timeout):
        return None
    if len(m.actions) < max(min_actions, 1):
        return None
    return world.snapshot()


def random_task(rng: random.Random, cfg: GenConfig, task_id: str) -> tuple[Task, Code]:
    for _ in range(cfg.attempts):
        code = random_code(rng, cfg)
        pool = []
        for _ in range(cfg.grid_pool):
            g = complete_grid(code, random_grid(rng, cfg), rng, cfg.max_actions, cfg.min_actions)
            if g is not None:
                pool.append((g, coverage(code, [g])[0]))
        if len(pool) < cfg.n_grids:
            continue
        # greedy coverage pick, then fill up with the rest of the pool
        chosen, covered = [], set()
        rest = list(range(len(pool)))
        while len(chosen) < cfg.n_grids:
            i = max(rest, key=lambda i: (len(covered | pool[i][1]), -i))
            chosen.append(i)
            covered |= pool[i][1]
            rest.remove(i)
        if len(covered) != dsl.size(code):
            continue
        rng.shuffle(chosen)
        grids = tuple(pool[i][0] for i in chosen)
        return Task(grids, dsl.blocks(code), dsl.size(code), task_id), code
    raise RuntimeError(f"no full-coverage task found in {cfg.attempts} attempts")


def random_corpus(n: int, seed: int, cfg: GenConfig, prefix: str = "gen") -> list[tuple[Task, Code]]:
    rng = random.Random(f"corpus:{seed}:{cfg.dialect}")
    return [random_task(rng, cfg, f"{prefix}-{i:04d}") for i in range(n)]


# settings of the shipped Karel corpus (data/karel100.jsonl)
SHIPPED_SEED = 7
SHIPPED_CONFIG = GenConfig(dialect=dsl.KAREL, n_grids=6, min_side=6, max_side=10,
                           min_actions=10, max_actions=60)


def shipped_corpus_path() -> str:
    return os.path.join(os.path.dirname(__file__), "data", "karel100.jsonl")


def main(argv=None) -> int:
    import argparse

    from .dataset import dumps_record, record_of

    ap = argparse.ArgumentParser(prog="python -m subtaskgen.generate",
                                 description="Write a random full-coverage task corpus as JSON lines.")
    ap.add_argument("-n", type=int, default=100, help="number of tasks")
    ap.add_argument("--seed", type=int, default=SHIPPED_SEED)
    ap.add_argument("--dialect", choices=dsl.DIALECTS, default=dsl.KAREL)
    ap.add_argument("--grids", type=int, default=SHIPPED_CONFIG.n_grids)
    ap.add_argument("--prefix", default="karel")
    ap.add_argument("-o", "--out", required=True)
    args = ap.parse_args(argv)
    cfg = replace(SHIPPED_CONFIG, dialect=args.dialect, n_grids=args.grids)
    with open(args.out, "w", encoding="utf-8") as fh:
        for task, code in random_corpus(args.n, args.seed, cfg, args.prefix):
            fh.write(dumps_record(record_of(task, code)) + "\n")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
