"""Deterministic execution of programs on grids, with tracing and coverage.

The :class:`Machine` walks the AST against a *world* object that answers
condition tests and performs actions. :class:`GridWorld` is the concrete
world; the symbolic executor plugs in its own.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from . import dsl
from .dsl import Action, Code, Cond, If, IfElse, Repeat, RepeatUntil, While
from .world import MAX_MARKERS, Grid, Pose, Task

DEFAULT_MAX_STEPS = 1000


class Crash(Exception):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class Timeout(Exception):
    pass


class ExecutionError(RuntimeError):
    """A program that was required to solve a grid did not."""


# ------------------------------------------------------------------ worlds


class GridWorld:
    """Mutable execution state over an immutable :class:`Grid`."""

    def __init__(self, grid: Grid):
        self.grid = grid
        self.pose = grid.avatar
        self.markers = [list(r) for r in grid.markers] if grid.markers is not None else None

    def test(self, cond: Cond) -> bool:
        name, g, p = cond.name, self.grid, self.pose
        if name in ("pathAhead", "frontIsClear"):
            v = g.is_free(p.ahead(0))
        elif name in ("pathLeft", "leftIsClear"):
            v = g.is_free(p.ahead(-1))
        elif name in ("pathRight", "rightIsClear"):
            v = g.is_free(p.ahead(1))
        elif name == "goal":
            v = p.cell == g.goal
        elif name == "markersPresent":
            v = self.markers[p.row][p.col] > 0
        elif name == "noMarkersPresent":
            v = self.markers[p.row][p.col] == 0
        else:
            raise dsl.DialectError(f"condition {name} undefined")
        return not v if cond.negated else v

    def act(self, name: str) -> None:
        p = self.pose
        if name == "move":
            nxt = p.ahead(0)
            if not self.grid.is_free(nxt):
                raise Crash("wall")
            self.pose = Pose(nxt[0], nxt[1], p.dir)
        elif name == "turnLeft":
            self.pose = p.turned(-1)
        elif name == "turnRight":
            self.pose = p.turned(1)
        elif name == "pickMarker":
            if self.markers[p.row][p.col] == 0:
                raise Crash("empty pick")
            self.markers[p.row][p.col] -= 1
        elif name == "putMarker":
            if self.markers[p.row][p.col] >= MAX_MARKERS:
                raise Crash("marker overflow")
            self.markers[p.row][p.col] += 1
        else:
            raise dsl.DialectError(f"action {name} undefined")

    def snapshot(self) -> Grid:
        if self.markers is None:
            return replace(self.grid, avatar=self.pose)
        return replace(self.grid, avatar=self.pose, markers=tuple(tuple(r) for r in self.markers))

    def solved(self) -> bool:
        g = self.grid
        if g.dialect == dsl.MAZE:
            return self.pose.cell == g.goal
        return self.pose == g.avatar_end and tuple(tuple(r) for r in self.markers) == g.post_markers


# --------------------------------------------------------- execution record


@dataclass
class Body:
    """One execution of a block list: a loop iteration, a taken branch, or Run."""

    owner: tuple | None  # path of the owning control block; None for Run
    start: int  # actions executed before this body began
    items: list["Node"] = field(default_factory=list)
    first: int | None = None  # 1-based index of the first/last action inside
    last: int | None = None


@dataclass
class Node:
    """One executed instance of a block."""

    path: tuple
    block: object
    start: int
    first: int | None = None
    last: int | None = None
    bodies: list[Body] = field(default_factory=list)
    branch: bool | None = None  # outcome for If/IfElse


@dataclass(frozen=True)
class ConditionEval:
    cond: str
    path: tuple
    pose: Pose
    outcome: bool
    after_actions: int


class Machine:
    def __init__(self, world, max_steps: int = DEFAULT_MAX_STEPS, record: bool = False,
                 on_action=None):
        self.world = world
        self.max_steps = max_steps
        self.max_ticks = 20 * max_steps + 100
        self.ticks = 0
        self.record = record
        self.on_action = on_action
        self.actions: list[tuple[str, tuple]] = []
        self.conditions: list[ConditionEval] = []
        self.executed: set[tuple] = set()
        self.chains: list[tuple[Body, ...]] = []
        self._stack: list[Body] = []
        self.root: Body | None = None

    def run(self, code: Code) -> None:
        self.root = self._body(code.body, None, None, 0)

    def _tick(self):
        self.ticks += 1
        if self.ticks > self.max_ticks:
            raise Timeout()

    def _test(self, block, path) -> bool:
        v = self.world.test(block.cond)
        if self.record:
            self.conditions.append(
                ConditionEval(str(block.cond), path, self.world.pose, v, len(self.actions))
            )
        return v

    def _body(self, blocks, owner, parent_path, offset) -> Body:
        body = Body(owner, len(self.actions))
        self._stack.append(body)
        base = parent_path if parent_path is not None else ()
        for i, b in enumerate(blocks):
            node = self._block(b, base + (offset + i,))
            if self.record:
                body.items.append(node)
        self._stack.pop()
        _close(body, len(self.actions))
        return body

    def _block(self, b, path) -> Node:
        self._tick()
        self.executed.add(path)
        node = Node(path, b, len(self.actions))
        if isinstance(b, Action):
            if len(self.actions) >= self.max_steps:
                raise Timeout()
            self.world.act(b.name)
            self.actions.append((b.name, path))
            if self.record:
                self.chains.append(tuple(self._stack))
            if self.on_action is not None:
                self.on_action(self)
        elif isinstance(b, Repeat):
            for _ in range(b.count):
                self._tick()
                node.bodies.append(self._body(b.body, path, path, 0))
        elif isinstance(b, While):
            while self._test(b, path):
                self._tick()
                node.bodies.append(self._body(b.body, path, path, 0))
        elif isinstance(b, RepeatUntil):
            while not self._test(b, path):
                self._tick()
                node.bodies.append(self._body(b.body, path, path, 0))
        elif isinstance(b, If):
            node.branch = self._test(b, path)
            if node.branch:
                node.bodies.append(self._body(b.body, path, path, 0))
        elif isinstance(b, IfElse):
            node.branch = self._test(b, path)
            if node.branch:
                node.bodies.append(self._body(b.body, path, path, 0))
            else:
                node.bodies.append(self._body(b.orelse, path, path, len(b.body)))
        _close(node, len(self.actions))
        return node


def _close(item, n_actions: int) -> None:
    if n_actions > item.start:
        item.first, item.last = item.start + 1, n_actions


# -------------------------------------------------------------- operations


@dataclass(frozen=True)
class ExecResult:
    outcome: str  # solved | not_solved | crashed | timeout
    final: Grid
    reason: str | None = None
    actions: int = 0

    @property
    def solved(self) -> bool:
        return self.outcome == "solved"


def _check(code: Code, grid: Grid) -> None:
    dsl.check_dialect(code, grid.dialect)


def execute(code: Code, grid: Grid, max_steps: int = DEFAULT_MAX_STEPS) -> ExecResult:
    _check(code, grid)
    world = GridWorld(grid)
    m = Machine(world, max_steps)
    try:
        m.run(code)
    except Crash as exc:
        return ExecResult("crashed", world.snapshot(), exc.reason, len(m.actions))
    except Timeout:
        return ExecResult("timeout", world.snapshot(), "step limit", len(m.actions))
    outcome = "solved" if world.solved() else "not_solved"
    return ExecResult(outcome, world.snapshot(), None, len(m.actions))


def solves(code: Code, task: Task, max_steps: int = DEFAULT_MAX_STEPS) -> bool:
    try:
        dsl.check_dialect(code, task.dialect)
    except dsl.DialectError:
        return False
    if dsl.size(code) > task.size_budget or not dsl.blocks(code) <= task.store:
        return False
    return all(execute(code, g, max_steps).solved for g in task.vis)


@dataclass(frozen=True)
class TraceStep:
    tau: int
    grid_state: Grid
    command_prefix: tuple
    condition_log: tuple
    terminated_inside: tuple | None

    @property
    def action(self) -> str:
        return self.command_prefix[-1][0]

    def to_json(self) -> dict:
        return {
            "tau": self.tau,
            "grid": self.grid_state.to_json(),
            "prefix": [{"action": a, "path": list(p)} for a, p in self.command_prefix],
            "conditions": [
                {"cond": c.cond, "path": list(c.path), "pose": c.pose.to_json(), "outcome": c.outcome}
                for c in self.condition_log
            ],
            "terminated_inside": None if self.terminated_inside is None else list(self.terminated_inside),
        }


@dataclass(frozen=True)
class Trace:
    code: Code
    grid: Grid
    steps: tuple[TraceStep, ...]
    root: Body = field(compare=False, repr=False)

    @property
    def m_all(self) -> int:
        return len(self.steps)

    def to_json(self) -> dict:
        return {"code": dsl.serialize(self.code), "grid": self.grid.to_json(),
                "steps": [s.to_json() for s in self.steps]}


def trace(code: Code, grid: Grid, max_steps: int = DEFAULT_MAX_STEPS) -> Trace:
    """Full execution trace of a solving program, one step per action."""
    _check(code, grid)
    world = GridWorld(grid)
    snapshots: list[Grid] = []
    m = Machine(world, max_steps, record=True, on_action=lambda _: snapshots.append(world.snapshot()))
    try:
        m.run(code)
    except Crash as exc:
        raise ExecutionError(f"crashed ({exc.reason}) after {len(m.actions)} actions") from exc
    except Timeout as exc:
        raise ExecutionError(f"timed out after {len(m.actions)} actions") from exc
    if not world.solved():
        raise ExecutionError("code does not solve grid")
    actions = tuple(m.actions)
    steps = []
    cond_i = 0
    for tau in range(1, len(actions) + 1):
        while cond_i < len(m.conditions) and m.conditions[cond_i].after_actions <= tau:
            cond_i += 1
        inside = None
        for body in reversed(m.chains[tau - 1]):
            if body.owner is not None and body.last != tau:
                inside = body.owner
                break
        steps.append(TraceStep(tau, snapshots[tau - 1], actions[:tau],
                               tuple(m.conditions[:cond_i]), inside))
    return Trace(code, grid, tuple(steps), m.root)


def replay(grid: Grid, actions) -> Grid:
    """Apply a sequence of action names (or (name, path) pairs) to a grid."""
    world = GridWorld(grid)
    for a in actions:
        world.act(a if isinstance(a, str) else a[0])
    return world.snapshot()


def coverage(code: Code, grids) -> tuple[frozenset, float]:
    executed: set = set()
    for g in grids:
        _check(code, g)
        world = GridWorld(g)
        m = Machine(world)
        try:
            m.run(code)
        except (Crash, Timeout) as exc:
            raise ExecutionError(f"code does not run on grid: {exc!r}") from exc
        if not world.solved():
            raise ExecutionError("code does not solve grid")
        executed |= m.executed
    total = dsl.size(code)
    return frozenset(executed), (len(executed) / total if total else 1.0)
