"""Task corpora: JSON-lines I/O, the Bunel-style importer, coverage pruning,
augmentation with progressions, and the validation report.

Native records are one JSON object per line::

    {"id": "...", "task": <Task JSON>, "code": "Run{...}"}

Augmented corpora interleave, per input task, the derived subtasks
(records carrying ``parent``, ``k`` and ``method``) followed by the original
record, which is copied unchanged apart from an extra ``progression`` key
summarising what happened to it.
"""

from __future__ import annotations

import json
import logging
import os
import re
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable

from . import dsl
from .dsl import Action, Code, Cond, If, IfElse, Repeat, While
from .interpreter import ExecutionError, coverage, solves
from .metrics import KAPPA, code_complexity, max_jump
from .progression import METHODS, SynthesisConfig, SynthesisError, run_method
from .world import FREE, WALL, Grid, GridError, Pose, Task

log = logging.getLogger(__name__)


class CorpusError(ValueError):
    """Unreadable corpus file or a record that is not a task at all."""


@dataclass
class Corpus:
    tasks: list  # [(Task, Code)]
    dialect: str | None = None
    provenance: dict = field(default_factory=dict)
    skipped: list = field(default_factory=list)  # [(record index, reason)]

    def __post_init__(self):
        ids = [t.id for t, _ in self.tasks]
        if len(ids) != len(set(ids)):
            raise CorpusError("task ids must be unique")
        if self.dialect is None and self.tasks:
            self.dialect = self.tasks[0][0].dialect

    def __len__(self) -> int:
        return len(self.tasks)


def record_of(task: Task, code: Code) -> dict:
    return {"id": task.id, "task": task.to_json(), "code": dsl.serialize(code)}


def dumps_record(rec: dict) -> str:
    return json.dumps(rec, sort_keys=True, separators=(",", ":"))


def _task_of(rec: dict) -> tuple[Task, Code]:
    task = Task.from_json({**rec["task"], "id": rec["id"]})
    code = dsl.parse(rec["code"], task.dialect)
    return task, code


def _read_lines(path: str) -> list[tuple[int, dict]]:
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise CorpusError(f"cannot read {path}: {exc}") from exc
    out = []
    for i, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"record {i}: invalid JSON ({exc.msg})") from exc
        if not isinstance(rec, dict):
            raise CorpusError(f"record {i}: expected a JSON object")
        out.append((i, rec))
    return out


def load_native(path: str, max_steps: int = 1000) -> Corpus:
    tasks, skipped = [], []
    seen = set()
    for i, rec in _read_lines(path):
        missing = {"id", "task", "code"} - set(rec)
        if missing:
            raise CorpusError(f"record {i}: missing keys {sorted(missing)}")
        try:
            task, code = _task_of(rec)
        except (dsl.DSLError, GridError, KeyError, TypeError, ValueError) as exc:
            skipped.append((i, f"does not parse: {exc}"))
            continue
        if task.id in seen:
            skipped.append((i, f"duplicate id {task.id!r}"))
            continue
        if not solves(code, task, max_steps):
            skipped.append((i, "code does not solve task"))
            continue
        seen.add(task.id)
        tasks.append((task, code))
    return Corpus(tasks, provenance={"source": os.path.basename(path), "format": "native"}, skipped=skipped)


def export(corpus: Corpus, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for task, code in corpus.tasks:
            fh.write(dumps_record(record_of(task, code)) + "\n")


# ------------------------------------------------------------ Bunel format
#
# token        meaning
# DEF run m( … m)   program
# REPEAT R=n r( … r) Repeat(n)
# WHILE c( C c) w( … w)  While(C)
# IF c( C c) i( … i)     If(C)
# IFELSE c( C c) i( … i) ELSE e( … e)  IfElse(C)
# not c( C c)  negated condition, inside the outer c( … c)
# move turnLeft turnRight pickMarker putMarker, and the five Karel conditions
# keep their names.

_DIRS = {"north": "N", "east": "E", "south": "S", "west": "W", "N": "N", "E": "E", "S": "S", "W": "W"}


class _BunelTokens:
    def __init__(self, tokens):
        self.toks = list(tokens)
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else None

    def take(self, expected=None):
        tok = self.peek()
        if tok is None or (expected is not None and tok != expected):
            raise dsl.DSLError(f"token {self.i}: expected {expected or 'a token'}, got {tok!r}")
        self.i += 1
        return tok

    def program(self) -> Code:
        self.take("DEF")
        self.take("run")
        self.take("m(")
        body = self.blocks("m)")
        if self.peek() is not None:
            raise dsl.DSLError(f"token {self.i}: trailing input")
        return Code(body, dsl.KAREL)

    def blocks(self, close) -> tuple:
        out = []
        while self.peek() != close:
            out.append(self.block())
        self.take(close)
        return tuple(out)

    def cond(self) -> Cond:
        self.take("c(")
        if self.peek() == "not":
            self.take()
            self.take("c(")
            name = self.take()
            self.take("c)")
            c = Cond(name, True)
        else:
            c = Cond(self.take())
        self.take("c)")
        return c

    def block(self):
        tok = self.take()
        if tok in dsl.ACTIONS:
            return Action(tok)
        if tok == "REPEAT":
            m = re.fullmatch(r"R=(\d+)", self.take())
            if not m:
                raise dsl.DSLError(f"token {self.i - 1}: bad repeat count")
            self.take("r(")
            return Repeat(int(m.group(1)), self.blocks("r)"))
        if tok == "WHILE":
            c = self.cond()
            self.take("w(")
            return While(c, self.blocks("w)"))
        if tok == "IF":
            c = self.cond()
            self.take("i(")
            return If(c, self.blocks("i)"))
        if tok == "IFELSE":
            c = self.cond()
            self.take("i(")
            then = self.blocks("i)")
            self.take("ELSE")
            self.take("e(")
            return IfElse(c, then, self.blocks("e)"))
        raise dsl.DSLError(f"token {self.i - 1}: unknown token {tok!r}")


def parse_bunel_tokens(tokens) -> Code:
    code = _BunelTokens(tokens).program()
    # round-trip through the text syntax for the usual validity checks
    return dsl.parse(dsl.serialize(code), dsl.KAREL)


def _bunel_cells(spec: str):
    out = []
    for item in spec.split():
        out.append(tuple(int(x) if x.lstrip("-").isdigit() else x for x in item.split(":")))
    return out


def _bunel_pose(hero: str) -> Pose:
    r, c, d = hero.split(":")
    return Pose(int(r), int(c), _DIRS[d])


def parse_bunel_grid(inp: dict, out: dict) -> Grid:
    h, w = int(inp["rows"]), int(inp["cols"])
    rows = [[FREE] * w for _ in range(h)]
    for r, c in _bunel_cells(inp.get("blocked", "")):
        rows[r][c] = WALL

    def layer(g):
        m = [[0] * w for _ in range(h)]
        for r, c, n in _bunel_cells(g.get("markers", "")):
            m[r][c] = n
        return tuple(tuple(row) for row in m)

    return Grid(dsl.KAREL, tuple("".join(r) for r in rows), _bunel_pose(inp["hero"]),
                markers=layer(inp), post_markers=layer(out), avatar_end=_bunel_pose(out["hero"]))


def load_bunel(path: str, n_grids: int = 6, max_steps: int = 1000) -> Corpus:
    """Records hold ``examples`` (a list of ``{"inpgrid_json", "outgrid_json"}``)
    and ``program_tokens``; the first ``n_grids`` examples form the task."""
    tasks, skipped = [], []
    seen = set()
    for i, rec in _read_lines(path):
        if "examples" not in rec or "program_tokens" not in rec:
            raise CorpusError(f"record {i}: missing 'examples' or 'program_tokens'")
        tid = str(rec.get("id", f"bunel-{i:06d}"))
        try:
            code = parse_bunel_tokens(rec["program_tokens"])
            grids = tuple(parse_bunel_grid(ex["inpgrid_json"], ex["outgrid_json"])
                          for ex in rec["examples"][:n_grids])
            if not grids:
                raise GridError("no examples")
            task = Task(grids, dsl.blocks(code) or frozenset({"move"}), max(dsl.size(code), 1), tid)
        except (dsl.DSLError, GridError, KeyError, TypeError, ValueError, IndexError) as exc:
            skipped.append((i, f"does not parse: {exc}"))
            continue
        if tid in seen:
            skipped.append((i, f"duplicate id {tid!r}"))
            continue
        if not solves(code, task, max_steps):
            skipped.append((i, "code does not solve task"))
            continue
        seen.add(tid)
        tasks.append((task, code))
    return Corpus(tasks, dsl.KAREL, {"source": os.path.basename(path), "format": "bunel-json"}, skipped)


def import_corpus(path: str, fmt: str = "native", **kw) -> Corpus:
    if fmt == "native":
        return load_native(path, **kw)
    if fmt == "bunel-json":
        return load_bunel(path, **kw)
    raise ValueError(f"unknown corpus format {fmt!r}; expected native or bunel-json")


def prune_full_coverage(c: Corpus) -> Corpus:
    kept = [(t, code) for t, code in c.tasks if coverage(code, t.vis)[1] == 1.0]
    return replace(c, tasks=kept, provenance={**c.provenance, "pruned": len(c.tasks) - len(kept)})


# ------------------------------------------------------------ augmentation


@dataclass(frozen=True)
class ValidationReport:
    method: str
    tasks: int
    records: int
    unique_complexity_count: int
    avg_max_jump: float
    failed: int = 0
    unsat_drops: int = 0
    timeouts: int = 0
    per_task: tuple = ()  # ((task id, status, max jump), ...)

    def to_json(self, per_task: bool = False) -> dict:
        d = {
            "method": self.method,
            "tasks": self.tasks,
            "records": self.records,
            "unique_complexity_count": self.unique_complexity_count,
            "avg_max_jump": f"{self.avg_max_jump:.1f}",
            "failed": self.failed,
            "unsat_drops": self.unsat_drops,
            "timeouts": self.timeouts,
        }
        if per_task:
            d["per_task"] = [{"id": i, "status": s, "max_jump": j} for i, s, j in self.per_task]
        return d

    def table(self) -> str:
        rows = [
            ("method", self.method),
            ("tasks", str(self.tasks)),
            ("records", str(self.records)),
            ("unique complexities", str(self.unique_complexity_count)),
            ("avg max jump", f"{self.avg_max_jump:.1f}"),
            ("failed tasks", str(self.failed)),
            ("unsat drops", str(self.unsat_drops)),
            ("timeouts", str(self.timeouts)),
        ]
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k:<{width}}  {v}" for k, v in rows)


def _task_seed(seed: int, task_id: str) -> int:
    # stable across processes, unlike hash()
    return zlib.crc32(f"{seed}:{task_id}".encode())


def augment_task(task: Task, code: Code, method: str, config: SynthesisConfig,
                 K: int | None = None) -> list[dict]:
    """Records for one input task: derived subtasks, then the original."""
    cfg = replace(config, seed=_task_seed(config.seed, task.id))
    original = record_of(task, code)
    meta = {"method": method}
    try:
        p = run_method(method, task, code, cfg, K)
        p.check(cfg.max_steps)
    except (SynthesisError, ExecutionError) as exc:
        drops = getattr(exc, "report", {}).get("drops", {})
        meta.update(status="failed", reason=str(exc).splitlines()[0], K=1,
                    unsat=drops.get("unsat", 0), timeouts=drops.get("timeout", 0))
        return [{**original, "progression": meta}]
    out = []
    for k, (t, c) in enumerate(p.items[:-1], 1):
        rid = f"{task.id}/{method}/{k}"
        out.append({"id": rid, "parent": task.id, "k": k, "method": method,
                    "task": replace(t, id=rid).to_json(), "code": dsl.serialize(c)})
    drops = p.report.get("single", p.report).get("drops", {})
    meta.update(status="ok", K=p.budget, unsat=drops.get("unsat", 0), timeouts=drops.get("timeout", 0))
    out.append({**original, "progression": meta})
    return out


def _augment_chunk(args):
    pairs, method, config, K = args
    out = []
    for t, c in pairs:
        task = Task.from_json(t)
        out.append(augment_task(task, dsl.parse(c, task.dialect), method, config, K))
    return out


def augment(c: Corpus, method: str, config: SynthesisConfig = SynthesisConfig(),
            K: int | None = None, jobs: int = 1) -> tuple[list[dict], ValidationReport]:
    """Augment every task. Output order follows input order regardless of
    ``jobs``, and each task's randomness derives from (seed, task id), so
    the result is identical for any job count."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")
    if jobs <= 1 or len(c.tasks) < 2:
        groups = [augment_task(t, code, method, config, K) for t, code in c.tasks]
    else:
        payload = [(t.to_json(), dsl.serialize(code)) for t, code in c.tasks]
        size = max(1, len(payload) // (jobs * 4))
        chunks = [(payload[i:i + size], method, config, K) for i in range(0, len(payload), size)]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            groups = [g for chunk in pool.map(_augment_chunk, chunks) for g in chunk]
    records = [r for g in groups for r in g]
    return records, report_of(records, config.kappa, method)


def write_records(records: Iterable[dict], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(dumps_record(rec) + "\n")


def report_of(records: list[dict], kappa: int = KAPPA, method: str | None = None) -> ValidationReport:
    """Recompute the statistics from records alone.

    A task's progression is its derived records in ``k`` order followed by
    the task itself; records without a ``parent`` are tasks. Plain corpora
    therefore report each task as a one-item progression."""
    derived: dict = {}
    complexities = set()
    tasks = []
    for rec in records:
        c = code_complexity(dsl.parse(rec["code"]), kappa)
        complexities.add(c)
        if "parent" in rec:
            derived.setdefault(rec["parent"], []).append((rec["k"], c))
        else:
            tasks.append((rec, c))
    jumps, per_task = [], []
    failed = unsat = timeouts = 0
    methods = set()
    for rec, c in tasks:
        meta = rec.get("progression", {})
        if "method" in meta:
            methods.add(meta["method"])
        status = meta.get("status", "plain")
        failed += status == "failed"
        unsat += meta.get("unsat", 0)
        timeouts += meta.get("timeouts", 0)
        seq = [cc for _, cc in sorted(derived.get(rec["id"], []))] + [c]
        j = max_jump(seq, kappa)
        jumps.append(j)
        per_task.append((rec["id"], status, j))
    if method is None:
        method = methods.pop() if len(methods) == 1 else ("none" if not methods else "mixed")
    avg = sum(jumps) / len(jumps) if jumps else 0.0
    return ValidationReport(method, len(tasks), len(records), len(complexities), avg,
                            failed, unsat, timeouts, tuple(per_task))


def validate(path: str, kappa: int = KAPPA) -> ValidationReport:
    return report_of([rec for _, rec in _read_lines(path)], kappa)
