"""Command-line interface.

Exit codes: 0 success, 2 bad usage or input, 3 no progression could be
synthesized, 4 an internal invariant failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import dsl
from .dataset import CorpusError, augment, export, import_corpus, prune_full_coverage, validate, write_records
from .interpreter import ExecutionError, execute, solves, trace
from .progression import METHODS, SynthesisConfig, SynthesisError, run_method
from .render import frame
from .world import Grid, GridError, QualityConfig, Task

log = logging.getLogger("subtaskgen")

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_INTERNAL = 0, 2, 3, 4
SEED_ENV = "PROGRESSYN_SEED"


class InputError(Exception):
    pass


# ------------------------------------------------------------------ config

_INT_KEYS = {"k_prime", "kappa", "max_steps", "seed", "greedy_threshold", "search_budget",
             "same_code_mutations", "same_code_retries", "K", "jobs"}
_QUALITY_KEYS = {"w_coverage", "w_trajectory", "w_distinct", "w_balance", "threshold"}


def read_config(path: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment; ``[section]`` headers
    are ignored so simple TOML files work too."""
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line or (line.startswith("[") and line.endswith("]")):
            continue
        if "=" not in line:
            raise InputError(f"{path}:{n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        value = value.strip('"').strip("'")
        try:
            if key in _INT_KEYS:
                out[key] = int(value)
            elif key in _QUALITY_KEYS:
                out[key] = float(value)
            else:
                raise InputError(f"{path}:{n}: unknown key {key!r}")
        except ValueError as exc:
            raise InputError(f"{path}:{n}: bad value for {key}: {value!r}") from exc
    return out


def _settings(args) -> dict:
    """Config file values overridden by flags; seed falls back to the
    environment."""
    conf = read_config(args.config) if getattr(args, "config", None) else {}
    for key in ("k_prime", "kappa", "max_steps", "seed", "K", "jobs"):
        v = getattr(args, key, None)
        if v is not None:
            conf[key] = v
    if "seed" not in conf:
        env = os.environ.get(SEED_ENV)
        try:
            conf["seed"] = int(env) if env else 0
        except ValueError as exc:
            raise InputError(f"{SEED_ENV} must be an integer, got {env!r}") from exc
    return conf


def _synthesis_config(conf: dict) -> SynthesisConfig:
    q = QualityConfig(**{k: conf[k] for k in _QUALITY_KEYS if k in conf})
    kw = {k: conf[k] for k in ("k_prime", "kappa", "max_steps", "seed", "greedy_threshold",
                                "search_budget", "same_code_mutations", "same_code_retries") if k in conf}
    try:
        return SynthesisConfig(quality=q, **kw)
    except ValueError as exc:
        raise InputError(str(exc)) from exc


# ------------------------------------------------------------------ inputs


def _load_json(path: str):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc.msg})") from exc


def load_task(path: str) -> tuple[Task, str | None]:
    """Task JSON, or a corpus record holding ``task`` and ``code``."""
    data = _load_json(path)
    code = None
    if isinstance(data, dict) and "task" in data:
        code = data.get("code")
        data = {**data["task"], "id": data.get("id", data["task"].get("id", ""))}
    try:
        task = Task.from_json(data)
    except (GridError, KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{path}: not a task: {exc}") from exc
    if not task.id:
        task = replace(task, id=Path(path).stem)
    return task, code


def load_grids(path: str) -> list[Grid]:
    data = _load_json(path)
    try:
        if isinstance(data, dict) and "grids" in data:
            return list(Task.from_json(data).vis)
        if isinstance(data, dict) and "task" in data:
            return list(Task.from_json(data["task"]).vis)
        return [Grid.from_json(data)]
    except (GridError, KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{path}: not a grid or task: {exc}") from exc


def load_code(text: str | None, dialect: str | None) -> dsl.Code:
    """Inline program text, or a path to a file holding it."""
    if text is None:
        raise InputError("no code given (use --code)")
    if not text.lstrip().startswith("Run") and Path(text).is_file():
        text = Path(text).read_text(encoding="utf-8")
    try:
        return dsl.parse(text, dialect)
    except dsl.DSLError as exc:
        raise InputError(f"code: {exc}") from exc


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------- commands


def cmd_synthesize(args) -> int:
    conf = _settings(args)
    config = _synthesis_config(conf)
    task, inline = load_task(args.task)
    code = load_code(args.code or inline, task.dialect)
    if not solves(code, task, config.max_steps):
        raise InputError("code does not solve task")
    p = run_method(args.method, task, code, config, conf.get("K"))
    try:
        p.check(config.max_steps)
    except AssertionError as exc:
        raise RuntimeError(f"progression invariant violated: {exc}") from exc
    doc = p.to_json(config)
    doc["method"] = args.method
    _emit(_dumps(doc), args.out)
    # the summary goes to stderr when stdout carries the JSON
    stream = sys.stdout if args.out else sys.stderr
    print(f"objective {p.report.get('objective')}  K={p.budget}", file=stream)
    for item in doc["items"]:
        print(f"  {item['k']:>2}  complexity {item['complexity']:>5}  quality {item['quality']:.3f}  "
              f"diss {item['dissimilarity_to_ref']:>3}  {item['code']}", file=stream)
    return EXIT_OK


def cmd_augment(args) -> int:
    conf = _settings(args)
    config = _synthesis_config(conf)
    try:
        corpus = import_corpus(args.corpus, "native", max_steps=config.max_steps)
    except CorpusError as exc:
        raise InputError(str(exc)) from exc
    for idx, reason in corpus.skipped:
        log.warning("record %d skipped: %s", idx, reason)
    if args.prune:
        corpus = prune_full_coverage(corpus)
    records, report = augment(corpus, args.method, config, conf.get("K"), conf.get("jobs", 1))
    write_records(records, args.out)
    if args.report:
        Path(args.report).write_text(_dumps(report.to_json(per_task=True)), encoding="utf-8")
    print(report.table())
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        report = validate(args.corpus, args.kappa or 1000)
    except CorpusError as exc:
        raise InputError(str(exc)) from exc
    except (dsl.DSLError, KeyError) as exc:
        raise InputError(f"{args.corpus}: bad record: {exc}") from exc
    if args.json:
        sys.stdout.write(_dumps(report.to_json()))
    else:
        print(report.table())
    return EXIT_OK


def _outcome_text(result) -> str:
    if result.outcome == "solved":
        return "Solved"
    if result.outcome == "crashed":
        return f"Crashed ({result.reason})"
    if result.outcome == "timeout":
        return "Timeout"
    return "Not solved"


def cmd_run(args) -> int:
    grids = load_grids(args.grid)
    code = load_code(args.code, grids[0].dialect)
    all_solved = True
    for i, g in enumerate(grids):
        try:
            result = execute(code, g, args.max_steps or 1000)
        except dsl.DialectError as exc:
            raise InputError(str(exc)) from exc
        prefix = f"grid {i}: " if len(grids) > 1 else ""
        print(f"{prefix}{_outcome_text(result)} after {result.actions} actions")
        all_solved &= result.solved
        if args.render:
            print(frame(result.final, args.render), end="")
    return EXIT_OK if all_solved or not args.strict else EXIT_INFEASIBLE


def cmd_trace(args) -> int:
    grids = load_grids(args.grid)
    grid = grids[args.index]
    code = load_code(args.code, grid.dialect)
    try:
        t = trace(code, grid, args.max_steps or 1000)
    except ExecutionError as exc:
        raise InputError(f"cannot trace: {exc}") from exc
    except dsl.DialectError as exc:
        raise InputError(str(exc)) from exc
    for s in t.steps:
        flag = "" if s.terminated_inside is None else f"  (inside {list(s.terminated_inside)})"
        print(f"{s.tau:>4}  {s.action}{flag}")
    if args.json:
        Path(args.json).write_text(_dumps(t.to_json()), encoding="utf-8")
    if args.render:
        out = Path(args.frames or ".")
        out.mkdir(parents=True, exist_ok=True)
        ext = "txt" if args.render == "ascii" else "svg"
        width = len(str(t.m_all))
        for s in t.steps:
            name = out / f"frame_{s.tau:0{width}d}.{ext}"
            name.write_text(frame(s.grid_state, args.render, f"step {s.tau}"), encoding="utf-8")
        print(f"wrote {t.m_all} frames to {out}")
    return EXIT_OK


def cmd_render(args) -> int:
    grids = load_grids(args.grid)
    text = "\n".join(frame(g, args.format, f"grid {i}") for i, g in enumerate(grids))
    _emit(text, args.out)
    return EXIT_OK


def cmd_import(args) -> int:
    try:
        corpus = import_corpus(args.source, args.format, max_steps=args.max_steps or 1000)
    except CorpusError as exc:
        raise InputError(str(exc)) from exc
    for idx, reason in corpus.skipped:
        print(f"skipped record {idx}: {reason}", file=sys.stderr)
    before = len(corpus)
    if args.prune:
        corpus = prune_full_coverage(corpus)
    export(corpus, args.out)
    print(f"imported {before} tasks, wrote {len(corpus)} ({len(corpus.skipped)} skipped)")
    return EXIT_OK


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="progressyn",
        description="Synthesize progressions of subtasks for block-based programming tasks.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    def common(p, synth=True):
        p.add_argument("--config", help="file of key = value settings (flags win)")
        p.add_argument("--max-steps", dest="max_steps", type=int, help="action limit per execution")
        if synth:
            p.add_argument("--k-prime", dest="k_prime", type=int, help="single-grid budget K' (default 4)")
            p.add_argument("--kappa", type=int, help="depth weight of code complexity (default 1000)")
            p.add_argument("--seed", type=int, help=f"random seed (default ${SEED_ENV} or 0)")
            p.add_argument("-K", dest="K", type=int, help="baseline length (default K' + n - 1)")

    p = sub.add_parser("synthesize", help="build a progression for one task")
    p.add_argument("task", help="task JSON, or a corpus record with task and code")
    p.add_argument("--code", help="solution program text or file (default: from the record)")
    p.add_argument("--method", choices=METHODS, default="progressyn")
    p.add_argument("-o", "--out", help="write the progression JSON here instead of stdout")
    common(p)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("augment", help="augment a JSON-lines corpus with progressions")
    p.add_argument("corpus")
    p.add_argument("--method", choices=METHODS, required=True)
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--report", help="also write the validation report as JSON")
    p.add_argument("--jobs", type=int, help="worker processes (default 1)")
    p.add_argument("--prune", action="store_true", help="drop tasks without full coverage first")
    common(p)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("validate", help="recompute the validation report of a corpus file")
    p.add_argument("corpus")
    p.add_argument("--kappa", type=int)
    p.add_argument("--json", action="store_true", help="print JSON instead of a table")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", help="execute a program on a grid or on every grid of a task")
    p.add_argument("grid")
    p.add_argument("--code", required=True)
    p.add_argument("--max-steps", dest="max_steps", type=int)
    p.add_argument("--render", choices=("ascii", "svg"), help="print the final state")
    p.add_argument("--strict", action="store_true", help="exit 3 unless every grid is solved")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("trace", help="print the execution trace, optionally one frame per step")
    p.add_argument("grid")
    p.add_argument("--code", required=True)
    p.add_argument("--index", type=int, default=0, help="grid index within a task file")
    p.add_argument("--max-steps", dest="max_steps", type=int)
    p.add_argument("--render", choices=("ascii", "svg"))
    p.add_argument("--frames", help="directory for rendered frames (default .)")
    p.add_argument("--json", help="write the full trace as JSON here")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("render", help="draw a grid or the grids of a task")
    p.add_argument("grid")
    p.add_argument("--format", choices=("ascii", "svg"), default="ascii")
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("import", help="convert a corpus to the native JSON-lines format")
    p.add_argument("source")
    p.add_argument("--format", choices=("native", "bunel-json"), default="native")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--prune", action="store_true", help="keep only full-coverage tasks")
    p.add_argument("--max-steps", dest="max_steps", type=int)
    p.set_defaults(func=cmd_import)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SynthesisError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ExecutionError, dsl.DSLError, GridError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001 - last-resort exit code
        print(f"internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
