"""Block-program language: AST, canonical text syntax, JSON export and
structural metrics.

Grammar (whitespace is insignificant between tokens)::

    program   := "Run" "{" block* "}"
    block     := action
               | "Repeat" "(" INT ")" body
               | "RepeatUntil" "(" cond ")" body
               | "While" "(" cond ")" body
               | "If" "(" cond ")" body
               | "IfElse" "(" cond ")" body body
    body      := "{" block+ "}"
    cond      := NAME | "not" "(" NAME ")"
    action    := "move" | "turnLeft" | "turnRight" | "pickMarker" | "putMarker"

The canonical form separates sibling blocks by one space and puts no
whitespace anywhere else, e.g. ``Run{If(pathLeft){turnLeft} move}``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator, Union

MAZE = "maze"
KAREL = "karel"
DIALECTS = (MAZE, KAREL)

ACTIONS = ("move", "turnLeft", "turnRight", "pickMarker", "putMarker")
CONTROLS = ("Repeat", "RepeatUntil", "While", "If", "IfElse")

DIALECT_ACTIONS = {
    MAZE: frozenset({"move", "turnLeft", "turnRight"}),
    KAREL: frozenset(ACTIONS),
}
DIALECT_CONDITIONS = {
    MAZE: frozenset({"pathAhead", "pathLeft", "pathRight", "goal"}),
    KAREL: frozenset(
        {"frontIsClear", "leftIsClear", "rightIsClear", "markersPresent", "noMarkersPresent"}
    ),
}
# negation is a Karel construct only
DIALECT_NEGATION = {MAZE: False, KAREL: True}
ALL_CONDITIONS = DIALECT_CONDITIONS[MAZE] | DIALECT_CONDITIONS[KAREL]


class DSLError(ValueError):
    """Raised for malformed programs."""


class ParseError(DSLError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} at line {line}, column {column}")
        self.line = line
        self.column = column


class DialectError(DSLError):
    pass


@dataclass(frozen=True)
class Cond:
    name: str
    negated: bool = False

    def __str__(self) -> str:
        return f"not({self.name})" if self.negated else self.name


@dataclass(frozen=True)
class Action:
    name: str

    @property
    def kind(self) -> str:
        return self.name


@dataclass(frozen=True)
class Repeat:
    count: int
    body: tuple

    kind = "Repeat"


@dataclass(frozen=True)
class RepeatUntil:
    cond: Cond
    body: tuple

    kind = "RepeatUntil"


@dataclass(frozen=True)
class While:
    cond: Cond
    body: tuple

    kind = "While"


@dataclass(frozen=True)
class If:
    cond: Cond
    body: tuple

    kind = "If"


@dataclass(frozen=True)
class IfElse:
    cond: Cond
    body: tuple
    orelse: tuple

    kind = "IfElse"


Block = Union[Action, Repeat, RepeatUntil, While, If, IfElse]
LOOPS = (Repeat, RepeatUntil, While)
CONDITIONALS = (If, IfElse)

# A path addresses a block: one index per nesting level. Inside an IfElse
# the else-body indices are offset by len(then-body).
Path = tuple


@dataclass(frozen=True)
class Code:
    """A program rooted at Run. ``dialect`` is informational: equality and
    hashing only look at the block structure."""

    body: tuple = ()
    dialect: str | None = field(default=None, compare=False)

    def __str__(self) -> str:
        return serialize(self)


def children(block) -> tuple:
    """All child blocks of a control block, then-body before else-body."""
    if isinstance(block, Action):
        return ()
    if isinstance(block, IfElse):
        return block.body + block.orelse
    return block.body


def iter_blocks(code: Code) -> Iterator[tuple[Path, Block]]:
    """Yield (path, block) for every block in pre-order."""

    def walk(blocks, prefix):
        for i, b in enumerate(blocks):
            path = prefix + (i,)
            yield path, b
            yield from walk(children(b), path)

    yield from walk(code.body, ())


def block_at(code: Code, path: Path):
    blocks = code.body
    node = None
    for i in path:
        node = blocks[i]
        blocks = children(node)
    return node


def depth(code: Code) -> int:
    def d(block) -> int:
        if isinstance(block, Action):
            return 0
        return 1 + max(d(c) for c in children(block))

    return 1 + max((d(b) for b in code.body), default=0)


def size(code: Code) -> int:
    return sum(1 for _ in iter_blocks(code))


def blocks(code: Code) -> frozenset[str]:
    return frozenset(b.kind for _, b in iter_blocks(code))


def conditions(code: Code) -> frozenset[str]:
    out = set()
    for _, b in iter_blocks(code):
        if hasattr(b, "cond"):
            out.add(b.cond.name)
    return frozenset(out)


def infer_dialect(code: Code) -> str | None:
    """The single dialect that admits every name in ``code``, or None when
    both do (e.g. ``Run{move}``)."""
    legal = [d for d in DIALECTS if not _violations(code, d)]
    if not legal:
        raise DialectError(f"no dialect admits {serialize(code)}")
    return legal[0] if len(legal) == 1 else None


def _violations(code: Code, dialect: str) -> list[str]:
    bad = []
    for _, b in iter_blocks(code):
        if isinstance(b, Action) and b.name not in DIALECT_ACTIONS[dialect]:
            bad.append(b.name)
        cond = getattr(b, "cond", None)
        if cond is not None:
            if cond.name not in DIALECT_CONDITIONS[dialect]:
                bad.append(cond.name)
            elif cond.negated and not DIALECT_NEGATION[dialect]:
                bad.append(str(cond))
    return bad


def check_dialect(code: Code, dialect: str) -> None:
    bad = _violations(code, dialect)
    if bad:
        raise DialectError(f"not legal in {dialect} dialect: {', '.join(sorted(set(bad)))}")


# ---------------------------------------------------------------- serialize


def _ser_body(blocks) -> str:
    return "{" + " ".join(_ser_block(b) for b in blocks) + "}"


def _ser_block(b) -> str:
    if isinstance(b, Action):
        return b.name
    if isinstance(b, Repeat):
        return f"Repeat({b.count}){_ser_body(b.body)}"
    if isinstance(b, IfElse):
        return f"IfElse({b.cond}){_ser_body(b.body)}{_ser_body(b.orelse)}"
    return f"{b.kind}({b.cond}){_ser_body(b.body)}"


def serialize(code: Code) -> str:
    return "Run" + _ser_body(code.body)


# -------------------------------------------------------------------- parse

_WORD = re.compile(r"[A-Za-z_][A-Za-z0-9_]*|\d+")


def _tokenize(source: str) -> list[tuple[str, str, int, int]]:
    """Split into (kind, text, line, column) tokens; kinds are name, int, punct."""
    tokens = []
    i, line, col = 0, 1, 1
    n = len(source)
    while i < n:
        ch = source[i]
        if ch == "\n":
            i, line, col = i + 1, line + 1, 1
            continue
        if ch.isspace():
            i, col = i + 1, col + 1
            continue
        if ch in "{}()":
            tokens.append(("punct", ch, line, col))
            i, col = i + 1, col + 1
            continue
        m = _WORD.match(source, i)
        if m is None:
            raise ParseError(f"unexpected character {ch!r}", line, col)
        text = m.group()
        tokens.append(("int" if text[0].isdigit() else "name", text, line, col))
        i, col = m.end(), col + len(text)
    return tokens


class _Parser:
    def __init__(self, source: str):
        self.tokens = _tokenize(source)
        self.i = 0
        end_line = source.count("\n") + 1
        end_col = len(source) - source.rfind("\n")
        self.eof = ("eof", "", end_line, end_col)

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else self.eof

    def next(self):
        tok = self.peek()
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, line, col = self.next()
        if text != value:
            raise ParseError(f"expected {value!r}, got {text or 'end of input'!r}", line, col)

    def program(self) -> tuple:
        self.expect("Run")
        body = self.body(allow_empty=True, owner="Run")
        kind, text, line, col = self.peek()
        if kind != "eof":
            raise ParseError(f"trailing input {text!r}", line, col)
        return body

    def body(self, allow_empty: bool, owner: str) -> tuple:
        _, _, line, col = self.peek()
        self.expect("{")
        out = []
        while self.peek()[1] != "}":
            if self.peek()[0] == "eof":
                _, _, l, c = self.peek()
                raise ParseError("unterminated body", l, c)
            out.append(self.block())
        self.next()
        if not out and not allow_empty:
            raise ParseError(f"empty body of {owner}", line, col)
        return tuple(out)

    def block(self):
        kind, text, line, col = self.next()
        if kind != "name":
            raise ParseError(f"expected a block, got {text!r}", line, col)
        if text in ACTIONS:
            return Action(text)
        if text == "Repeat":
            self.expect("(")
            k, num, l, c = self.next()
            if k != "int" or int(num) < 1:
                raise ParseError(f"Repeat count must be a positive integer, got {num!r}", l, c)
            self.expect(")")
            return Repeat(int(num), self.body(False, text))
        if text in ("RepeatUntil", "While", "If", "IfElse"):
            self.expect("(")
            cond = self.cond()
            self.expect(")")
            body = self.body(False, text)
            if text == "IfElse":
                return IfElse(cond, body, self.body(False, text))
            return {"RepeatUntil": RepeatUntil, "While": While, "If": If}[text](cond, body)
        if text == "Run":
            raise ParseError("Run may only appear at the root", line, col)
        raise ParseError(f"unknown block {text!r}", line, col)

    def cond(self) -> Cond:
        kind, text, line, col = self.next()
        if text == "not":
            self.expect("(")
            k, name, l, c = self.next()
            if name == "not":
                raise ParseError("nested not is not supported", l, c)
            if name not in ALL_CONDITIONS:
                raise ParseError(f"unknown condition {name!r}", l, c)
            self.expect(")")
            return Cond(name, True)
        if text not in ALL_CONDITIONS:
            raise ParseError(f"unknown condition {text!r}", line, col)
        return Cond(text)


def parse(source: str, dialect: str | None = None) -> Code:
    """Parse program text. With ``dialect`` given, names outside that
    dialect are rejected; otherwise the dialect is inferred when unique."""
    body = _Parser(source).program()
    code = Code(body)
    if dialect is not None:
        check_dialect(code, dialect)
        return Code(body, dialect)
    return Code(body, infer_dialect(code))


# --------------------------------------------------------------------- JSON


def _block_to_json(b) -> dict:
    if isinstance(b, Action):
        return {"type": b.name}
    node: dict = {"type": b.kind}
    if isinstance(b, Repeat):
        node["count"] = b.count
    else:
        node["condition"] = str(b.cond)
    if isinstance(b, IfElse):
        node["then"] = [_block_to_json(c) for c in b.body]
        node["else"] = [_block_to_json(c) for c in b.orelse]
    else:
        node["body"] = [_block_to_json(c) for c in b.body]
    return node


def to_json(code: Code) -> dict:
    return {"type": "Run", "body": [_block_to_json(b) for b in code.body]}


def _cond_from_text(text: str) -> Cond:
    m = re.fullmatch(r"not\((\w+)\)", text)
    name, neg = (m.group(1), True) if m else (text, False)
    if name not in ALL_CONDITIONS:
        raise DSLError(f"unknown condition {text!r}")
    return Cond(name, neg)


def _block_from_json(node: dict):
    t = node["type"]
    if t in ACTIONS:
        return Action(t)
    if t == "Repeat":
        return Repeat(int(node["count"]), tuple(_block_from_json(c) for c in node["body"]))
    if t == "IfElse":
        return IfElse(
            _cond_from_text(node["condition"]),
            tuple(_block_from_json(c) for c in node["then"]),
            tuple(_block_from_json(c) for c in node["else"]),
        )
    cls = {"RepeatUntil": RepeatUntil, "While": While, "If": If}.get(t)
    if cls is None:
        raise DSLError(f"unknown block {t!r}")
    return cls(_cond_from_text(node["condition"]), tuple(_block_from_json(c) for c in node["body"]))


def from_json(data: dict) -> Code:
    if data.get("type") != "Run":
        raise DSLError("root must be Run")
    code = Code(tuple(_block_from_json(b) for b in data["body"]))
    # reuse the text validator for body/count invariants
    return parse(serialize(code))
