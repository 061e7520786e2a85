import pytest
from hypothesis import given, strategies as st

from subtaskgen import dsl
from subtaskgen.dsl import Action, Code, Repeat

from strategies import codes


@pytest.mark.parametrize("src,depth,size", [
    ("Run{}", 1, 0),
    ("Run{move}", 1, 1),
    ("Run{Repeat(4){move}}", 2, 2),
    ("Run{RepeatUntil(goal){turnLeft move turnRight}}", 2, 4),
    ("Run{While(frontIsClear){move If(markersPresent){pickMarker}} If(rightIsClear){turnRight}}", 3, 6),
    ("Run{IfElse(pathAhead){move}{turnLeft turnLeft}}", 2, 4),
])
def test_depth_and_size(src, depth, size):
    code = dsl.parse(src)
    assert (dsl.depth(code), dsl.size(code)) == (depth, size)


def test_canonical_text_and_whitespace():
    code = dsl.parse("Run {\n  Repeat ( 2 ) { move\tturnLeft }\n  If(not(frontIsClear)){ putMarker } }")
    assert dsl.serialize(code) == "Run{Repeat(2){move turnLeft} If(not(frontIsClear)){putMarker}}"


def test_blocks_and_conditions():
    code = dsl.parse("Run{While(noMarkersPresent){move IfElse(leftIsClear){turnLeft}{putMarker}}}")
    assert dsl.blocks(code) == {"While", "IfElse", "move", "turnLeft", "putMarker"}
    assert dsl.conditions(code) == {"noMarkersPresent", "leftIsClear"}


def test_paths_offset_else_children():
    code = dsl.parse("Run{IfElse(pathAhead){move move}{turnLeft}}")
    paths = dict(dsl.iter_blocks(code))
    assert paths[(0, 2)] == Action("turnLeft")
    assert dsl.block_at(code, (0, 1)) == Action("move")


@pytest.mark.parametrize("src,fragment", [
    ("Run{Repeat(0){move}}", "positive integer"),
    ("Run{Repeat(2){}}", "empty body"),
    ("Run{jump}", "unknown block"),
    ("Run{If(sunny){move}}", "unknown condition"),
    ("Run{If(not(not(frontIsClear))){move}}", "nested not"),
    ("Run{Run{move}}", "root"),
    ("Run{move} move", "trailing input"),
    ("Run{move", "unterminated"),
    ("Walk{move}", "expected"),
])
def test_parse_errors(src, fragment):
    with pytest.raises(dsl.ParseError) as exc:
        dsl.parse(src)
    assert fragment in str(exc.value)


def test_parse_error_position():
    with pytest.raises(dsl.ParseError) as exc:
        dsl.parse("Run{move\n  hop}")
    assert (exc.value.line, exc.value.column) == (2, 3)


def test_dialects():
    assert dsl.infer_dialect(dsl.parse("Run{move}")) is None
    assert dsl.infer_dialect(dsl.parse("Run{If(pathLeft){move}}")) == dsl.MAZE
    assert dsl.infer_dialect(dsl.parse("Run{putMarker}")) == dsl.KAREL
    with pytest.raises(dsl.DialectError):
        dsl.parse("Run{putMarker}", dsl.MAZE)
    with pytest.raises(dsl.DialectError):
        dsl.parse("Run{If(frontIsClear){move}}", dsl.MAZE)
    with pytest.raises(dsl.DialectError):
        dsl.parse("Run{RepeatUntil(goal){move}}", dsl.KAREL)
    with pytest.raises(dsl.DialectError):
        dsl.parse("Run{putMarker If(pathAhead){move}}")


def test_json_round_trip_example():
    code = dsl.parse("Run{Repeat(3){IfElse(not(frontIsClear)){turnLeft}{move}}}")
    data = dsl.to_json(code)
    assert dsl.from_json(data) == code
    with pytest.raises(dsl.DSLError):
        dsl.from_json({"type": "move"})


@given(codes())
def test_text_round_trip(code):
    text = dsl.serialize(code)
    again = dsl.parse(text, code.dialect)
    assert again == code
    assert dsl.serialize(again) == text


@given(codes())
def test_json_round_trip(code):
    assert dsl.from_json(dsl.to_json(code)) == code


@given(codes(min_size=1), st.data())
def test_size_counts_preorder_paths(code, data):
    paths = [p for p, _ in dsl.iter_blocks(code)]
    assert len(paths) == len(set(paths)) == dsl.size(code)
    path = data.draw(st.sampled_from(paths))
    assert dsl.block_at(code, path) is not None


@given(codes(min_size=1))
def test_wrapping_in_a_loop_adds_one_level(code):
    wrapped = Code((Repeat(2, code.body),), code.dialect)
    assert dsl.depth(wrapped) == dsl.depth(code) + 1
    assert dsl.size(wrapped) == dsl.size(code) + 1
