import xml.etree.ElementTree as ET

import pytest

from subtaskgen import dsl
from subtaskgen.fixtures import karel_grid, maze_grid
from subtaskgen.render import ascii_frame, frame, svg_frame


def test_ascii_maze_golden():
    g = maze_grid(["#####", "#..G#", "#####"], (1, 1, "E"))
    assert ascii_frame(g) == "#####\n#>.G#\n#####\n"


def test_ascii_karel_markers():
    g = karel_grid(["...", ".#."], (1, 0, "N"), dsl.parse("Run{putMarker putMarker}", dsl.KAREL))
    # markers in the pre-state only; the avatar hides its own cell
    assert ascii_frame(g) == "...\n^#.\n"
    g2 = karel_grid(["2..", "..."], (1, 2, "W"), dsl.parse("Run{}", dsl.KAREL))
    assert ascii_frame(g2) == "2..\n..<\n"


def test_svg_is_well_formed():
    g = maze_grid(["####", "#.G#", "####"], (1, 1, "S"))
    doc = svg_frame(g, "a < b")
    root = ET.fromstring(doc)
    ns = "{http://www.w3.org/2000/svg}"
    assert root.tag == f"{ns}svg"
    assert len(root.findall(f"{ns}rect")) == 12
    assert len(root.findall(f"{ns}polygon")) == 1
    assert root.find(f"{ns}title").text == "a < b"
    assert 'fill="#f4c542"' in doc


def test_frame_dispatch():
    g = maze_grid(["G.", ".."], (0, 1, "W"))
    assert frame(g) == ascii_frame(g)
    assert frame(g, "svg").startswith("<svg")
    with pytest.raises(ValueError):
        frame(g, "png")
