import io
import random

import pytest
from hypothesis import given, settings, strategies as st

from patchtrack.geometry import BBox
from patchtrack.mot_io import (
    DuplicateId,
    Mode,
    ParseError,
    format_row,
    outputs_to_sequence,
    parse_mot_file,
    read_mot_file,
    write_results,
    write_sequence,
)
from patchtrack.tracker import Detection, FrameOutput


def test_det_row():
    seq = parse_mot_file("1,-1,10,20,30,40,0.9,-1,-1,-1\n", Mode.DET)
    assert seq.frames == {1: [Detection(1, BBox(10, 20, 30, 40), 0.9)]}
    assert seq.frame_count == 1


def test_non_positive_width():
    with pytest.raises(ParseError) as err:
        parse_mot_file("1,1,0,0,5,5,1\n1,5,10,20,-3,40,1,-1,-1,-1\n", Mode.GT)
    assert err.value.line == 2
    assert "line 2" in str(err.value)


def test_duplicate_id():
    with pytest.raises(DuplicateId):
        parse_mot_file("1,7,0,0,5,5,1,-1,-1,-1\n1,7,3,3,5,5,1,-1,-1,-1\n", Mode.GT)


def test_same_id_other_frame_ok():
    seq = parse_mot_file("1,7,0,0,5,5,1\n2,7,3,3,5,5,1\n", Mode.GT)
    assert seq.ids() == {7} and len(seq) == 2


def test_extra_fields_and_ignore_flag():
    # DanceTrack-style gt with class and visibility columns
    seq = parse_mot_file("3,2,1,2,3,4,0,1,0.5\n", Mode.GT)
    (entry,) = seq.frames[3]
    assert entry.id == 2 and entry.ignored


def test_crlf_and_blank_lines():
    seq = parse_mot_file("1,-1,1,2,3,4,0.5,-1,-1,-1\r\n\r\n2,-1,1,2,3,4,0.7,-1,-1,-1\r\n", Mode.DET)
    assert sorted(seq.frames) == [1, 2]


@pytest.mark.parametrize("line", [
    "1,-1,10,20,30",  # too few fields
    "0,-1,10,20,30,40,0.9",  # frame 0
    "1.5,-1,10,20,30,40,0.9",  # fractional frame
    "1,3,10,20,30,40,0.9",  # det rows need id -1
    "1,-1,10,20,30,40,1.5",  # score above 1
    "1,-1,x,20,30,40,0.9",
    "1,-1,nan,20,30,40,0.9",
    "1,-1,10,20,inf,40,0.9",
    "1,-1,10,20,30,0,0.9",
])
def test_malformed_det_rows(line):
    with pytest.raises(ParseError) as err:
        parse_mot_file(line + "\n", Mode.DET)
    assert err.value.line == 1


def test_write_example():
    out = FrameOutput(1, [(3, BBox(10, 20, 30, 40), 0.9)])
    assert write_results([out]) == "1,3,10.00,20.00,30.00,40.00,0.90,-1,-1,-1\n"


def test_write_empty():
    assert write_results([]) == ""
    assert write_results([FrameOutput(1, [])]) == ""


def test_write_sorted_and_stream():
    outs = [
        FrameOutput(2, [(4, BBox(0, 0, 1, 1), 0.5), (1, BBox(0, 0, 1, 1), 0.5)]),
        FrameOutput(1, [(9, BBox(0, 0, 1, 1), 0.5)]),
    ]
    buf = io.StringIO()
    text = write_results(outs, buf)
    assert buf.getvalue() == text
    assert [tuple(map(int, line.split(",")[:2])) for line in text.splitlines()] == [(1, 9), (2, 1), (2, 4)]


def test_negative_zero_formatting():
    assert format_row(1, 1, BBox(-0.001, 0, 1, 1), 0.5).startswith("1,1,0.00,")


def test_read_file(tmp_path):
    path = tmp_path / "seq.txt"
    path.write_text("1,1,0,0,5,5,1\n", encoding="utf-8")
    assert read_mot_file(path).name == "seq"


entries = st.lists(
    st.tuples(
        st.integers(1, 50),
        st.integers(1, 30),
        st.floats(-1e4, 1e4),
        st.floats(-1e4, 1e4),
        st.floats(0.01, 1e3),
        st.floats(0.01, 1e3),
        st.floats(0.01, 1),
    ),
    max_size=40,
    unique_by=lambda e: (e[0], e[1]),
)


@given(entries)
def test_write_parse_round_trip(rows):
    by_frame = {}
    for f, tid, x, y, w, h, c in rows:
        by_frame.setdefault(f, []).append((tid, BBox(x, y, w, h), c))
    outs = [FrameOutput(f, v) for f, v in sorted(by_frame.items())]
    text = write_results(outs)
    seq = parse_mot_file(text, Mode.GT)
    got = {(f, e.id): e for f, es in seq.frames.items() for e in es}
    assert len(got) == len(rows)
    for f, tid, x, y, w, h, c in rows:
        e = got[f, tid]
        for a, b in zip((e.box.x, e.box.y, e.box.w, e.box.h, e.score), (x, y, w, h, c)):
            assert a == pytest.approx(b, abs=0.005 + 1e-9)
    # a second pass is exact
    assert write_sequence(seq) == text


@given(entries)
def test_line_order_irrelevant(rows):
    by_frame = {}
    for f, tid, x, y, w, h, c in rows:
        by_frame.setdefault(f, []).append((tid, BBox(x, y, w, h), c))
    lines = write_results([FrameOutput(f, v) for f, v in by_frame.items()]).splitlines()
    shuffled = lines[::-1]
    a = parse_mot_file("\n".join(lines), Mode.GT)
    b = parse_mot_file("\n".join(shuffled), Mode.GT)
    assert write_sequence(a) == write_sequence(b)


def test_outputs_to_sequence_skips_empty_frames():
    seq = outputs_to_sequence([FrameOutput(1, []), FrameOutput(2, [(1, BBox(0, 0, 1, 1), 0.5)])])
    assert list(seq.frames) == [2]


TOKENS = ["1", "-1", "0", "3.5", "-7", "1e3", "nan", "inf", "", " ", "abc", "0.9", "1.0000001", "2", "-0", "1e999"]


def mutate(rng, line):
    parts = line.split(",")
    for _ in range(rng.randint(1, 3)):
        op = rng.random()
        if op < 0.3:
            parts[rng.randrange(len(parts))] = rng.choice(TOKENS)
        elif op < 0.45 and len(parts) > 1:
            parts.pop(rng.randrange(len(parts)))
        elif op < 0.6:
            parts.insert(rng.randrange(len(parts) + 1), rng.choice(TOKENS))
        elif op < 0.8:
            s = ",".join(parts)
            i = rng.randrange(len(s) + 1)
            s = s[:i] + chr(rng.randrange(32, 0x3000)) + s[i:]
            parts = s.split(",")
        else:
            parts = ",".join(parts).replace(",", rng.choice([";", " ", ",,"]), 1).split(",")
    return ",".join(parts)


def test_fuzz_parser_is_total():
    rng = random.Random(1234)
    valid = ["1,-1,10,20,30,40,0.9,-1,-1,-1", "4,2,1.5,2.5,3,4,1,-1,-1,-1"]
    outcomes = {"ok": 0, "error": 0}
    for _ in range(10_000):
        text = mutate(rng, rng.choice(valid))
        for mode in Mode:
            try:
                parse_mot_file(text, mode)
                outcomes["ok"] += 1
            except ParseError as err:
                assert err.line >= 1
                outcomes["error"] += 1
    assert outcomes["ok"] > 0 and outcomes["error"] > 0


@settings(max_examples=300)
@given(st.text(max_size=80))
def test_arbitrary_text(text):
    for mode in Mode:
        try:
            parse_mot_file(text, mode)
        except ParseError:
            pass
