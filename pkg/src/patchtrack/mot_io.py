"""MOT Challenge text files: detections, ground truth and tracker results.

Rows are ``frame,id,bb_left,bb_top,bb_width,bb_height,conf,x,y,z``. Anything
after ``conf`` is accepted and dropped (DanceTrack gt carries class and
visibility there). In gt/result mode a row with ``conf == 0`` is kept but
flagged as ignored.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import IO, Iterable, Union

from .geometry import BBox
from .tracker import Detection, FrameOutput


class ParseError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class DuplicateId(ParseError):
    pass


class Mode(str, Enum):
    DET = "det"
    GT = "gt"  # ground truth or tracker results


@dataclass(frozen=True)
class MOTEntry:
    id: int
    box: BBox
    score: float

    @property
    def ignored(self) -> bool:
        return self.score == 0


@dataclass
class SequenceData:
    name: str
    frames: dict[int, list] = field(default_factory=dict)

    @property
    def frame_count(self) -> int:
        return max(self.frames, default=0)

    def ids(self) -> set[int]:
        return {e.id for entries in self.frames.values() for e in entries}

    def __len__(self) -> int:
        return sum(len(v) for v in self.frames.values())


def _number(tok: str, what: str, line: int) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise ParseError(f"{what} is not a number: {tok!r}", line) from None
    if not math.isfinite(v):
        raise ParseError(f"{what} is not finite: {tok!r}", line)
    return v


def _integer(tok: str, what: str, line: int) -> int:
    v = _number(tok, what, line)
    if v != int(v):
        raise ParseError(f"{what} is not an integer: {tok!r}", line)
    return int(v)


def parse_mot_file(stream: Union[IO[str], str, Iterable[str]], mode: Mode = Mode.GT, name: str = "") -> SequenceData:
    """Parse a MOT text file into a frame-grouped :class:`SequenceData`.

    Args:
        stream: open text stream, iterable of lines, or the whole file as a string.
        mode: ``Mode.DET`` (id must be -1) or ``Mode.GT`` for gt/result files.
        name: sequence name stored on the result.

    Raises:
        ParseError: malformed row, with its 1-based line number.
        DuplicateId: the same (frame, id) appears twice in gt/result mode.
    """
    mode = Mode(mode)
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    seq = SequenceData(name)
    seen: set[tuple[int, int]] = set()
    for lineno, raw in enumerate(stream, start=1):
        text = raw.strip()
        if not text:
            continue
        parts = [p.strip() for p in text.split(",")]
        if len(parts) < 7:
            raise ParseError(f"expected at least 7 fields, got {len(parts)}", lineno)
        frame = _integer(parts[0], "frame", lineno)
        if frame < 1:
            raise ParseError(f"frame index must be >= 1, got {frame}", lineno)
        tid = _integer(parts[1], "id", lineno)
        x, y, w, h = (_number(p, f, lineno) for p, f in zip(parts[2:6], ("bb_left", "bb_top", "bb_width", "bb_height")))
        if w <= 0 or h <= 0:
            raise ParseError(f"non-positive box size w={w}, h={h}", lineno)
        conf = _number(parts[6], "conf", lineno)
        box = BBox(x, y, w, h)

        if mode is Mode.DET:
            if tid != -1:
                raise ParseError(f"detection rows need id -1, got {tid}", lineno)
            if not 0.0 <= conf <= 1.0:
                raise ParseError(f"detection score {conf} outside [0, 1]", lineno)
            seq.frames.setdefault(frame, []).append(Detection(frame, box, conf))
        else:
            if (frame, tid) in seen:
                raise DuplicateId(f"id {tid} repeated in frame {frame}", lineno)
            seen.add((frame, tid))
            seq.frames.setdefault(frame, []).append(MOTEntry(tid, box, conf))
    return seq


def read_mot_file(path, mode: Mode = Mode.GT, name: str | None = None) -> SequenceData:
    from pathlib import Path

    path = Path(path)
    with open(path, encoding="utf-8", newline=None) as fh:
        return parse_mot_file(fh, mode, name if name is not None else path.stem)


def _fmt(v: float) -> str:
    s = f"{v:.2f}"
    return "0.00" if s == "-0.00" else s


def format_row(frame: int, tid: int, box: BBox, conf: float) -> str:
    return ",".join([str(frame), str(tid), _fmt(box.x), _fmt(box.y), _fmt(box.w), _fmt(box.h), _fmt(conf), "-1,-1,-1"])


def write_results(outputs: Iterable[FrameOutput], stream: IO[str] | None = None) -> str:
    """Serialize tracker output, one line per (frame, id), sorted by (frame, id)."""
    rows = []
    for out in outputs:
        for tid, box, conf in out.entries:
            rows.append((out.frame, tid, box, conf))
    rows.sort(key=lambda r: (r[0], r[1]))
    text = "".join(format_row(*r) + "\n" for r in rows)
    if stream is not None:
        stream.write(text)
    return text


def write_sequence(seq: SequenceData, stream: IO[str] | None = None) -> str:
    """Serialize a gt/result or det :class:`SequenceData` in the same row format."""
    rows = []
    for frame in sorted(seq.frames):
        entries = seq.frames[frame]
        if entries and isinstance(entries[0], Detection):
            rows.extend(format_row(frame, -1, d.box, d.score) for d in entries)
        else:
            rows.extend(format_row(frame, e.id, e.box, e.score) for e in sorted(entries, key=lambda e: e.id))
    text = "".join(r + "\n" for r in rows)
    if stream is not None:
        stream.write(text)
    return text


def outputs_to_sequence(outputs: Iterable[FrameOutput], name: str = "") -> SequenceData:
    seq = SequenceData(name)
    for out in outputs:
        if out.entries:
            seq.frames[out.frame] = [MOTEntry(tid, box, conf) for tid, box, conf in out.entries]
    return seq
