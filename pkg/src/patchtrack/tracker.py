"""Two-stage association: Hungarian on high-score boxes, then trajectory patching.

Per frame, in order:

1. predict every live track one frame ahead;
2. split detections into high and low score sets;
3. match all live tracks to the high set (gated Hungarian on the configured
   cost matrix);
4. let unmatched trusted tracks claim low-score boxes greedily, anchored on
   their last observation;
5. update matched tracks; trusted leftovers coast on their own prediction
   for at most ``pseudo_ttl`` frames;
6. age, confirm and remove tracks, then spawn tracks from unmatched high boxes.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Mapping, Optional, Sequence

from .assignment import Assignment, greedy_best_iou, hungarian_solve
from .geometry import BBox, CostKind, IoUKind, build_cost_matrix
from .motion import KalmanNoise, KalmanState, kf_init, kf_predict, kf_update, state_to_bbox


class ConfigError(ValueError):
    pass


class NonMonotonicFrame(ValueError):
    pass


@dataclass(frozen=True)
class Detection:
    frame: int
    box: BBox
    score: float

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"detection score {self.score} outside [0, 1]")


class TrackStatus(str, Enum):
    TENTATIVE = "tentative"
    CONFIRMED = "confirmed"
    REMOVED = "removed"


@dataclass
class TrackerConfig:
    tau_high: float = 0.6
    tau_low: float = 0.1
    match_gate: float = 0.8
    cost_kind: CostKind = CostKind.HEIGHT
    patch_iou_kind: IoUKind = IoUKind.CIOU
    # above 1.0 no IoU variant can qualify, which switches patching off
    patch_min: float = 0.3
    tau_trust: float = 0.5
    pseudo_ttl: int = 3
    min_hits: int = 3
    max_age: int = 30
    kf_std_position: float = 1.0 / 20
    kf_std_velocity: float = 1.0 / 160

    def __post_init__(self):
        try:
            self.cost_kind = CostKind(self.cost_kind)
            self.patch_iou_kind = IoUKind(self.patch_iou_kind)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def validate(self) -> "TrackerConfig":
        if not 0.0 <= self.tau_low < self.tau_high <= 1.0:
            raise ConfigError(f"need 0 <= tau_low < tau_high <= 1, got {self.tau_low}, {self.tau_high}")
        if not self.match_gate > 0:
            raise ConfigError("match_gate must be positive")
        if self.pseudo_ttl < 0:
            raise ConfigError("pseudo_ttl must be >= 0")
        if self.min_hits < 1:
            raise ConfigError("min_hits must be >= 1")
        if self.max_age < 1:
            raise ConfigError("max_age must be >= 1")
        if not (self.kf_std_position > 0 and self.kf_std_velocity > 0):
            raise ConfigError("Kalman noise weights must be positive")
        return self

    @property
    def noise(self) -> KalmanNoise:
        return KalmanNoise(self.kf_std_position, self.kf_std_velocity)

    @property
    def patching_enabled(self) -> bool:
        return self.patch_min <= 1.0

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["cost_kind"] = self.cost_kind.value
        d["patch_iou_kind"] = self.patch_iou_kind.value
        return d

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "TrackerConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown tracker config keys: {sorted(unknown)}")
        try:
            return cls(**data).validate()
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


@dataclass
class Track:
    id: int
    state: KalmanState
    last_observation: BBox
    confidence: float
    pseudo_count: int = 0
    hits: int = 1
    misses: int = 0
    status: TrackStatus = TrackStatus.TENTATIVE

    @property
    def box(self) -> BBox:
        return state_to_bbox(self.state)

    def trusted(self, cfg: TrackerConfig) -> bool:
        return self.confidence >= cfg.tau_trust


@dataclass
class FrameOutput:
    frame: int
    entries: list[tuple[int, BBox, float]] = field(default_factory=list)


@dataclass
class StepLog:
    """What happened inside the last ``step`` call, keyed by track id."""

    stage1: list[tuple[int, Detection]] = field(default_factory=list)
    stage2: list[tuple[int, Detection]] = field(default_factory=list)
    pseudo: list[int] = field(default_factory=list)
    missed: list[int] = field(default_factory=list)
    spawned: list[int] = field(default_factory=list)
    removed: list[int] = field(default_factory=list)


def split_by_score(dets: Iterable[Detection], cfg: TrackerConfig) -> tuple[list[Detection], list[Detection]]:
    """High boxes (score >= tau_high) and low boxes (tau_low <= score < tau_high)."""
    high, low = [], []
    for d in dets:
        if d.score >= cfg.tau_high:
            high.append(d)
        elif d.score >= cfg.tau_low:
            low.append(d)
    return high, low


def first_association(tracks: Sequence[Track], high_dets: Sequence[Detection], cfg: TrackerConfig) -> Assignment:
    cost = build_cost_matrix([t.box for t in tracks], [d.box for d in high_dets], cfg.cost_kind)
    return hungarian_solve(cost, cfg.match_gate)


def patch_association(
    unmatched_tracks: Iterable[Track],
    low_dets: Sequence[Detection],
    cfg: TrackerConfig,
) -> list[tuple[Track, Detection]]:
    """Greedy recovery of low-score boxes for unmatched, trusted tracks.

    The most confident track picks first (ties by id); a claimed box leaves the
    pool, so later tracks fall through to their next-best candidate.
    """
    if not cfg.patching_enabled:
        return []
    order = sorted((t for t in unmatched_tracks if t.trusted(cfg)), key=lambda t: (-t.confidence, t.id))
    pool = list(low_dets)
    claimed = []
    for track in order:
        idx = greedy_best_iou(track.last_observation, [d.box for d in pool], cfg.patch_iou_kind, cfg.patch_min)
        if idx is not None:
            claimed.append((track, pool.pop(idx)))
    return claimed


def retain_pseudo_observation(track: Track, cfg: TrackerConfig) -> Track:
    """Coast an unmatched trusted track on its own (already predicted) box.

    Returns the track; ``pseudo_count`` tells whether it was retained this frame.
    """
    track.hits = 0
    if track.pseudo_count < cfg.pseudo_ttl:
        pseudo = state_to_bbox(track.state)
        track.state = kf_update(track.state, pseudo, cfg.noise)
        track.last_observation = pseudo
        track.pseudo_count += 1
    else:
        track.misses += 1
    return track


class Tracker:
    """Sequential tracker state for one sequence."""

    def __init__(self, config: Optional[TrackerConfig] = None):
        self.config = (config or TrackerConfig()).validate()
        self.tracks: list[Track] = []
        self.frame: Optional[int] = None
        self.last_log = StepLog()
        self._next_id = 1

    def _spawn(self, det: Detection) -> Track:
        track = Track(
            id=self._next_id,
            state=kf_init(det.box, self.config.noise),
            last_observation=det.box,
            confidence=det.score,
        )
        if track.hits >= self.config.min_hits:
            track.status = TrackStatus.CONFIRMED
        self._next_id += 1
        return track

    def _apply_match(self, track: Track, det: Detection) -> None:
        track.state = kf_update(track.state, det.box, self.config.noise)
        track.last_observation = det.box
        track.confidence = det.score
        track.hits += 1
        track.misses = 0
        track.pseudo_count = 0

    def step(self, frame: int, detections: Sequence[Detection]) -> FrameOutput:
        cfg = self.config
        if self.frame is not None and frame <= self.frame:
            raise NonMonotonicFrame(f"frame {frame} does not follow frame {self.frame}")
        for d in detections:
            if d.frame != frame:
                raise NonMonotonicFrame(f"detection from frame {d.frame} passed to frame {frame}")
        self.frame = frame
        log = StepLog()

        for t in self.tracks:
            t.state = kf_predict(t.state, cfg.noise)

        high, low = split_by_score(detections, cfg)

        stage1 = first_association(self.tracks, high, cfg)
        active: set[int] = set()
        for ti, di, _ in stage1.matches:
            self._apply_match(self.tracks[ti], high[di])
            log.stage1.append((self.tracks[ti].id, high[di]))
            active.add(self.tracks[ti].id)

        leftovers = [self.tracks[i] for i in stage1.unmatched_rows]
        for track, det in patch_association(leftovers, low, cfg):
            self._apply_match(track, det)
            log.stage2.append((track.id, det))
            active.add(track.id)

        for track in leftovers:
            if track.id in active:
                continue
            if track.trusted(cfg):
                retain_pseudo_observation(track, cfg)
                if track.misses == 0:
                    log.pseudo.append(track.id)
                    active.add(track.id)
                    continue
            else:
                track.hits = 0
                track.misses += 1
            log.missed.append(track.id)

        survivors = []
        for t in self.tracks:
            if t.status is TrackStatus.TENTATIVE and t.hits >= cfg.min_hits:
                t.status = TrackStatus.CONFIRMED
            if t.misses > cfg.max_age:
                t.status = TrackStatus.REMOVED
                log.removed.append(t.id)
            else:
                survivors.append(t)
        self.tracks = survivors

        for di in stage1.unmatched_cols:
            track = self._spawn(high[di])
            self.tracks.append(track)
            log.spawned.append(track.id)
            active.add(track.id)

        self.last_log = log
        entries = [
            (t.id, t.box, t.confidence)
            for t in self.tracks
            if t.status is TrackStatus.CONFIRMED and t.id in active
        ]
        return FrameOutput(frame, entries)


def run_tracker(frames: Mapping[int, Sequence[Detection]], config: Optional[TrackerConfig] = None,
                last_frame: Optional[int] = None) -> list[FrameOutput]:
    """Run a fresh tracker over frames ``1..last_frame`` (missing frames are empty)."""
    tracker = Tracker(config)
    if last_frame is None:
        last_frame = max(frames, default=0)
    return [tracker.step(f, frames.get(f, [])) for f in range(1, last_frame + 1)]
