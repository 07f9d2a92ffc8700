"""Deterministic synthetic scenarios: perspective-scaled targets with occlusion.

Randomness comes from a fixed generator so that files are reproducible in any
language:

* seeding: four successive outputs of splitmix64 started at ``seed``;
* generator: xoshiro256** (Blackman and Vigna, 2018);
* uniform doubles: ``(next() >> 11) * 2**-53``;
* normal deviates: Box-Muller, ``sqrt(-2 ln(1 - u1)) * cos(2 pi u2)``, one
  deviate per pair of uniforms;
* Poisson counts: Knuth's product-of-uniforms method.

The order of draws is part of the format and is documented in :func:`generate`.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Any, Mapping, Optional

from .geometry import BBox, iou
from .mot_io import MOTEntry, SequenceData
from .tracker import Detection

MASK64 = (1 << 64) - 1
BASE_SCORE = 0.95
OCCLUSION_IOU = 0.3
FP_SCORE_RANGE = (0.1, 0.5)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


def splitmix64(state: int) -> tuple[int, int]:
    """One splitmix64 step: returns ``(new_state, output)``."""
    state = (state + 0x9E3779B97F4A7C15) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


class Xoshiro256:
    """xoshiro256** seeded through splitmix64."""

    def __init__(self, seed: int):
        sm = seed & MASK64
        s = []
        for _ in range(4):
            sm, out = splitmix64(sm)
            s.append(out)
        self.s = s

    def next_u64(self) -> int:
        s = self.s
        result = (_rotl((s[1] * 5) & MASK64, 7) * 9) & MASK64
        t = (s[1] << 17) & MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def random(self) -> float:
        """Uniform double in [0, 1)."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def normal(self, std: float = 1.0) -> float:
        u1 = self.random()
        u2 = self.random()
        return std * math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(2.0 * math.pi * u2)

    def poisson(self, lam: float) -> int:
        if lam <= 0:
            return 0
        limit = math.exp(-lam)
        k, p = 0, self.random()
        while p > limit:
            k += 1
            p *= self.random()
        return k


@dataclass
class ScenarioConfig:
    arena: tuple[float, float] = (1280.0, 720.0)
    n_targets: int = 4
    n_frames: int = 100
    base_height: float = 120.0
    # height = base_height * (1 + perspective_gain * cy / arena_height)
    perspective_gain: float = 1.0
    noise_std: float = 2.0
    occlusion_decay: float = 0.1
    fp_rate: float = 0.2
    miss_score: float = 0.25
    seed: int = 0
    aspect: float = 0.4
    speed_x: float = 8.0
    speed_y: float = 1.5
    turn_prob: float = 0.05
    # optional fixed start states [cx, cy, vx, vy], one per target
    targets: Optional[list[list[float]]] = None

    def __post_init__(self):
        self.arena = (float(self.arena[0]), float(self.arena[1]))
        if self.targets is not None:
            self.targets = [[float(v) for v in t] for t in self.targets]

    def max_height(self) -> float:
        return self.base_height * (1.0 + max(self.perspective_gain, 0.0))

    def validate(self) -> "ScenarioConfig":
        w, h = self.arena
        if not (w > 0 and h > 0):
            raise ValueError("arena sides must be positive")
        if self.n_targets < 1 or self.n_frames < 1:
            raise ValueError("n_targets and n_frames must be positive")
        if not self.base_height > 0 or self.perspective_gain < 0:
            raise ValueError("base_height must be positive and perspective_gain non-negative")
        if not 0.0 <= self.occlusion_decay <= 1.0:
            raise ValueError("occlusion_decay must lie in [0, 1]")
        if self.noise_std < 0 or self.fp_rate < 0:
            raise ValueError("noise_std and fp_rate must be non-negative")
        if not 0.0 < self.aspect:
            raise ValueError("aspect must be positive")
        hmax = self.max_height()
        if hmax >= h or self.aspect * hmax >= w:
            raise ValueError("targets do not fit inside the arena")
        if not 0.0 <= self.turn_prob <= 1.0:
            raise ValueError("turn_prob must lie in [0, 1]")
        if self.targets is not None:
            if len(self.targets) != self.n_targets or any(len(t) != 4 for t in self.targets):
                raise ValueError("targets must hold n_targets entries of [cx, cy, vx, vy]")
        return self

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["arena"] = list(self.arena)
        return d

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ScenarioConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown scenario keys: {sorted(unknown)}")
        return cls(**data).validate()


def _height_at(cfg: ScenarioConfig, cy: float) -> float:
    return cfg.base_height * (1.0 + cfg.perspective_gain * cy / cfg.arena[1])


def _box_at(cfg: ScenarioConfig, cx: float, cy: float) -> BBox:
    h = _height_at(cfg, cy)
    w = cfg.aspect * h
    return BBox(cx - w / 2.0, cy - h / 2.0, w, h)


def _reflect(p: float, v: float, lo: float, hi: float) -> tuple[float, float]:
    """Fold ``p`` back into ``[lo, hi]`` by mirroring at the walls."""
    if lo <= p <= hi:
        return p, v
    span = hi - lo
    n = math.floor((p - lo) / span)
    r = (p - lo) - n * span
    if n % 2 == 0:
        return lo + r, v
    return hi - r, -v


def generate(cfg: ScenarioConfig) -> tuple[SequenceData, SequenceData]:
    """Ground truth and detections for one scenario.

    Draw order: per target (in id order) cx, cy, vx, vy, skipped when start
    states are given in ``cfg.targets``. Then per frame: for
    each target, four normal deviates (x, y, w, h noise, drawn even when the
    detection is dropped); one Poisson count of false positives, each taking
    cy, cx and score; finally, per target, one uniform for the turn test
    followed by vx, vy when it turns.
    """
    cfg.validate()
    rng = Xoshiro256(cfg.seed)
    aw, ah = cfg.arena
    hmax = cfg.max_height()
    wmax = cfg.aspect * hmax
    lo_x, hi_x = wmax / 2.0, aw - wmax / 2.0
    lo_y, hi_y = hmax / 2.0, ah - hmax / 2.0

    pos = []
    vel = []
    for k in range(cfg.n_targets):
        if cfg.targets is not None:
            cx, cy, vx, vy = cfg.targets[k]
            cx, _ = _reflect(cx, 0.0, lo_x, hi_x)
            cy, _ = _reflect(cy, 0.0, lo_y, hi_y)
        else:
            cx = rng.uniform(lo_x, hi_x)
            cy = rng.uniform(lo_y, hi_y)
            vx = rng.uniform(-cfg.speed_x, cfg.speed_x)
            vy = rng.uniform(-cfg.speed_y, cfg.speed_y)
        pos.append([cx, cy])
        vel.append([vx, vy])

    gt = SequenceData("gt")
    dets = SequenceData("det")
    occluded_run = [0] * cfg.n_targets
    for frame in range(1, cfg.n_frames + 1):
        boxes = [_box_at(cfg, cx, cy) for cx, cy in pos]
        gt.frames[frame] = [MOTEntry(k + 1, b, 1.0) for k, b in enumerate(boxes)]

        for k in range(cfg.n_targets):
            hidden = any(
                pos[o][1] > pos[k][1] and iou(boxes[k], boxes[o]) > OCCLUSION_IOU
                for o in range(cfg.n_targets) if o != k
            )
            occluded_run[k] = occluded_run[k] + 1 if hidden else 0

        frame_dets = []
        for k, b in enumerate(boxes):
            nx, ny, nw, nh = (rng.normal(cfg.noise_std) for _ in range(4))
            score = max(0.0, BASE_SCORE - cfg.occlusion_decay * occluded_run[k])
            if score < cfg.miss_score:
                continue
            noisy = BBox(b.x + nx, b.y + ny, max(1.0, b.w + nw), max(1.0, b.h + nh))
            frame_dets.append(Detection(frame, noisy, score))
        for _ in range(rng.poisson(cfg.fp_rate)):
            cy = rng.uniform(lo_y, hi_y)
            cx = rng.uniform(lo_x, hi_x)
            score = rng.uniform(*FP_SCORE_RANGE)
            frame_dets.append(Detection(frame, _box_at(cfg, cx, cy), score))
        if frame_dets:
            dets.frames[frame] = frame_dets

        for k in range(cfg.n_targets):
            if rng.random() < cfg.turn_prob:
                vel[k][0] = rng.uniform(-cfg.speed_x, cfg.speed_x)
                vel[k][1] = rng.uniform(-cfg.speed_y, cfg.speed_y)
            cx, vel[k][0] = _reflect(pos[k][0] + vel[k][0], vel[k][0], lo_x, hi_x)
            cy, vel[k][1] = _reflect(pos[k][1] + vel[k][1], vel[k][1], lo_y, hi_y)
            pos[k] = [cx, cy]
    return gt, dets


# Crossing fixture: a tall target walking right and a short one walking left
# behind it, speeding up while hidden. The short target's score dips
# 0.9 -> 0.3 -> 0.9 around the crossing frame.
FIXTURE_FRAMES = 40
FIXTURE_CENTER = 20
FIXTURE_DIP = 0.12
FIXTURE_SCORE = 0.9


def fixture_boxes(frame: int) -> tuple[BBox, BBox]:
    """Closed-form (tall, short) boxes at ``frame``."""
    tall = BBox(210.0 + 5.0 * (frame - 1), 0.0, 40.0, 100.0)
    turn = FIXTURE_CENTER - 3
    if frame <= turn:
        x = 420.0 - 5.0 * (frame - 1)
    else:
        x = 420.0 - 5.0 * (turn - 1) - 10.0 * (frame - turn)
    return tall, BBox(x, 40.0, 30.0, 30.0)


def fixture_score(frame: int) -> float:
    """Score of the short (occluded) target."""
    d = abs(frame - FIXTURE_CENTER)
    if d >= 5:
        return FIXTURE_SCORE
    return round(FIXTURE_SCORE - FIXTURE_DIP * (5 - d), 2)


def crossing_fixture() -> tuple[SequenceData, SequenceData]:
    gt = SequenceData("crossing")
    dets = SequenceData("crossing")
    for f in range(1, FIXTURE_FRAMES + 1):
        tall, short = fixture_boxes(f)
        gt.frames[f] = [MOTEntry(1, tall, 1.0), MOTEntry(2, short, 1.0)]
        dets.frames[f] = [Detection(f, tall, FIXTURE_SCORE), Detection(f, short, fixture_score(f))]
    return gt, dets


# Few dancers at different depths, fast and erratic sideways motion, little
# vertical motion.
DANCE_PRESET = dict(
    n_targets=3,
    speed_x=20.0,
    speed_y=1.0,
    turn_prob=0.2,
    perspective_gain=0.5,
    occlusion_decay=0.1,
    miss_score=0.25,
)


def dance_scenario(seed: int, **overrides) -> ScenarioConfig:
    return ScenarioConfig(seed=seed, **{**DANCE_PRESET, **overrides}).validate()
