"""Two-stage tracking-by-detection with trajectory patching and height-based matching."""

__version__ = "0.1.0"

from .assignment import Assignment, greedy_best_iou, hungarian_solve
from .geometry import BBox, CostKind, IoUKind, build_cost_matrix, ciou, diou, giou, height_iou, iou
from .metrics import MetricsReport, clear_mot, evaluate, hota, idf1
from .motion import DegenerateState, KalmanState, kf_init, kf_predict, kf_update, state_to_bbox
from .mot_io import DuplicateId, Mode, ParseError, SequenceData, parse_mot_file, write_results
from .synth import ScenarioConfig, crossing_fixture, dance_scenario, generate
from .tracker import (
    ConfigError,
    Detection,
    FrameOutput,
    NonMonotonicFrame,
    Track,
    Tracker,
    TrackerConfig,
    TrackStatus,
    run_tracker,
)

__all__ = [
    "Assignment", "greedy_best_iou", "hungarian_solve",
    "BBox", "CostKind", "IoUKind", "build_cost_matrix", "ciou", "diou", "giou", "height_iou", "iou",
    "MetricsReport", "clear_mot", "evaluate", "hota", "idf1",
    "DegenerateState", "KalmanState", "kf_init", "kf_predict", "kf_update", "state_to_bbox",
    "DuplicateId", "Mode", "ParseError", "SequenceData", "parse_mot_file", "write_results",
    "ScenarioConfig", "crossing_fixture", "dance_scenario", "generate",
    "ConfigError", "Detection", "FrameOutput", "NonMonotonicFrame", "Track", "Tracker",
    "TrackerConfig", "TrackStatus", "run_tracker",
]
