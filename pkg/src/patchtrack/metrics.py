"""HOTA, CLEAR-MOT (MOTA) and identity (IDF1) metrics.

All matching uses plain area IoU, whatever cost the tracker was run with.
Ground-truth rows flagged as ignored (conf 0) are removed before scoring, and
predictions that match an ignored box are removed with them.

Per-sequence results keep raw counts so that several sequences can be pooled
(:func:`combine`) instead of averaging their scores.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .mot_io import MOTEntry, SequenceData

ALPHAS = tuple(np.round(np.arange(1, 20) * 0.05, 2))
_EPS = np.finfo(float).eps


class EmptyGroundTruth(ValueError):
    pass


def iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IoU between (N, 4) and (M, 4) arrays of ``x, y, w, h`` boxes."""
    if len(a) == 0 or len(b) == 0:
        return np.zeros((len(a), len(b)))
    ax1, ay1 = a[:, 0:1], a[:, 1:2]
    ax2, ay2 = ax1 + a[:, 2:3], ay1 + a[:, 3:4]
    bx1, by1 = b[:, 0], b[:, 1]
    bx2, by2 = bx1 + b[:, 2], by1 + b[:, 3]
    iw = np.clip(np.minimum(ax2, bx2) - np.maximum(ax1, bx1), 0, None)
    ih = np.clip(np.minimum(ay2, by2) - np.maximum(ay1, by1), 0, None)
    inter = iw * ih
    union = (a[:, 2] * a[:, 3])[:, None] + (b[:, 2] * b[:, 3])[None, :] - inter
    return inter / union


def _max_weight(weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Max-weight matching; zero-weight pairs are dropped from the result."""
    if weights.size == 0:
        return np.zeros(0, dtype=int), np.zeros(0, dtype=int)
    rows, cols = linear_sum_assignment(weights, maximize=True)
    keep = weights[rows, cols] > _EPS
    return rows[keep], cols[keep]


@dataclass
class _Frame:
    gt_ids: np.ndarray
    pred_ids: np.ndarray
    sim: np.ndarray


def _boxes(entries: Sequence[MOTEntry]) -> np.ndarray:
    return np.array([[e.box.x, e.box.y, e.box.w, e.box.h] for e in entries], dtype=np.float64).reshape(-1, 4)


def _prepare(gt: SequenceData, pred: SequenceData) -> tuple[list[_Frame], dict[int, int], dict[int, int]]:
    """Per-frame id arrays (compacted to 0..n-1) and IoU matrices."""
    frames = []
    gt_index: dict[int, int] = {}
    pred_index: dict[int, int] = {}
    last = max(gt.frame_count, pred.frame_count)
    for f in range(1, last + 1):
        g_all = gt.frames.get(f, [])
        p_all = list(pred.frames.get(f, []))
        ignored = [e for e in g_all if e.ignored]
        g = [e for e in g_all if not e.ignored]
        if ignored and p_all:
            # drop predictions that cover an ignored region
            sim = iou_matrix(_boxes(ignored), _boxes(p_all))
            r, c = _max_weight(np.where(sim >= 0.5 - _EPS, sim, 0.0))
            drop = set(c.tolist())
            p_all = [p for k, p in enumerate(p_all) if k not in drop]
        for e in g:
            gt_index.setdefault(e.id, len(gt_index))
        for e in p_all:
            pred_index.setdefault(e.id, len(pred_index))
        frames.append(_Frame(
            np.array([gt_index[e.id] for e in g], dtype=int),
            np.array([pred_index[e.id] for e in p_all], dtype=int),
            iou_matrix(_boxes(g), _boxes(p_all)),
        ))
    return frames, gt_index, pred_index


class ClearMOT(NamedTuple):
    mota: float
    fp: int
    fn: int
    idsw: int
    tp: int
    gt_total: int


def _clear_counts(frames: list[_Frame], n_gt: int, iou_thresh: float) -> tuple[int, int, int, int, int]:
    tp = fp = fn = idsw = total = 0
    prev_any = np.full(n_gt, -1)  # last pred matched to each gt id, across gaps
    prev_step = np.full(n_gt, -1)  # pred matched in the previous frame only
    for fr in frames:
        total += len(fr.gt_ids)
        if len(fr.gt_ids) == 0:
            fp += len(fr.pred_ids)
            prev_step[:] = -1
            continue
        if len(fr.pred_ids) == 0:
            fn += len(fr.gt_ids)
            prev_step[:] = -1
            continue
        feasible = fr.sim >= iou_thresh - _EPS
        carried = (fr.pred_ids[None, :] == prev_step[fr.gt_ids][:, None]) & feasible
        # carried-over pairs dominate, then total IoU
        score = np.where(feasible, fr.sim + 1000.0 * carried, 0.0)
        r, c = _max_weight(score)
        g_ids, p_ids = fr.gt_ids[r], fr.pred_ids[c]
        prev = prev_any[g_ids]
        idsw += int(np.sum((prev >= 0) & (prev != p_ids)))
        tp += len(r)
        fn += len(fr.gt_ids) - len(r)
        fp += len(fr.pred_ids) - len(r)
        prev_any[g_ids] = p_ids
        prev_step[:] = -1
        prev_step[g_ids] = p_ids
    return tp, fp, fn, idsw, total


def clear_mot(gt: SequenceData, pred: SequenceData, iou_thresh: float = 0.5) -> ClearMOT:
    frames, gi, _ = _prepare(gt, pred)
    tp, fp, fn, idsw, total = _clear_counts(frames, len(gi), iou_thresh)
    if total == 0:
        raise EmptyGroundTruth(f"sequence {gt.name!r} has no ground-truth boxes")
    return ClearMOT(1.0 - (fp + fn + idsw) / total, fp, fn, idsw, tp, total)


def _id_counts(frames: list[_Frame], n_gt: int, n_pred: int, iou_thresh: float) -> tuple[int, int, int]:
    """IDTP, IDFP, IDFN under the best one-to-one pairing of gt and pred identities."""
    joint = np.zeros((n_gt, n_pred))
    gt_len = np.zeros(n_gt)
    pred_len = np.zeros(n_pred)
    for fr in frames:
        gt_len[fr.gt_ids] += 1
        pred_len[fr.pred_ids] += 1
        r, c = np.nonzero(fr.sim >= iou_thresh - _EPS)
        joint[fr.gt_ids[r], fr.pred_ids[c]] += 1
    r, c = _max_weight(joint)
    idtp = int(joint[r, c].sum())
    return idtp, int(pred_len.sum()) - idtp, int(gt_len.sum()) - idtp


def idf1(gt: SequenceData, pred: SequenceData, iou_thresh: float = 0.5) -> float:
    frames, gi, pi = _prepare(gt, pred)
    idtp, idfp, idfn = _id_counts(frames, len(gi), len(pi), iou_thresh)
    if idtp + idfn == 0:
        raise EmptyGroundTruth(f"sequence {gt.name!r} has no ground-truth boxes")
    return 2 * idtp / (2 * idtp + idfp + idfn)


@dataclass
class HotaCounts:
    """Per-alpha detection counts plus the summed association score over TPs."""

    tp: np.ndarray = field(default_factory=lambda: np.zeros(len(ALPHAS)))
    fn: np.ndarray = field(default_factory=lambda: np.zeros(len(ALPHAS)))
    fp: np.ndarray = field(default_factory=lambda: np.zeros(len(ALPHAS)))
    ass_sum: np.ndarray = field(default_factory=lambda: np.zeros(len(ALPHAS)))

    def __add__(self, other: "HotaCounts") -> "HotaCounts":
        return HotaCounts(self.tp + other.tp, self.fn + other.fn, self.fp + other.fp, self.ass_sum + other.ass_sum)

    def scores(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        deta = self.tp / np.maximum(1.0, self.tp + self.fn + self.fp)
        assa = self.ass_sum / np.maximum(1.0, self.tp)
        return np.sqrt(deta * assa), deta, assa


def _hota_counts(frames: list[_Frame], n_gt: int, n_pred: int) -> HotaCounts:
    # global alignment between identities, from soft per-frame overlaps
    potential = np.zeros((n_gt, n_pred))
    gt_len = np.zeros(n_gt)
    pred_len = np.zeros(n_pred)
    for fr in frames:
        s = fr.sim
        if s.size:
            denom = s.sum(0)[None, :] + s.sum(1)[:, None] - s
            soft = np.divide(s, denom, out=np.zeros_like(s), where=denom > _EPS)
            potential[np.ix_(fr.gt_ids, fr.pred_ids)] += soft
        gt_len[fr.gt_ids] += 1
        pred_len[fr.pred_ids] += 1
    alignment = potential / np.maximum(_EPS, gt_len[:, None] + pred_len[None, :] - potential)

    out = HotaCounts()
    pair_counts = np.zeros((len(ALPHAS), n_gt, n_pred))
    for fr in frames:
        ng, npred = len(fr.gt_ids), len(fr.pred_ids)
        if ng == 0 or npred == 0:
            out.fn += ng
            out.fp += npred
            continue
        weight = alignment[np.ix_(fr.gt_ids, fr.pred_ids)] * fr.sim
        for a, alpha in enumerate(ALPHAS):
            r, c = _max_weight(np.where(fr.sim >= alpha - _EPS, weight, 0.0))
            out.tp[a] += len(r)
            out.fn[a] += ng - len(r)
            out.fp[a] += npred - len(r)
            np.add.at(pair_counts[a], (fr.gt_ids[r], fr.pred_ids[c]), 1)
    for a in range(len(ALPHAS)):
        m = pair_counts[a]
        per_pair = m / np.maximum(1.0, gt_len[:, None] + pred_len[None, :] - m)
        out.ass_sum[a] = float(np.sum(m * per_pair))
    return out


class HotaResult(NamedTuple):
    hota: float
    deta: float
    assa: float
    per_alpha: list[tuple[float, float]]


def _hota_result(counts: HotaCounts) -> HotaResult:
    h, d, a = counts.scores()
    return HotaResult(float(np.mean(h)), float(np.mean(d)), float(np.mean(a)),
                      [(float(al), float(v)) for al, v in zip(ALPHAS, h)])


def hota(gt: SequenceData, pred: SequenceData) -> HotaResult:
    frames, gi, pi = _prepare(gt, pred)
    if not any(len(fr.gt_ids) for fr in frames):
        raise EmptyGroundTruth(f"sequence {gt.name!r} has no ground-truth boxes")
    return _hota_result(_hota_counts(frames, len(gi), len(pi)))


@dataclass
class SequenceCounts:
    """Raw, poolable counts for one or more sequences."""

    tp: int = 0
    fp: int = 0
    fn: int = 0
    idsw: int = 0
    gt_total: int = 0
    idtp: int = 0
    idfp: int = 0
    idfn: int = 0
    hota: HotaCounts = field(default_factory=HotaCounts)

    def __add__(self, other: "SequenceCounts") -> "SequenceCounts":
        return SequenceCounts(
            self.tp + other.tp, self.fp + other.fp, self.fn + other.fn, self.idsw + other.idsw,
            self.gt_total + other.gt_total, self.idtp + other.idtp, self.idfp + other.idfp,
            self.idfn + other.idfn, self.hota + other.hota,
        )


@dataclass
class MetricsReport:
    hota: float
    deta: float
    assa: float
    mota: float
    idf1: float
    counts: SequenceCounts
    per_alpha: list[tuple[float, float]]

    @classmethod
    def from_counts(cls, c: SequenceCounts) -> "MetricsReport":
        if c.gt_total == 0:
            raise EmptyGroundTruth("no ground-truth boxes")
        h = _hota_result(c.hota)
        mota = 1.0 - (c.fp + c.fn + c.idsw) / c.gt_total
        f1 = 2 * c.idtp / (2 * c.idtp + c.idfp + c.idfn)
        return cls(h.hota, h.deta, h.assa, mota, f1, c, h.per_alpha)

    def to_json(self) -> dict:
        """Scores as percentages rounded to 2 decimals, plus raw counts."""
        pct = lambda v: round(100.0 * v, 2)  # noqa: E731
        c = self.counts
        return {
            "hota": pct(self.hota),
            "deta": pct(self.deta),
            "assa": pct(self.assa),
            "mota": pct(self.mota),
            "idf1": pct(self.idf1),
            "counts": {
                "TP": c.tp, "FP": c.fp, "FN": c.fn, "IDSW": c.idsw, "gt_total": c.gt_total,
                "IDTP": c.idtp, "IDFP": c.idfp, "IDFN": c.idfn,
            },
        }


def sequence_counts(gt: SequenceData, pred: SequenceData, iou_thresh: float = 0.5) -> SequenceCounts:
    frames, gi, pi = _prepare(gt, pred)
    tp, fp, fn, idsw, total = _clear_counts(frames, len(gi), iou_thresh)
    idtp, idfp, idfn = _id_counts(frames, len(gi), len(pi), iou_thresh)
    return SequenceCounts(tp, fp, fn, idsw, total, idtp, idfp, idfn, _hota_counts(frames, len(gi), len(pi)))


def evaluate(gt: SequenceData, pred: SequenceData, iou_thresh: float = 0.5) -> MetricsReport:
    """All five scores for one sequence."""
    return MetricsReport.from_counts(sequence_counts(gt, pred, iou_thresh))


def combine(counts: Iterable[SequenceCounts]) -> MetricsReport:
    total = SequenceCounts()
    for c in counts:
        total = total + c
    return MetricsReport.from_counts(total)


def evaluate_many(pairs: dict[str, tuple[SequenceData, SequenceData]], iou_thresh: float = 0.5) -> dict[str, MetricsReport]:
    """Per-sequence reports plus a pooled ``COMBINED`` entry, in name order."""
    counts = {name: sequence_counts(g, p, iou_thresh) for name, (g, p) in sorted(pairs.items())}
    reports = {name: MetricsReport.from_counts(c) for name, c in counts.items()}
    reports["COMBINED"] = combine(counts.values())
    return reports


def report_json(reports: dict[str, MetricsReport]) -> dict:
    return {name: r.to_json() for name, r in reports.items()}
