"""Gated Hungarian matching and greedy best-score selection.

``hungarian_solve`` treats every entry above the gate as a forbidden edge and
picks the matching that maximizes ``sum(gate - cost)`` over matched pairs.
That is the usual tracking convention: leaving a row and a column unmatched
costs ``gate``, so a pair is only matched when it is at least as cheap.
Among optimal matchings the result is unique: row 0 gets the smallest column
it can take in some optimum, then row 1, and so on, with "unmatched" ordered
after every column. Near-ties are settled in exact arithmetic on the float
inputs, so costs such as ``0.6`` and ``0.2 + 0.4`` are not conflated.
"""

from __future__ import annotations

import math
from fractions import Fraction
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .geometry import SCORE_FUNCS, BBox, IoUKind


@dataclass
class Assignment:
    matches: list[tuple[int, int, float]] = field(default_factory=list)
    unmatched_rows: list[int] = field(default_factory=list)
    unmatched_cols: list[int] = field(default_factory=list)

    @property
    def total_cost(self) -> float:
        return math.fsum(c for _, _, c in self.matches)


def _lsa_square(cost: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Min-cost perfect assignment on a square matrix.

    Shortest augmenting path with potentials (row by row). Returns
    ``(col_of_row, u, v)`` where ``u`` and ``v`` are optimal duals, i.e.
    ``cost[i, j] - u[i] - v[j] >= 0`` with equality on the assignment.
    """
    n = cost.shape[0]
    inf = math.inf
    dtype = cost.dtype  # float64, or object holding Python ints for exact solves
    # 1-based arrays, index 0 is the virtual source column
    u = np.zeros(n + 1).astype(dtype)
    v = np.zeros(n + 1).astype(dtype)
    if dtype == object:
        u[:] = v[:] = 0
    p = np.zeros(n + 1, dtype=np.int64)  # p[j]: row assigned to column j
    way = np.zeros(n + 1, dtype=np.int64)
    c = np.zeros((n + 1, n + 1)).astype(dtype)
    c[0, :] = 0
    c[:, 0] = 0
    c[1:, 1:] = cost
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, inf, dtype=dtype)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used
            free[0] = False
            cur = c[i0] - u[i0] - v
            better = free & (cur < minv)
            minv[better] = cur[better]
            way[better] = j0
            cand = np.where(free, minv, inf)
            j1 = int(np.argmin(cand))
            delta = cand[j1]
            u[p[used]] += delta
            v[used] -= delta
            minv[free] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    col_of_row = np.empty(n, dtype=np.int64)
    for j in range(1, n + 1):
        col_of_row[p[j] - 1] = j - 1
    return col_of_row, u[1:], v[1:]


def _solve_gain(gain: np.ndarray, allowed: np.ndarray) -> tuple[dict[int, int], float, np.ndarray, np.ndarray]:
    """Max-gain partial matching on ``allowed`` edges (gain >= 0 on allowed ones)."""
    r, k = gain.shape
    if r == 0 or k == 0:
        return {}, 0.0, np.zeros(r), np.zeros(k)
    n = max(r, k)
    square = np.zeros((n, n)).astype(gain.dtype)
    square[:] = 0
    square[:r, :k] = np.where(allowed, -gain, 0)
    col_of_row, u, v = _lsa_square(square)
    match = {i: int(col_of_row[i]) for i in range(r) if col_of_row[i] < k and allowed[i, col_of_row[i]]}
    values = [gain[i, j] for i, j in match.items()]
    value = sum(values) if gain.dtype == object else math.fsum(values)
    return match, value, u[:r], v[:k]


def hungarian_solve(cost, gate: float) -> Assignment:
    """Optimal one-to-one assignment over entries with ``cost <= gate``.

    Args:
        cost: (R, C) array-like of finite costs.
        gate: entries strictly above this are never matched.

    Returns:
        Assignment with matches sorted by row.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.size == 0 and cost.ndim != 2:
        cost = cost.reshape(0, 0)
    if cost.ndim != 2:
        raise ValueError(f"cost must be a 2-D matrix, got shape {cost.shape}")
    r, k = cost.shape
    if r == 0 or k == 0:
        return Assignment([], list(range(r)), list(range(k)))

    allowed = cost <= gate
    gain = np.where(allowed, gate - cost, 0.0)
    tol = 1e-10 * (1.0 + float(np.abs(gain).max()))

    match, value, u, v = _solve_gain(gain, allowed)

    # Any optimum only uses tight edges; if every tight edge is already
    # matched, the optimum is unique up to zero-gain edges, which we keep.
    reduced = -gain - u[:, None] - v[None, :]
    tight = allowed & (np.abs(reduced) <= tol)
    matched_mask = np.zeros_like(allowed)
    for i, j in match.items():
        matched_mask[i, j] = True
    if np.any(tight & ~matched_mask):
        exact = _exact_gain(cost, gate, allowed)
        match, value, _, _ = _solve_gain(exact, allowed)
        match = _lexicographic(exact, allowed, match, value, 0)

    matches = [(i, j, float(cost[i, j])) for i, j in sorted(match.items())]
    used_cols = set(match.values())
    return Assignment(
        matches,
        [i for i in range(r) if i not in match],
        [j for j in range(k) if j not in used_cols],
    )


def _exact_gain(cost: np.ndarray, gate: float, allowed: np.ndarray) -> np.ndarray:
    """``gate - cost`` on allowed edges as exact integers (common dyadic scale)."""
    fracs = [[Fraction(float(gate)) - Fraction(float(x)) if ok else Fraction(0) for x, ok in zip(row, arow)]
             for row, arow in zip(cost, allowed)]
    scale = math.lcm(*(f.denominator for row in fracs for f in row))
    out = np.empty(cost.shape, dtype=object)
    for i, row in enumerate(fracs):
        for j, f in enumerate(row):
            out[i, j] = f.numerator * (scale // f.denominator)
    return out


def _lexicographic(gain, allowed, match, value, tol) -> dict[int, int]:
    """Smallest row-wise column vector among the optimal matchings."""
    r, k = gain.shape
    rows = list(range(r))
    cols = list(range(k))
    current = dict(match)
    target = value
    fixed: dict[int, int] = {}
    for pos, i in enumerate(rows):
        rest_rows = rows[pos + 1:]
        best = current.get(i)
        limit = k if best is None else best
        chosen = None
        for j in cols:
            if j >= limit:
                break
            if not allowed[i, j]:
                continue
            sub_cols = [c for c in cols if c != j]
            sub_match, sub_value, _, _ = _solve_gain(
                gain[np.ix_(rest_rows, sub_cols)], allowed[np.ix_(rest_rows, sub_cols)]
            )
            if abs(gain[i, j] + sub_value - target) <= tol:
                chosen = j
                current = {rest_rows[a]: sub_cols[b] for a, b in sub_match.items()}
                target = sub_value
                break
        if chosen is None:
            chosen = best
            current.pop(i, None)
            if chosen is not None:
                target -= gain[i, chosen]
        if chosen is not None:
            fixed[i] = chosen
            cols = [c for c in cols if c != chosen]
    return fixed


def greedy_best_iou(
    anchor: BBox,
    candidates: Sequence[BBox],
    kind: IoUKind,
    min_score: float,
) -> Optional[int]:
    """Index of the candidate scoring highest against ``anchor``.

    Ties go to the lowest index. Returns None when the list is empty or the best
    score is below ``min_score``.
    """
    score = SCORE_FUNCS[IoUKind(kind)]
    best_idx, best_score = None, -math.inf
    for idx, cand in enumerate(candidates):
        s = score(anchor, cand)
        if s > best_score:
            best_idx, best_score = idx, s
    if best_idx is None or best_score < min_score:
        return None
    return best_idx
