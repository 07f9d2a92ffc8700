"""Constant-velocity Kalman filter over (cx, cy, aspect, height).

The state is the 8-vector ``(cx, cy, a, h, vcx, vcy, va, vh)`` with ``a = w / h``.
Position and velocity noise scale with the current box height, so the filter
behaves the same for near and far targets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .geometry import BBox

NDIM = 4
# state_to_bbox refuses heights at or below this
HEIGHT_EPS = 1e-6
# predict/update clamp height and aspect to this floor
MIN_SIZE = 1e-3

_F = np.eye(2 * NDIM)
_F[:NDIM, NDIM:] = np.eye(NDIM)
_H = np.eye(NDIM, 2 * NDIM)


class DegenerateState(ValueError):
    """Raised when a state cannot be turned back into a valid box."""


@dataclass(frozen=True)
class KalmanNoise:
    """Height-proportional noise weights (std = weight * h)."""

    std_position: float = 1.0 / 20
    std_velocity: float = 1.0 / 160


DEFAULT_NOISE = KalmanNoise()


@dataclass(frozen=True)
class KalmanState:
    mean: np.ndarray
    covariance: np.ndarray

    @property
    def height(self) -> float:
        return float(self.mean[3])


def bbox_to_measurement(box: BBox) -> np.ndarray:
    cx, cy = box.center
    return np.array([cx, cy, box.w / box.h, box.h], dtype=np.float64)


def kf_init(box: BBox, noise: KalmanNoise = DEFAULT_NOISE) -> KalmanState:
    """Start a track at ``box`` with zero velocity."""
    z = bbox_to_measurement(box)
    mean = np.concatenate([z, np.zeros(NDIM)])
    h = box.h
    std = np.array([
        2 * noise.std_position * h,
        2 * noise.std_position * h,
        1e-2,
        2 * noise.std_position * h,
        10 * noise.std_velocity * h,
        10 * noise.std_velocity * h,
        1e-5,
        10 * noise.std_velocity * h,
    ])
    return KalmanState(mean, np.diag(std**2))


def _clamp(mean: np.ndarray) -> np.ndarray:
    mean[2] = max(mean[2], MIN_SIZE)
    mean[3] = max(mean[3], MIN_SIZE)
    return mean


def _symmetrize(p: np.ndarray) -> np.ndarray:
    return 0.5 * (p + p.T)


def kf_predict(state: KalmanState, noise: KalmanNoise = DEFAULT_NOISE) -> KalmanState:
    """Advance one frame under constant velocity."""
    h = state.mean[3]
    std = np.array([
        noise.std_position * h,
        noise.std_position * h,
        1e-2,
        noise.std_position * h,
        noise.std_velocity * h,
        noise.std_velocity * h,
        1e-5,
        noise.std_velocity * h,
    ])
    mean = _clamp(_F @ state.mean)
    cov = _F @ state.covariance @ _F.T + np.diag(std**2)
    return KalmanState(mean, _symmetrize(cov))


def kf_update(state: KalmanState, obs: BBox, noise: KalmanNoise = DEFAULT_NOISE) -> KalmanState:
    """Correct ``state`` with a box observation."""
    h = state.mean[3]
    r = np.array([noise.std_position * h, noise.std_position * h, 1e-1, noise.std_position * h]) ** 2
    proj_mean = _H @ state.mean
    proj_cov = _H @ state.covariance @ _H.T + np.diag(r)

    chol = scipy.linalg.cho_factor(proj_cov, lower=True, check_finite=False)
    gain = scipy.linalg.cho_solve(chol, (state.covariance @ _H.T).T, check_finite=False).T
    innovation = bbox_to_measurement(obs) - proj_mean

    mean = _clamp(state.mean + gain @ innovation)
    cov = state.covariance - gain @ proj_cov @ gain.T
    return KalmanState(mean, _symmetrize(cov))


def state_to_bbox(state: KalmanState) -> BBox:
    cx, cy, a, h = (float(v) for v in state.mean[:NDIM])
    if not h > HEIGHT_EPS:
        raise DegenerateState(f"state height {h} is not positive")
    w = a * h
    if not w > 0:
        raise DegenerateState(f"state width {w} is not positive")
    return BBox(cx - w / 2.0, cy - h / 2.0, w, h)
