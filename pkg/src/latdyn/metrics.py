"""Per-trajectory dynamic quantities: step distances, continuity, jumps, KL.

Continuity is the mean Euclidean step length of a trajectory.  By default
states are L2-normalized before differencing, so the metric measures angular
motion; raw (unnormalized) distances are kept available because the
simulator's stability checks need them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import Trajectory, ValidationError

KL_EPS = 1e-10

JUMP_METHODS = ("median_mad", "mean_z")
DEFAULT_JUMP_METHOD = "median_mad"
DEFAULT_JUMP_Z = 3.0

# Consistency constant making the MAD an estimator of the Gaussian sigma.
MAD_SCALE = 1.4826


@dataclass
class StepDistances:
    """delta[t] = ||h_t - h_{t-1}||_2 for t = 1..T (stored 0-based)."""

    delta: np.ndarray
    normalized: bool

    def __len__(self):
        return len(self.delta)


@dataclass
class ContinuityReport:
    continuity: float
    delta: StepDistances
    normalized: bool


@dataclass
class JumpReport:
    indices: set[int]            # 1-based step indices, subset of [1, T]
    threshold: float
    method: str
    z: float


@dataclass
class KLReport:
    per_step: np.ndarray         # length T-1
    mean_kl: float


def _normalize_states(states: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(states, axis=1)
    if np.any(norms == 0):
        raise ValidationError("cannot normalize zero state")
    return states / norms[:, None]


def step_distances(traj: Trajectory, normalize: bool = True) -> StepDistances:
    states = traj.states
    if normalize:
        states = _normalize_states(states)
    delta = np.linalg.norm(np.diff(states, axis=0), axis=1)
    return StepDistances(delta=delta, normalized=normalize)


def continuity(traj: Trajectory, normalize: bool = True) -> ContinuityReport:
    """Mean step length (1/T) * sum_t ||h_t - h_{t-1}||."""
    d = step_distances(traj, normalize=normalize)
    return ContinuityReport(continuity=float(np.mean(d.delta)), delta=d, normalized=normalize)


def detect_jumps(delta: StepDistances, method: str = "median_mad", z: float = 3.0) -> JumpReport:
    """Flag steps whose length exceeds a robust outlier threshold.

    median_mad: delta[t] > median + z * 1.4826 * MAD  (default; robust to the
    heavy-tailed step lengths produced at high temperature).
    mean_z:     delta[t] > mean + z * std.
    A constant delta yields an empty jump set, never an error.
    """
    if method not in JUMP_METHODS:
        raise ValidationError(f"unknown jump method {method!r}; expected one of {JUMP_METHODS}")
    if z <= 0:
        raise ValidationError("z must be positive")
    d = np.asarray(delta.delta, dtype=np.float64)
    if d.size < 2:
        raise ValidationError("jump detection needs T >= 2 steps")
    if method == "mean_z":
        threshold = float(np.mean(d) + z * np.std(d))
    else:
        med = float(np.median(d))
        mad = float(np.median(np.abs(d - med)))
        threshold = med + z * MAD_SCALE * mad
    idx = {int(i) + 1 for i in np.nonzero(d > threshold)[0]}
    return JumpReport(indices=idx, threshold=threshold, method=method, z=z)


def _smooth(p: np.ndarray) -> np.ndarray:
    q = p + KL_EPS
    return q / q.sum()


def mean_successive_kl(traj: Trajectory) -> KLReport:
    """KL divergence between each pair of successive token distributions.

    Distributions are epsilon-smoothed before the divergence because top-p
    truncation produces exact zeros, which would make the raw KL infinite.
    """
    if traj.token_distributions is None:
        raise ValidationError("KL unavailable: trajectory has no token_distributions")
    dists = traj.token_distributions
    if dists.shape[0] < 2:
        raise ValidationError("KL needs at least 2 token distributions")
    per_step = np.empty(dists.shape[0] - 1)
    for t in range(per_step.size):
        p = _smooth(dists[t])
        q = _smooth(dists[t + 1])
        per_step[t] = float(np.sum(p * np.log(p / q)))
    per_step = np.maximum(per_step, 0.0)
    return KLReport(per_step=per_step, mean_kl=float(np.mean(per_step)))
