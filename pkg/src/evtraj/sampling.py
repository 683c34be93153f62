"""Fixed-rate and spatial sub-sampling of tracker trajectories."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from evtraj.tracker import TRACK_DTYPE, as_track_array


@dataclass(frozen=True)
class FixedRate:
    period_ms: float

    def __post_init__(self):
        if not (math.isfinite(self.period_ms) and self.period_ms > 0):
            raise ValueError(f"period_ms must be positive, got {self.period_ms}")

    def __str__(self):
        return f"fixed:{self.period_ms:g}ms"


@dataclass(frozen=True)
class Spatial:
    delta_px: float

    def __post_init__(self):
        if not (math.isfinite(self.delta_px) and self.delta_px > 0):
            raise ValueError(f"delta_px must be positive, got {self.delta_px}")

    def __str__(self):
        return f"spatial:{self.delta_px:g}px"


SamplingStrategy = Union[FixedRate, Spatial]


@dataclass
class SampledSequence:
    points: np.ndarray
    strategy: SamplingStrategy | None = None

    def __len__(self):
        return len(self.points)

    @property
    def xy(self) -> np.ndarray:
        return np.stack([self.points["x"], self.points["y"]], axis=1)

    @property
    def t(self) -> np.ndarray:
        return self.points["t"]


def _points(traj) -> np.ndarray:
    if isinstance(traj, SampledSequence):
        return traj.points
    return as_track_array(traj)


def subsample(traj, strategy: SamplingStrategy) -> SampledSequence:
    """Greedy causal sub-sampling.

    The first point is always kept. Each later point is kept when it is at
    least ``period_ms`` after (FixedRate) or at least ``delta_px`` away from
    (Spatial) the last kept point. Points sharing the last kept timestamp
    are never kept, so output times are strictly increasing.
    """
    pts = _points(traj)
    t = pts["t"]
    if np.any(t[1:] < t[:-1]):
        raise ValueError("trajectory must be sorted by time")
    if len(pts) == 0:
        return SampledSequence(pts.copy(), strategy)

    xs, ys, ts = pts["x"].tolist(), pts["y"].tolist(), t.tolist()
    keep = [0]
    lx, ly, lt = xs[0], ys[0], ts[0]
    if isinstance(strategy, FixedRate):
        step_us = strategy.period_ms * 1000.0
        for i in range(1, len(ts)):
            if ts[i] > lt and ts[i] - lt >= step_us:
                keep.append(i)
                lt = ts[i]
    elif isinstance(strategy, Spatial):
        d2 = strategy.delta_px * strategy.delta_px
        for i in range(1, len(ts)):
            dx = xs[i] - lx
            dy = ys[i] - ly
            if dx * dx + dy * dy >= d2 and ts[i] > lt:
                keep.append(i)
                lx, ly, lt = xs[i], ys[i], ts[i]
    else:
        raise TypeError(f"unknown sampling strategy {strategy!r}")
    return SampledSequence(pts[np.asarray(keep)], strategy)


def gap_rates(seq) -> np.ndarray:
    """Instantaneous rate 1/dt in Hz for every consecutive pair of points."""
    t = _points(seq)["t"].astype(np.float64)
    if len(t) < 2:
        raise ValueError("need at least two points to measure a rate")
    dt = np.diff(t) / 1e6
    if np.any(dt <= 0):
        raise ValueError("timestamps must be strictly increasing")
    return 1.0 / dt


def mean_rate(seq) -> tuple[float, float]:
    """Mean and population std of the per-gap sampling rate, in Hz."""
    rates = gap_rates(seq)
    return float(rates.mean()), float(rates.std())


def pooled_rate(seqs: Iterable) -> tuple[float, float]:
    """``mean_rate`` over the gaps of several sequences pooled together."""
    rates = [gap_rates(s) for s in seqs if len(_points(s)) >= 2]
    if not rates:
        raise ValueError("no sequence has two or more points")
    allr = np.concatenate(rates)
    return float(allr.mean()), float(allr.std())


def matched_rate_pairs(traj_set: Sequence, D_values: Sequence[float]) -> list[tuple[float, float]]:
    """Fixed-rate period matching the mean spatial sampling rate for each D.

    Returns ``(D, F_ms)`` pairs with ``F_ms = 1000 / mean_rate``, the mean
    taken over all gaps of all spatially sampled trajectories.
    """
    if len(traj_set) == 0:
        raise ValueError("empty trajectory set")
    pairs = []
    for d in D_values:
        seqs = [subsample(tr, Spatial(d)) for tr in traj_set]
        rate, _ = pooled_rate(seqs)
        pairs.append((d, 1000.0 / rate))
    return pairs


__all__ = [
    "TRACK_DTYPE",
    "FixedRate",
    "Spatial",
    "SamplingStrategy",
    "SampledSequence",
    "subsample",
    "gap_rates",
    "mean_rate",
    "pooled_rate",
    "matched_rate_pairs",
]
