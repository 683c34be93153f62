"""Single-target region-of-interest tracker over an event stream.

The tracker collects events that fall inside a square ROI and, every
``accum_threshold`` accepted events, moves the ROI centre to the mean of
the collected positions. Before the first update the ROI is the whole
sensor, which is how the target is acquired.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional

import numpy as np

from evtraj.events import EVENT_DTYPE, SENSOR_HEIGHT, SENSOR_WIDTH, Event, as_event_array

TRACK_DTYPE = np.dtype([("x", "<f8"), ("y", "<f8"), ("t", "<i8")])

DEFAULT_ROI = 40.0
DEFAULT_THRESHOLD = 40


class TrackPoint(NamedTuple):
    x: float
    y: float
    t: int


@dataclass
class TrackerState:
    roi_size: float
    accum_threshold: int
    centre: tuple[float, float] = (SENSOR_WIDTH / 2.0, SENSOR_HEIGHT / 2.0)
    initialized: bool = False
    accum_count: int = 0
    sum_x: int = 0
    sum_y: int = 0

    def in_window(self, x, y) -> bool:
        if not self.initialized:
            return True
        half = 0.5 * self.roi_size
        return abs(x - self.centre[0]) <= half and abs(y - self.centre[1]) <= half


def tracker_init(roi_size: float = DEFAULT_ROI, accum_threshold: int = DEFAULT_THRESHOLD) -> TrackerState:
    if not roi_size > 0:
        raise ValueError(f"roi_size must be positive, got {roi_size}")
    if int(accum_threshold) != accum_threshold or accum_threshold < 1:
        raise ValueError(f"accum_threshold must be an integer >= 1, got {accum_threshold}")
    return TrackerState(roi_size=float(roi_size), accum_threshold=int(accum_threshold))


def tracker_push(state: TrackerState, event: Event) -> Optional[TrackPoint]:
    """Feed one event; returns a TrackPoint when the ROI centre updates."""
    x, y, t = int(event[0]), int(event[1]), int(event[2])
    if not (0 <= x < SENSOR_WIDTH and 0 <= y < SENSOR_HEIGHT):
        raise ValueError(f"event ({x}, {y}) outside the sensor")
    if not state.in_window(x, y):
        return None
    state.sum_x += x
    state.sum_y += y
    state.accum_count += 1
    if state.accum_count < state.accum_threshold:
        return None
    n = state.accum_count
    state.centre = (state.sum_x / n, state.sum_y / n)
    state.initialized = True
    state.accum_count = state.sum_x = state.sum_y = 0
    return TrackPoint(state.centre[0], state.centre[1], t)


def track_stream(
    events: np.ndarray | Iterable[Event],
    roi_size: float = DEFAULT_ROI,
    accum_threshold: int = DEFAULT_THRESHOLD,
    drop_init: bool = False,
) -> np.ndarray:
    """Run the tracker over a time-sorted stream.

    Equivalent to folding ``tracker_push`` over the events, written as a
    flat loop for throughput. With ``drop_init`` the first point, which
    comes from the whole-sensor acquisition window, is discarded.

    Returns:
        Structured array with fields ``x, y, t`` (``TRACK_DTYPE``).
    """
    state = tracker_init(roi_size, accum_threshold)
    ev = as_event_array(events)
    if len(ev) == 0:
        return np.empty(0, dtype=TRACK_DTYPE)
    ts = ev["t"]
    if np.any(ts[1:] < ts[:-1]):
        raise ValueError("events must be sorted by timestamp")

    half = 0.5 * state.roi_size
    threshold = state.accum_threshold
    cx = cy = 0.0
    initialized = False
    sx = sy = n = 0
    out_x, out_y, out_t = [], [], []
    for x, y, t in zip(ev["x"].tolist(), ev["y"].tolist(), ts.tolist()):
        if initialized and (abs(x - cx) > half or abs(y - cy) > half):
            continue
        sx += x
        sy += y
        n += 1
        if n == threshold:
            cx = sx / n
            cy = sy / n
            initialized = True
            sx = sy = n = 0
            out_x.append(cx)
            out_y.append(cy)
            out_t.append(t)

    out = np.empty(len(out_x), dtype=TRACK_DTYPE)
    out["x"], out["y"], out["t"] = out_x, out_y, out_t
    return out[1:] if drop_init else out


def as_track_array(points) -> np.ndarray:
    """Coerce TrackPoints (or an ``(n, 3)`` array) to ``TRACK_DTYPE``."""
    if isinstance(points, np.ndarray) and points.dtype == TRACK_DTYPE:
        return points
    rows = [tuple(p) for p in points]
    out = np.empty(len(rows), dtype=TRACK_DTYPE)
    if rows:
        arr = np.asarray(rows, dtype=np.float64)
        out["x"], out["y"] = arr[:, 0], arr[:, 1]
        out["t"] = np.asarray([int(r[2]) for r in rows], dtype=np.int64)
    return out


__all__ = [
    "EVENT_DTYPE",
    "TRACK_DTYPE",
    "TrackPoint",
    "TrackerState",
    "tracker_init",
    "tracker_push",
    "track_stream",
    "as_track_array",
]
