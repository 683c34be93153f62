"""Spatial/temporal RMSE and the experiment sweeps built on it."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from evtraj.dataset import TrajectoryCorpus, WindowSet
from evtraj.sampling import FixedRate, Spatial, matched_rate_pairs, pooled_rate
from evtraj.seq2seq import LossCurve, Seq2SeqModel, TrainConfig, forward, train

log = logging.getLogger(__name__)

AXES = ("w_out", "w_in", "fixed_rate_F", "spatial_D")
CSV_HEADER = ("axis", "axis_value", "spatial_rmse_px", "temporal_rmse_ms", "mean_rate_hz", "n_test_windows")


class ErrorDecomposition(NamedTuple):
    spatial_rmse: float  # px
    temporal_rmse: float  # ms
    n_points: int


def _as_xyt(a):
    """(..., 3) float array of x px, y px, t ms from plain or structured input."""
    if isinstance(a, np.ndarray) and a.dtype.names:
        t = a["t"].astype(np.float64)
        return np.stack([a["x"], a["y"], t / 1000.0], axis=-1).astype(np.float64)
    return np.asarray(a, dtype=np.float64)


def error_decompose(pred, truth) -> ErrorDecomposition:
    """Index-paired spatial and temporal RMSE.

    Inputs are ``(..., 3)`` arrays of ``(x px, y px, arrival ms)``, or
    structured arrays with fields ``x, y, t`` where ``t`` is in µs.
    """
    p = _as_xyt(pred)
    q = _as_xyt(truth)
    if p.shape != q.shape:
        raise ValueError(f"prediction shape {p.shape} does not match truth shape {q.shape}")
    if p.shape[-1] != 3:
        raise ValueError("expected (x, y, t) triples")
    n = int(np.prod(p.shape[:-1]))
    if n == 0:
        raise ValueError("no points to compare")
    d = p - q
    spatial = float(np.sqrt(np.mean(d[..., 0] ** 2 + d[..., 1] ** 2)))
    temporal = float(np.sqrt(np.mean(d[..., 2] ** 2)))
    return ErrorDecomposition(spatial, temporal, n)


def predict_windows(model: Seq2SeqModel, windows: WindowSet) -> np.ndarray:
    """Batched prediction as ``(N, w_out, 3)`` of x px, y px, arrival ms.

    Arrival times are measured from the last observed sample of each window.
    """
    w_out = windows.targets.shape[1]
    out = model.norm.denormalize(forward(model, model.norm.normalize(windows.inputs), w_out))
    out[..., 2] = np.cumsum(out[..., 2], axis=-1)
    return out


def truth_windows(windows: WindowSet) -> np.ndarray:
    truth = windows.targets.copy()
    truth[..., 2] = (windows.target_t - windows.t_last[:, None]) / 1000.0
    return truth


def evaluate(model: Seq2SeqModel, windows: WindowSet) -> ErrorDecomposition:
    if len(windows) == 0:
        raise ValueError("no test windows")
    return error_decompose(predict_windows(model, windows), truth_windows(windows))


@dataclass
class SweepPoint:
    axis_value: float
    error: ErrorDecomposition
    mean_rate_hz: Optional[float] = None
    n_test_windows: int = 0
    w_in: int = 0
    w_out: int = 0
    curve: Optional[LossCurve] = field(default=None, repr=False)


@dataclass
class SweepResult:
    axis: str
    points: list

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"unknown sweep axis {self.axis!r}")
        vals = [p.axis_value for p in self.points]
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValueError(f"sweep axis values must be strictly increasing, got {vals}")

    @property
    def axis_values(self) -> np.ndarray:
        return np.array([p.axis_value for p in self.points], dtype=np.float64)

    @property
    def spatial_rmse(self) -> np.ndarray:
        return np.array([p.error.spatial_rmse for p in self.points])

    @property
    def temporal_rmse(self) -> np.ndarray:
        return np.array([p.error.temporal_rmse for p in self.points])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for p in self.points:
            rate = "" if p.mean_rate_hz is None else repr(float(p.mean_rate_hz))
            w.writerow([self.axis, repr(float(p.axis_value)), repr(p.error.spatial_rmse),
                        repr(p.error.temporal_rmse), rate, p.n_test_windows])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "SweepResult":
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows:
            raise ValueError("empty sweep CSV")
        axis = rows[0]["axis"]
        points = []
        for r in rows:
            if r["axis"] != axis:
                raise ValueError("mixed axes in one sweep CSV")
            n = int(r["n_test_windows"])
            rate = float(r["mean_rate_hz"]) if r["mean_rate_hz"] else None
            err = ErrorDecomposition(float(r["spatial_rmse_px"]), float(r["temporal_rmse_ms"]), 0)
            points.append(SweepPoint(float(r["axis_value"]), err, rate, n))
        return cls(axis, points)


def config_hash(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def summary_json(results: Sequence[SweepResult], config: dict) -> str:
    payload = {
        "config": config,
        "config_hash": config_hash(config),
        "sweeps": [
            {
                "axis": r.axis,
                "points": [
                    {"axis_value": p.axis_value, "spatial_rmse_px": p.error.spatial_rmse,
                     "temporal_rmse_ms": p.error.temporal_rmse, "n_points": p.error.n_points,
                     "mean_rate_hz": p.mean_rate_hz, "n_test_windows": p.n_test_windows,
                     "w_in": p.w_in, "w_out": p.w_out,
                     "val_spatial_rmse": None if p.curve is None else p.curve.val_spatial_rmse}
                    for p in r.points
                ],
            }
            for r in results
        ],
    }
    return json.dumps(payload, indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

ModelFamily = Callable[[], Seq2SeqModel]


def default_family(seed: int = 0, hidden_size: int = 25) -> ModelFamily:
    return lambda: Seq2SeqModel.create(hidden_size=hidden_size, seed=seed)


def train_and_evaluate(corpus: TrajectoryCorpus, w_in: int, w_out: int, config: TrainConfig,
                       model_family: Optional[ModelFamily] = None, stride: int = 1):
    """Train one model on the corpus's train split and score its test split.

    Returns ``(model, ErrorDecomposition, LossCurve, n_test_windows)``.
    """
    family = model_family or default_family(config.seed)
    tr = corpus.windows("train", w_in, w_out, stride)
    va = corpus.windows("validation", w_in, w_out, 1)
    te = corpus.windows("test", w_in, w_out, 1)
    if len(tr) == 0 or len(va) == 0 or len(te) == 0:
        raise ValueError(
            f"w_in={w_in}, w_out={w_out} leaves an empty split "
            f"(train {len(tr)}, validation {len(va)}, test {len(te)})"
        )
    model, curve = train(family(), tr, va, config)
    err = evaluate(model, te)
    log.info("w_in=%d w_out=%d -> spatial %.3f px, temporal %.3f ms", w_in, w_out, err.spatial_rmse, err.temporal_rmse)
    return model, err, curve, len(te)


def _check_axis(values):
    vals = list(values)
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise ValueError(f"sweep values must be strictly increasing, got {vals}")
    return vals


def sweep_wout(corpus: TrajectoryCorpus, w_in: int = 20, w_out_values=(5, 15, 25, 35, 45),
               config: TrainConfig = TrainConfig(), model_family: Optional[ModelFamily] = None,
               stride: int = 1) -> SweepResult:
    """One freshly initialised model per output length, identical seeds."""
    points = []
    for w_out in _check_axis(w_out_values):
        _, err, curve, n = train_and_evaluate(corpus, w_in, w_out, config, model_family, stride)
        points.append(SweepPoint(w_out, err, None, n, w_in, w_out, curve))
    return SweepResult("w_out", points)


def sweep_win(corpus: TrajectoryCorpus, w_out: int = 45, w_in_values=(5, 10, 20, 40),
              config: TrainConfig = TrainConfig(), model_family: Optional[ModelFamily] = None,
              stride: int = 1) -> SweepResult:
    """One freshly initialised model per input length, identical seeds."""
    points = []
    for w_in in _check_axis(w_in_values):
        _, err, curve, n = train_and_evaluate(corpus, w_in, w_out, config, model_family, stride)
        points.append(SweepPoint(w_in, err, None, n, w_in, w_out, curve))
    return SweepResult("w_in", points)


def window_lengths(rate_hz: float, in_ms: float = 90.0, out_ms: float = 200.0) -> tuple[int, int]:
    """Point counts covering ``in_ms`` / ``out_ms`` at a mean sampling rate."""
    return max(2, int(round(in_ms * rate_hz / 1000.0))), max(1, int(round(out_ms * rate_hz / 1000.0)))


def compare_strategies(raw_corpus: TrajectoryCorpus, D_values=(2, 4, 6), seed: int = 0,
                       config: Optional[TrainConfig] = None, in_ms: float = 90.0, out_ms: float = 200.0,
                       stride: int = 1, hidden_size: int = 25):
    """Spatial sampling vs fixed-rate sampling at the matched mean rate.

    For each ``D`` the raw tracks are spatially sampled, their pooled mean
    rate sets the matched fixed period ``F = 1000 / rate``, and the same raw
    tracks (same splits) are fixed-rate sampled. Both conditions use the
    point counts that span ``in_ms`` and ``out_ms`` at that rate and train
    a model from the same seed.

    Returns ``(spatial_result, fixed_result)``.
    """
    config = config or TrainConfig(seed=seed)
    family = default_family(seed, hidden_size)
    spatial_pts, fixed_pts = [], []
    D_sorted = _check_axis(sorted(D_values))
    for D, F in matched_rate_pairs(raw_corpus.trajectories, D_sorted):
        rate = 1000.0 / F
        w_in, w_out = window_lengths(rate, in_ms, out_ms)
        for strategy, bucket, axis_value in ((Spatial(D), spatial_pts, D), (FixedRate(F), fixed_pts, F)):
            sampled = raw_corpus.resample(strategy)
            realised, _ = pooled_rate(sampled.trajectories)
            _, err, curve, n = train_and_evaluate(sampled, w_in, w_out, config, family, stride)
            bucket.append(SweepPoint(axis_value, err, realised, n, w_in, w_out, curve))
            log.info("%s: rate %.1f Hz, spatial RMSE %.3f px", strategy, realised, err.spatial_rmse)
    return SweepResult("spatial_D", spatial_pts), SweepResult("fixed_rate_F", fixed_pts)


def rate_profile(seq, window_ms: float = 100.0):
    """Sliding-window sample rate over a sampled sequence.

    At each sample time ``t`` at least ``window_ms`` after the first sample,
    the rate is the number of samples in ``(t - window, t]`` divided by the
    window length.

    Returns:
        ``(times_us, rates_hz)`` arrays.
    """
    pts = seq.points if hasattr(seq, "points") else seq
    t = np.asarray(pts["t"], dtype=np.int64)
    if len(t) < 2:
        raise ValueError("need at least two samples for a rate profile")
    if window_ms <= 0:
        raise ValueError("window_ms must be positive")
    w_us = window_ms * 1000.0
    valid = t - t[0] >= w_us
    if not np.any(valid):
        raise ValueError("sequence is shorter than one profile window")
    tq = t[valid]
    hi = np.searchsorted(t, tq, side="right")
    lo = np.searchsorted(t, tq - w_us, side="right")
    return tq, (hi - lo) / (window_ms / 1000.0)


__all__ = [
    "ErrorDecomposition",
    "SweepPoint",
    "SweepResult",
    "error_decompose",
    "evaluate",
    "predict_windows",
    "train_and_evaluate",
    "sweep_wout",
    "sweep_win",
    "compare_strategies",
    "window_lengths",
    "rate_profile",
    "summary_json",
    "config_hash",
]
