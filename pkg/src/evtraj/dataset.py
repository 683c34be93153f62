"""Trajectory corpora: synthesis, flip augmentation, splits and windowing."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional, Sequence

import numpy as np

from evtraj.events import SENSOR_WIDTH, SimConfig, generate_events, random_throw, simulate_trajectory
from evtraj.sampling import SampledSequence, SamplingStrategy, subsample
from evtraj.seq2seq import window_triples
from evtraj.tracker import DEFAULT_ROI, DEFAULT_THRESHOLD, track_stream

SPLITS = ("train", "validation", "test")
PAPER_RATIOS = (470, 20, 10)


class WindowPair(NamedTuple):
    input: np.ndarray  # (w_in, 3) px, px, ms
    target: np.ndarray  # (w_out, 3) px, px, ms
    source_id: int
    offset: int
    t_last: int  # µs timestamp of the last input point


@dataclass
class WindowSet:
    """Stacked windows ready for training; all triples in raw units."""

    inputs: np.ndarray
    targets: np.ndarray
    t_last: np.ndarray
    target_t: np.ndarray
    source_ids: np.ndarray

    def __len__(self):
        return len(self.inputs)

    @classmethod
    def empty(cls, w_in: int, w_out: int) -> "WindowSet":
        return cls(np.empty((0, w_in, 3)), np.empty((0, w_out, 3)), np.empty(0, np.int64),
                   np.empty((0, w_out), np.int64), np.empty(0, np.int64))

    @classmethod
    def concat(cls, parts: Sequence["WindowSet"], w_in: int, w_out: int) -> "WindowSet":
        parts = [p for p in parts if len(p)]
        if not parts:
            return cls.empty(w_in, w_out)
        return cls(*(np.concatenate([getattr(p, f) for p in parts])
                     for f in ("inputs", "targets", "t_last", "target_t", "source_ids")))


@dataclass
class TrajectoryCorpus:
    """Sampled (or raw) trajectories with source ids, flip flags and splits.

    ``source_ids`` identify the recording a trajectory came from, so a
    trajectory and its mirror image share an id.
    """

    trajectories: list
    source_ids: list
    flipped: list
    split: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.trajectories)
        if len(self.source_ids) != n or len(self.flipped) != n:
            raise ValueError("trajectories, source_ids and flipped must have equal length")
        if self.split and len(self.split) != n:
            raise ValueError("split labels must cover every trajectory")

    def __len__(self):
        return len(self.trajectories)

    def select(self, split: str) -> list:
        return [tr for tr, s in zip(self.trajectories, self.split) if s == split]

    def resample(self, strategy: SamplingStrategy) -> "TrajectoryCorpus":
        """Apply a sampling strategy to every trajectory, keeping labels."""
        return replace(
            self,
            trajectories=[subsample(tr, strategy) for tr in self.trajectories],
            provenance={**self.provenance, "strategy": str(strategy)},
        )

    def windows(self, split: str, w_in: int, w_out: int, stride: int = 1) -> WindowSet:
        parts = [
            window_set(tr, w_in, w_out, stride, sid)
            for tr, sid, s in zip(self.trajectories, self.source_ids, self.split)
            if s == split
        ]
        return WindowSet.concat(parts, w_in, w_out)


def _pts(traj):
    return traj.points if isinstance(traj, SampledSequence) else traj


def flip_augment(traj, sensor_width: int = SENSOR_WIDTH):
    """Mirror a trajectory left-right: ``x -> (sensor_width - 1) - x``."""
    pts = _pts(traj).copy()
    pts["x"] = (sensor_width - 1) - pts["x"]
    if isinstance(traj, SampledSequence):
        return SampledSequence(pts, traj.strategy)
    return pts


def augment(trajectories: Sequence, source_ids: Optional[Sequence[int]] = None,
            provenance: Optional[dict] = None) -> TrajectoryCorpus:
    """Corpus holding every trajectory followed by its mirror image."""
    ids = list(range(len(trajectories))) if source_ids is None else list(source_ids)
    trajs = list(trajectories) + [flip_augment(t) for t in trajectories]
    return TrajectoryCorpus(trajs, ids + ids, [False] * len(ids) + [True] * len(ids),
                            provenance=dict(provenance or {}))


def split_counts(n_sources: int, ratios=PAPER_RATIOS) -> tuple[int, int, int]:
    total = float(sum(ratios))
    n_val = max(1, int(round(n_sources * ratios[1] / total)))
    n_test = max(1, int(round(n_sources * ratios[2] / total)))
    n_train = n_sources - n_val - n_test
    if n_train < 1:
        raise ValueError(f"{n_sources} source trajectories are too few for a three-way split")
    return n_train, n_val, n_test


def make_splits(corpus: TrajectoryCorpus, ratios=PAPER_RATIOS, seed: int = 0) -> TrajectoryCorpus:
    """Assign train/validation/test labels per source trajectory.

    Sources are shuffled with ``seed`` and cut in proportion to ``ratios``;
    every trajectory inherits the label of its source, so mirror pairs are
    never split apart.
    """
    sources = sorted(set(corpus.source_ids))
    n_train, n_val, _ = split_counts(len(sources), ratios)
    order = np.random.default_rng(seed).permutation(len(sources))
    label = {}
    for rank, k in enumerate(order):
        label[sources[k]] = "train" if rank < n_train else "validation" if rank < n_train + n_val else "test"
    return replace(corpus, split=[label[s] for s in corpus.source_ids],
                   provenance={**corpus.provenance, "split_seed": seed})


def make_windows(traj, w_in: int, w_out: int, stride: int = 1, source_id: int = 0) -> list[WindowPair]:
    """All length ``w_in + w_out`` windows of one trajectory at ``stride``.

    Input dt values start from the sample preceding the window (0 at the
    start of the trajectory); target dt values are per-step intervals.
    """
    if w_in < 1 or w_out < 1 or stride < 1:
        raise ValueError("w_in, w_out and stride must be >= 1")
    ws = window_set(traj, w_in, w_out, stride, source_id)
    offsets = range(0, stride * len(ws), stride)
    return [WindowPair(ws.inputs[k], ws.targets[k], source_id, off, int(ws.t_last[k]))
            for k, off in enumerate(offsets)]


def window_set(traj, w_in: int, w_out: int, stride: int = 1, source_id: int = 0) -> WindowSet:
    if w_in < 1 or w_out < 1 or stride < 1:
        raise ValueError("w_in, w_out and stride must be >= 1")
    pts = _pts(traj)
    span = w_in + w_out
    n = len(pts) - span + 1
    if n <= 0:
        return WindowSet.empty(w_in, w_out)
    triples = window_triples(pts)
    view = np.lib.stride_tricks.sliding_window_view(triples, span, axis=0)[::stride]
    view = view.transpose(0, 2, 1)  # (N, span, 3)
    starts = np.arange(0, n, stride)
    inputs = view[:, :w_in].copy()
    targets = view[:, w_in:].copy()
    t = pts["t"].astype(np.int64)
    t_last = t[starts + w_in - 1]
    target_t = np.lib.stride_tricks.sliding_window_view(t[w_in:], w_out)[::stride][: len(starts)]
    return WindowSet(inputs, targets, t_last, target_t.copy(), np.full(len(starts), source_id))


# ---------------------------------------------------------------------------
# synthetic recordings
# ---------------------------------------------------------------------------


def synthetic_track(seed, sim: SimConfig = SimConfig(), roi_size: float = DEFAULT_ROI,
                    accum_threshold: int = DEFAULT_THRESHOLD, dt: float = 1e-3):
    """Simulate one throw, render events and track them.

    ``seed`` may be an int or a ``SeedSequence``. Returns ``(track, states)``
    where the track omits the whole-sensor acquisition point.
    """
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    throw_seed, event_seed = ss.generate_state(2)
    initial, duration = random_throw(np.random.default_rng(throw_seed), sim)
    states = simulate_trajectory(sim, initial, duration, dt)
    events = generate_events(states, replace(sim, seed=int(event_seed)))
    return track_stream(events, roi_size, accum_threshold, drop_init=True), states


def synthetic_tracks(count: int = 250, seed: int = 0, sim: SimConfig = SimConfig(),
                     roi_size: float = DEFAULT_ROI, accum_threshold: int = DEFAULT_THRESHOLD,
                     dt: float = 1e-3) -> list[np.ndarray]:
    """Raw tracker output for ``count`` independently seeded throws."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [synthetic_track(c, sim, roi_size, accum_threshold, dt)[0] for c in children]


def synthetic_corpus(count: int = 250, seed: int = 0, ratios=PAPER_RATIOS, **kwargs) -> TrajectoryCorpus:
    """Raw (unsampled) synthetic corpus: ``count`` sources plus mirrors, split."""
    tracks = synthetic_tracks(count, seed, **kwargs)
    corpus = augment([SampledSequence(t, None) for t in tracks],
                     provenance={"kind": "synthetic", "seed": seed, "count": count})
    return make_splits(corpus, ratios, seed)
