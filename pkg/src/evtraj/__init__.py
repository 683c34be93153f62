"""Event-camera trajectory prediction with spatial vs fixed-rate sampling.

Pipeline: simulate a bouncing ball as an event stream, track it with a
region-of-interest tracker, sub-sample the track, and predict future
(x, y, arrival time) points with an encoder-decoder LSTM written in numpy.
"""

from evtraj.events import (
    EVENT_DTYPE,
    SENSOR_HEIGHT,
    SENSOR_WIDTH,
    BallState,
    Event,
    SimConfig,
    centre_at,
    generate_events,
    random_throw,
    simulate_trajectory,
)
from evtraj.tracker import TRACK_DTYPE, TrackerState, TrackPoint, track_stream, tracker_init, tracker_push
from evtraj.sampling import (
    FixedRate,
    SampledSequence,
    Spatial,
    gap_rates,
    matched_rate_pairs,
    mean_rate,
    pooled_rate,
    subsample,
)
from evtraj.seq2seq import (
    AdamState,
    LossCurve,
    LstmLayerParams,
    NormalizationSpec,
    Seq2SeqModel,
    TrainConfig,
    TrainingDivergedError,
    adam_step,
    backward,
    decode,
    encode,
    forward,
    loss_and_grads,
    lstm_cell_backward,
    lstm_cell_forward,
    mse_loss,
    predict,
    train,
)
from evtraj.dataset import (
    TrajectoryCorpus,
    WindowPair,
    WindowSet,
    augment,
    flip_augment,
    make_splits,
    make_windows,
    synthetic_corpus,
    synthetic_track,
    synthetic_tracks,
)
from evtraj.evaluation import (
    ErrorDecomposition,
    SweepPoint,
    SweepResult,
    compare_strategies,
    error_decompose,
    evaluate,
    rate_profile,
    summary_json,
    sweep_win,
    sweep_wout,
    train_and_evaluate,
)
from evtraj.formats import (
    FormatError,
    load_model,
    read_corpus,
    read_events,
    read_track,
    save_model,
    write_corpus,
    write_events,
    write_track,
)

__version__ = "0.1.0"

__all__ = [
    "EVENT_DTYPE",
    "SENSOR_HEIGHT",
    "SENSOR_WIDTH",
    "BallState",
    "Event",
    "SimConfig",
    "centre_at",
    "generate_events",
    "random_throw",
    "simulate_trajectory",
    "TRACK_DTYPE",
    "TrackerState",
    "TrackPoint",
    "track_stream",
    "tracker_init",
    "tracker_push",
    "FixedRate",
    "Spatial",
    "SampledSequence",
    "subsample",
    "gap_rates",
    "mean_rate",
    "pooled_rate",
    "matched_rate_pairs",
    "AdamState",
    "LossCurve",
    "LstmLayerParams",
    "NormalizationSpec",
    "Seq2SeqModel",
    "TrainConfig",
    "TrainingDivergedError",
    "adam_step",
    "backward",
    "decode",
    "encode",
    "forward",
    "loss_and_grads",
    "lstm_cell_backward",
    "lstm_cell_forward",
    "mse_loss",
    "train",
    "predict",
    "TrajectoryCorpus",
    "WindowPair",
    "WindowSet",
    "augment",
    "flip_augment",
    "make_splits",
    "make_windows",
    "synthetic_corpus",
    "synthetic_track",
    "synthetic_tracks",
    "ErrorDecomposition",
    "SweepPoint",
    "SweepResult",
    "error_decompose",
    "evaluate",
    "train_and_evaluate",
    "summary_json",
    "sweep_wout",
    "sweep_win",
    "compare_strategies",
    "rate_profile",
    "FormatError",
    "load_model",
    "read_corpus",
    "read_events",
    "read_track",
    "save_model",
    "write_corpus",
    "write_events",
    "write_track",
]
